#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtii::core {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Dense row-major array. Rank-2 is the working rank for graph ops; rank-1
/// arrays are treated as a single row where a matrix is expected.
template <class T>
class Array {
 public:
  using value_type = T;

  Array() = default;
  explicit Array(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Array(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size())
      throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
  }

  static Array matrix(int rows, int cols, std::initializer_list<T> values) {
    return Array({rows, cols}, std::vector<T>(values));
  }
  static Array row(std::initializer_list<T> values) {
    return Array({1, static_cast<int>(values.size())}, std::vector<T>(values));
  }
  static Array scalar(T v) { return Array({1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Array reshaped(Shape s) const {
    if (shape_numel(s) != data_.size())
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return Array(std::move(s), data_);
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Array& a, const Array& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

  template <class U>
  Array<U> cast() const {
    return Array<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using ArrayF = Array<float>;
using ArrayD = Array<double>;

/// Sum in double regardless of storage type.
template <class T>
double sum_wide(std::span<const T> v) {
  double acc = 0.0;
  for (T x : v) acc += static_cast<double>(x);
  return acc;
}

template <class T>
double l2_norm(std::span<const T> v) {
  double acc = 0.0;
  for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

}  // namespace dtii::core
