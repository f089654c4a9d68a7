#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dtii/core/array.hpp"
#include "dtii/core/graph.hpp"
#include "dtii/core/rng.hpp"

namespace dtii::core {

/// Ordered collection of named float arrays. The order is fixed by whoever
/// builds the set and is what checkpoints and optimizers index by.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<ArrayF> arrays;

  std::size_t add(std::string name, ArrayF value) {
    names.push_back(std::move(name));
    arrays.push_back(std::move(value));
    return arrays.size() - 1;
  }

  std::size_t size() const { return arrays.size(); }

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("no parameter named '" + name + "'");
  }
  ArrayF& operator[](const std::string& name) { return arrays[index(name)]; }
  const ArrayF& operator[](const std::string& name) const { return arrays[index(name)]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.size();
    return n;
  }

  std::vector<ArrayF*> pointers() {
    std::vector<ArrayF*> out;
    for (auto& a : arrays) out.push_back(&a);
    return out;
  }

  /// FNV-1a over names, shapes and raw values.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      feed(names[i].data(), names[i].size());
      for (int d : arrays[i].shape()) feed(&d, sizeof d);
      feed(arrays[i].data(), arrays[i].size() * sizeof(float));
    }
    return h;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.names == b.names && a.arrays == b.arrays; }
};

/// Weight matrix with entries ~ N(0, gain^2 / fan_in).
inline ArrayF scaled_normal(int fan_in, int fan_out, Rng& rng, double gain = 1.0) {
  ArrayF w({fan_in, fan_out});
  const double sd = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.vec()) v = static_cast<float>(rng.normal() * sd);
  return w;
}

/// Put every array of a set on a tape, in order.
template <class T>
std::vector<Var<T>> bind_params(Tape<T>& tape, const ParamSet& set, bool requires_grad) {
  std::vector<Var<T>> out;
  out.reserve(set.size());
  for (const auto& a : set.arrays) {
    if constexpr (std::is_same_v<T, float>)
      out.push_back(tape.leaf(a, requires_grad));
    else
      out.push_back(tape.leaf(a.template cast<T>(), requires_grad));
  }
  return out;
}

/// Gradients of bound parameters as float arrays (zeros where untouched).
template <class T>
std::vector<ArrayF> collect_grads(Tape<T>& tape, const std::vector<Var<T>>& vars) {
  std::vector<ArrayF> out;
  out.reserve(vars.size());
  for (const auto& v : vars) {
    const auto& g = tape.node(v.id).grad;
    if (g.size() == v.value().size()) {
      if constexpr (std::is_same_v<T, float>)
        out.push_back(g);
      else
        out.push_back(g.template cast<float>());
    } else {
      out.emplace_back(v.shape(), 0.0f);
    }
  }
  return out;
}

}  // namespace dtii::core
