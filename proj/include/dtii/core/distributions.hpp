#pragma once

// Grouped categorical distributions over logits shaped [rows, groups*classes].

#include <string>

#include "dtii/core/graph.hpp"
#include "dtii/core/rng.hpp"

namespace dtii::core {

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbFloor = 1e-8;

template <class T>
struct CategoricalDist {
  Var<T> logits;
  int classes = 2;

  CategoricalDist(Var<T> l, int c) : logits(l), classes(c) {
    if (c < 2) throw ShapeError("categorical needs at least 2 classes, got " + std::to_string(c));
    if (l.cols() % c != 0)
      throw ShapeError("categorical logits " + shape_str(l.shape()) + " not divisible into groups of " +
                       std::to_string(c));
  }
  int groups() const { return logits.cols() / classes; }
  int rows() const { return logits.rows(); }
};

/// Softmax per group without touching the tape.
template <class T>
Array<T> categorical_probs(const Array<T>& logits, int classes) {
  Array<T> p(logits.shape());
  const std::size_t blocks = logits.size() / classes;
  for (std::size_t b = 0; b < blocks; ++b) {
    const T* in = logits.data() + b * classes;
    T* out = p.data() + b * classes;
    const T mx = *std::max_element(in, in + classes);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (int c = 0; c < classes; ++c) out[c] = static_cast<T>(out[c] / z);
  }
  return p;
}

/// One-hot at the argmax of each group; ties go to the lowest class index.
template <class T>
Array<T> categorical_mode(const Array<T>& logits, int classes) {
  Array<T> out(logits.shape(), T{0});
  const std::size_t blocks = logits.size() / classes;
  for (std::size_t b = 0; b < blocks; ++b) {
    const T* in = logits.data() + b * classes;
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (in[c] > in[best]) best = c;
    out[b * classes + best] = T{1};
  }
  return out;
}

template <class T>
Array<T> categorical_mode(const CategoricalDist<T>& d) {
  return categorical_mode(d.logits.value(), d.classes);
}

/// Draw a one-hot per group from softmax(logits).
template <class T>
Array<T> categorical_draw(const Array<T>& probs, int classes, Rng& rng) {
  Array<T> out(probs.shape(), T{0});
  const std::size_t blocks = probs.size() / classes;
  for (std::size_t b = 0; b < blocks; ++b) {
    const T* p = probs.data() + b * classes;
    const double u = rng.uniform();
    double cum = 0.0;
    int pick = classes - 1;
    for (int c = 0; c < classes; ++c) {
      cum += p[c];
      if (u < cum) {
        pick = c;
        break;
      }
    }
    out[b * classes + pick] = T{1};
  }
  return out;
}

/// One-hot sample whose gradient is routed to the softmax probabilities.
template <class T>
Var<T> categorical_sample_st(const CategoricalDist<T>& d, Rng& rng) {
  auto probs = softmax_groups(d.logits, d.classes);
  return straight_through(categorical_draw(probs.value(), d.classes, rng), probs);
}

/// Mode with the same straight-through gradient path as sampling.
template <class T>
Var<T> categorical_mode_st(const CategoricalDist<T>& d) {
  auto probs = softmax_groups(d.logits, d.classes);
  return straight_through(categorical_mode(d), probs);
}

template <class T>
Var<T> log_probs_clamped(const CategoricalDist<T>& d) {
  return log(clamp_min(softmax_groups(d.logits, d.classes), static_cast<T>(kProbFloor)));
}

/// KL(q || p) per row and group: [rows, groups].
template <class T>
Var<T> kl_categorical_groups(const CategoricalDist<T>& q, const CategoricalDist<T>& p) {
  if (q.logits.rows() != p.logits.rows() || q.logits.cols() != p.logits.cols() || q.classes != p.classes)
    throw ShapeError("kl_categorical: shape mismatch " + shape_str(q.logits.shape()) + " vs " +
                     shape_str(p.logits.shape()));
  auto qp = softmax_groups(q.logits, q.classes);
  auto diff = sub(log_probs_clamped(q), log_probs_clamped(p));
  return sum_groups(mul(qp, diff), q.classes);
}

/// Total KL(q || p) summed over groups and rows.
template <class T>
Var<T> kl_categorical(const CategoricalDist<T>& q, const CategoricalDist<T>& p) {
  return sum(kl_categorical_groups(q, p));
}

template <class T>
Var<T> entropy_categorical_groups(const CategoricalDist<T>& d) {
  auto pp = softmax_groups(d.logits, d.classes);
  return scale(sum_groups(mul(pp, log_probs_clamped(d)), d.classes), T{-1});
}

template <class T>
Var<T> entropy_categorical(const CategoricalDist<T>& d) {
  return sum(entropy_categorical_groups(d));
}

}  // namespace dtii::core
