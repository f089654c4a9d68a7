#pragma once

// Seeded generator of composite graphs built from the core op set, paired
// with the finite-difference oracle for gradient soundness checks.

#include <cstdint>
#include <string>
#include <vector>

#include "dtii/core/distributions.hpp"
#include "gradcheck.hpp"

namespace dtii::testing {

enum class OpCode { Affine, Tanh, Sigmoid, Silu, Square, MulGate, AddLeaf, Softmax, LogSoftmax, Gru, ConcatSlice };

struct PlanStep {
  OpCode op;
  int out_width;
  int classes = 0;
};

enum class Head { WeightedSum, Kl, Entropy, Mean };

struct RandomGraph {
  std::vector<ArrayD> inputs;
  std::vector<PlanStep> plan;
  Head head = Head::WeightedSum;
  int head_classes = 2;
  std::size_t param_count = 0;
  std::string description;

  Var<double> build(Tape<double>&, const std::vector<Var<double>>& leaves) const {
    std::size_t next = 0;
    auto take = [&]() { return leaves.at(next++); };
    Var<double> cur = take();
    for (const auto& s : plan) {
      switch (s.op) {
        case OpCode::Affine: {
          auto w = take();
          auto b = take();
          cur = core::affine(cur, w, b);
          break;
        }
        case OpCode::Tanh: cur = core::tanh(cur); break;
        case OpCode::Sigmoid: cur = core::sigmoid(cur); break;
        case OpCode::Silu: cur = core::silu(cur); break;
        case OpCode::Square: cur = core::scale(core::square(cur), 0.3); break;
        case OpCode::MulGate: {
          auto w = take();
          auto b = take();
          cur = core::mul(cur, core::sigmoid(core::affine(cur, w, b)));
          break;
        }
        case OpCode::AddLeaf: cur = core::add(cur, take()); break;
        case OpCode::Softmax: cur = core::softmax_groups(cur, s.classes); break;
        case OpCode::LogSoftmax: cur = core::log_softmax_groups(cur, s.classes); break;
        case OpCode::Gru: {
          auto h = take();
          core::GruParams<double> p{take(), take(), take(), take()};
          cur = core::gated_recurrent_cell(h, cur, p);
          break;
        }
        case OpCode::ConcatSlice: {
          auto both = core::concat_cols<double>({cur, core::tanh(cur)});
          const int w = cur.cols();
          cur = core::add(core::slice_cols(both, 0, w), core::slice_cols(both, w / 2, w / 2 + w));
          break;
        }
      }
    }
    switch (head) {
      case Head::WeightedSum: return core::sum(core::mul(cur, take()));
      case Head::Mean: return core::mean(core::square(cur));
      case Head::Kl: {
        auto other = take();
        return core::kl_categorical(core::CategoricalDist<double>(cur, head_classes),
                                    core::CategoricalDist<double>(other, head_classes));
      }
      case Head::Entropy: return core::entropy_categorical(core::CategoricalDist<double>(cur, head_classes));
    }
    return cur;
  }

  GraphBuilder builder() const {
    return [this](Tape<double>& t, const std::vector<Var<double>>& leaves) { return build(t, leaves); };
  }
};

inline RandomGraph make_random_graph(std::uint64_t seed) {
  core::Rng rng(core::Rng::derive(seed, 0x6a7));
  RandomGraph g;
  const int m = 1 + rng.below(3);
  int width = 2 + rng.below(6);
  auto add_input = [&](core::Shape s, double scale) {
    g.inputs.push_back(random_array(std::move(s), rng, scale));
    g.param_count += g.inputs.back().size();
  };
  add_input({m, width}, 1.0);
  const int steps = 5 + rng.below(4);
  for (int i = 0; i < steps; ++i) {
    const auto op = static_cast<OpCode>(rng.below(11));
    PlanStep s{op, width};
    switch (op) {
      case OpCode::Affine: {
        const int out = 2 + rng.below(8);
        add_input({width, out}, 1.0 / std::sqrt(width));
        add_input({out}, 0.3);
        s.out_width = out;
        break;
      }
      case OpCode::MulGate:
        add_input({width, width}, 1.0 / std::sqrt(width));
        add_input({width}, 0.3);
        break;
      case OpCode::AddLeaf: add_input({m, width}, 0.5); break;
      case OpCode::Softmax:
      case OpCode::LogSoftmax: {
        std::vector<int> divisors;
        for (int c = 2; c <= width; ++c)
          if (width % c == 0) divisors.push_back(c);
        s.classes = divisors[rng.below(static_cast<int>(divisors.size()))];
        break;
      }
      case OpCode::Gru: {
        const int hw = 2 + rng.below(6);
        add_input({m, hw}, 0.5);
        add_input({width, 3 * hw}, 1.0 / std::sqrt(width));
        add_input({3 * hw}, 0.3);
        add_input({hw, 2 * hw}, 1.0 / std::sqrt(hw));
        add_input({hw, hw}, 1.0 / std::sqrt(hw));
        s.out_width = hw;
        break;
      }
      case OpCode::ConcatSlice:
        if (width < 2) s.op = OpCode::Tanh;
        break;
      default: break;
    }
    width = s.out_width;
    g.plan.push_back(s);
    g.description += std::to_string(static_cast<int>(s.op)) + " ";
  }
  g.head = static_cast<Head>(rng.below(4));
  if ((g.head == Head::Kl || g.head == Head::Entropy)) {
    if (width < 2) {
      g.head = Head::WeightedSum;
    } else {
      std::vector<int> divisors;
      for (int c = 2; c <= width; ++c)
        if (width % c == 0) divisors.push_back(c);
      g.head_classes = divisors[rng.below(static_cast<int>(divisors.size()))];
    }
  }
  if (g.head == Head::WeightedSum) add_input({m, width}, 1.0);
  if (g.head == Head::Kl) add_input({m, width}, 1.0);
  return g;
}

}  // namespace dtii::testing
