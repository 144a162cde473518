// Finite-difference gradient cases shared by the unit tests and the
// acceptance runner. Header-only so it compiles against either precision.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "weclick/flow.hpp"
#include "weclick/losses.hpp"
#include "weclick/nets.hpp"

namespace gradcases {

using weclick::Real;
using weclick::Shape;
using weclick::Tensor;
namespace ops = weclick::ops;

struct Case {
  std::string name;
  double error;
  double tolerance;
  bool ok() const { return error < tolerance; }
};

inline constexpr double kOpTolerance = 1e-3;
inline constexpr double kLossTolerance = 5e-3;
// Central-difference step: 1e-3 is the float default; double affords a much
// smaller step, which keeps truncation error off near-zero gradients.
inline constexpr double kEps = sizeof(Real) == 8 ? 1e-5 : 1e-3;

inline double check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  return weclick::grad_check(f, x, kEps);
}

// Values in [lo, hi] with magnitude at least `gap`, so kinks at zero are
// never straddled by the finite-difference step.
inline Tensor away_from_zero(const Shape& shape, std::uint64_t seed, double gap = 0.1) {
  Tensor t = test::random_tensor(shape, seed, -1.0, 1.0);
  for (auto& v : t.mutable_data()) v = static_cast<Real>(v < 0 ? v - gap : v + gap);
  return t;
}

// f(x) = sum(R * (op(x) - op(x0))) with positive random weights R. Centring
// on the base output keeps f near zero, so rounding f to Real does not swamp
// the small differences a float step produces.
inline double weighted_check(const std::function<Tensor(const Tensor&)>& op, const Tensor& x, std::uint64_t seed) {
  const Tensor base = op(x.detach()).detach();
  const Tensor r = test::random_tensor(base.shape(), seed + 1000, 0.5, 1.5);
  return check([&](const Tensor& t) { return ops::reduce_sum(ops::mul(r, ops::sub(op(t), base))); }, x);
}

inline std::vector<Case> op_cases(std::size_t seeds = 10) {
  std::vector<Case> out;
  auto add = [&](const std::string& name, std::uint64_t s, double err) {
    out.push_back({name + "/seed" + std::to_string(s), err, kOpTolerance});
  };
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const Shape sh{1, 2, 3, 4};
    const Tensor a = test::random_tensor(sh, s * 31 + 1), b = test::random_tensor(sh, s * 31 + 2);
    add("add.lhs", s, weighted_check([&](const Tensor& t) { return ops::add(t, b); }, a, s));
    add("add.rhs", s, weighted_check([&](const Tensor& t) { return ops::add(a, t); }, b, s));
    add("sub.lhs", s, weighted_check([&](const Tensor& t) { return ops::sub(t, b); }, a, s));
    add("sub.rhs", s, weighted_check([&](const Tensor& t) { return ops::sub(a, t); }, b, s));
    add("mul.lhs", s, weighted_check([&](const Tensor& t) { return ops::mul(t, b); }, a, s));
    add("mul.rhs", s, weighted_check([&](const Tensor& t) { return ops::mul(a, t); }, b, s));

    // elemwise_max with operands separated by at least 0.1
    Tensor far = a.clone();
    const Tensor offsets = away_from_zero(sh, s * 31 + 3);
    for (std::size_t i = 0; i < far.numel(); ++i) far.mutable_data()[i] = a.at(i) + offsets.at(i);
    add("elemwise_max.lhs", s, weighted_check([&](const Tensor& t) { return ops::elemwise_max(t, far); }, a, s));
    add("elemwise_max.rhs", s, weighted_check([&](const Tensor& t) { return ops::elemwise_max(a, t); }, far, s));

    add("abs", s, weighted_check([](const Tensor& t) { return ops::abs(t); }, away_from_zero(sh, s * 31 + 4), s));
    add("relu", s, weighted_check([](const Tensor& t) { return ops::relu(t); }, away_from_zero(sh, s * 31 + 5), s));
    add("exp", s, weighted_check([](const Tensor& t) { return ops::exp(t); }, test::random_tensor(sh, s * 31 + 6, -2, 2), s));
    add("log", s, weighted_check([](const Tensor& t) { return ops::log(t); }, test::random_tensor(sh, s * 31 + 7, 0.2, 2), s));

    const Tensor x = test::random_tensor({1, 2, 5, 4}, s * 31 + 8);
    const Tensor w = test::random_tensor({3, 2, 3, 3}, s * 31 + 9);
    const Tensor bias = test::random_tensor({3}, s * 31 + 10);
    add("conv2d.input", s, weighted_check([&](const Tensor& t) { return ops::conv2d(t, w, bias); }, x, s));
    add("conv2d.weight", s, weighted_check([&](const Tensor& t) { return ops::conv2d(x, t, bias); }, w, s));
    add("conv2d.bias", s, weighted_check([&](const Tensor& t) { return ops::conv2d(x, w, t); }, bias, s));

    add("upsample2x_bilinear", s,
        weighted_check([](const Tensor& t) { return ops::upsample2x_bilinear(t); }, test::random_tensor({1, 2, 3, 3}, s * 31 + 11), s));
    add("softmax_channel", s,
        weighted_check([](const Tensor& t) { return ops::softmax_channel(t); }, test::random_tensor({1, 4, 3, 2}, s * 31 + 12, -3, 3), s));

    const Tensor red = test::random_tensor({2, 3, 2}, s * 31 + 13);
    add("reduce_sum", s, check([](const Tensor& t) { const Tensor v = ops::reduce_sum(t); return ops::mul(v, v); }, red));
    add("reduce_mean", s, check([](const Tensor& t) { const Tensor v = ops::reduce_mean(t); return ops::mul(v, v); }, red));

    // Sample points with fractional parts in [0.1, 0.9], some outside the frame.
    Tensor coords = test::random_tensor({1, 2, 3, 3}, s * 31 + 14, -1.0, 5.0);
    for (auto& v : coords.mutable_data()) {
      const Real base = std::floor(v);
      Real frac = v - base;
      frac = static_cast<Real>(0.1 + 0.8 * frac);
      v = base + frac;
    }
    add("bilinear_sample", s,
        weighted_check([&](const Tensor& t) { return ops::bilinear_sample(t, coords); }, test::random_tensor({1, 2, 4, 5}, s * 31 + 15), s));
  }
  return out;
}

// 3-class 8x8 toy problem: target frame 1 with two neighbours.
struct Toy {
  std::vector<Tensor> frames;
  weclick::ClickMap clicks{8, 8};
  weclick::SegNet student, teacher;
  std::vector<weclick::FlowField> flows;  // into frame 1 from frames 0 and 2
};

inline Toy make_toy(std::uint64_t seed) {
  Toy toy;
  for (std::size_t f = 0; f < 3; ++f) toy.frames.push_back(test::random_tensor({1, 3, 8, 8}, seed * 7 + f, 0, 1));
  toy.clicks.set(1, 1, 0);
  toy.clicks.set(4, 6, 1);
  toy.clicks.set(6, 2, 2);
  toy.clicks.set(2, 5, 1);
  toy.student = weclick::build_net(weclick::NetRole::student, 4, 3, seed + 100);
  toy.teacher = weclick::build_net(weclick::NetRole::teacher, 6, 3, seed + 200);
  toy.teacher.set_trainable(false);
  toy.flows.push_back(weclick::constant_flow(8, 8, 0.35, -0.6, 0, 1));
  weclick::FlowField irregular = weclick::zero_flow(8, 8, 2, 1);
  const Tensor jitter = test::random_tensor({1, 2, 8, 8}, seed * 7 + 5, -1.4, 1.4);
  for (std::size_t i = 0; i < jitter.numel(); ++i) {
    // keep the fractional part of every sample position away from 0
    const double v = jitter.at(i);
    irregular.grid.mutable_data()[i] = static_cast<Real>(std::floor(v) + 0.15 + 0.7 * (v - std::floor(v)));
  }
  toy.flows.push_back(irregular);
  return toy;
}

// Copy of `net` whose parameter `name` is replaced by `value`.
inline weclick::SegNet with_param(const weclick::SegNet& net, const std::string& name, const Tensor& value) {
  weclick::SegNet out = net;
  out.param(name) = value;
  return out;
}

struct LossFn {
  std::string name;
  std::function<Tensor(const weclick::SegNet& student)> fn;
};

inline std::vector<LossFn> toy_losses(const Toy& toy) {
  using namespace weclick;
  std::vector<LossFn> out;
  const Tensor& xk = toy.frames[1];
  const Tensor teacher_k = forward(toy.teacher, xk);
  std::vector<Tensor> teacher_f = {forward(toy.teacher, toy.frames[0]), forward(toy.teacher, toy.frames[2])};

  auto make_inputs = [=](const SegNet& s) {
    TotalLossInputs in;
    in.target_frame = xk;
    in.student_target = forward(s, xk);
    in.teacher_target = teacher_k;
    in.clicks = toy.clicks;
    for (std::size_t i = 0; i < 2; ++i) {
      in.neighbors.push_back({forward(s, toy.frames[i == 0 ? 0 : 2]), teacher_f[i], toy.flows[i]});
    }
    return in;
  };
  // W is a stop-gradient quantity; hold it at its value for the base weights.
  auto frozen_w = [=](const TotalLossOptions& opt) {
    TotalLossOptions probe = opt;
    return total_loss(make_inputs(toy.student), LossWeights{}, probe).consistency;
  };

  out.push_back({"pce", [=](const SegNet& s) { return partial_cross_entropy(forward(s, xk), toy.clicks); }});
  out.push_back({"regularizer", [=](const SegNet& s) {
                   return gated_pairwise_regularizer(forward(s, xk), xk, toy.clicks, {1, 2.0, 0.5, false});
                 }});
  out.push_back({"weakly", [=](const SegNet& s) { return weakly_loss(forward(s, xk), xk, toy.clicks, 0.1, {}); }});
  const std::vector<Tensor> w_base = frozen_w({});
  for (std::size_t i = 0; i < 2; ++i) {
    out.push_back({"mfd" + std::to_string(i), [=](const SegNet& s) {
                     const Tensor warped = warp(forward(s, toy.frames[i == 0 ? 0 : 2]), toy.flows[i]);
                     return mfd_loss(warped, forward(s, xk), ConsistencyMatrix{w_base[i], WfMode::attenuating_exp});
                   }});
  }
  out.push_back({"kd", [=](const SegNet& s) { return kd_loss(forward(s, toy.frames[0]), teacher_f[0]); }});
  for (auto mode : {WfMode::attenuating_exp, WfMode::paper_exp}) {
    for (bool mask : {false, true}) {
      TotalLossOptions opt;
      opt.wf_mode = mode;
      opt.mask_invalid_warp = mask;
      opt.frozen_consistency = frozen_w(opt);
      out.push_back({"total." + to_string(mode) + (mask ? ".masked" : ""),
                     [=](const SegNet& s) { return total_loss(make_inputs(s), LossWeights{}, opt).total; }});
    }
  }
  return out;
}

// Every toy loss differentiated w.r.t. every student parameter tensor.
inline std::vector<Case> loss_weight_cases(std::size_t seeds = 3) {
  std::vector<Case> out;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const Toy toy = make_toy(s);
    for (const auto& loss : toy_losses(toy)) {
      for (const auto& p : toy.student.params) {
        const double err = check(
            [&](const Tensor& w) { return loss.fn(with_param(toy.student, p.name, w)); }, p.value.detach());
        out.push_back({loss.name + "/" + p.name + "/seed" + std::to_string(s), err, kLossTolerance});
      }
    }
  }
  return out;
}

// Losses differentiated directly w.r.t. their probability-map inputs.
inline std::vector<Case> loss_input_cases(std::size_t seeds = 3) {
  using namespace weclick;
  std::vector<Case> out;
  auto add = [&](const std::string& name, std::uint64_t s, double err) {
    out.push_back({name + "/seed" + std::to_string(s), err, kLossTolerance});
  };
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const Toy toy = make_toy(s);
    const Tensor p = test::random_probs(3, 8, 8, s * 11 + 1);
    const Tensor q = test::random_probs(3, 8, 8, s * 11 + 2);
    const Tensor t = test::random_probs(3, 8, 8, s * 11 + 3);
    add("pce.pred", s, check([&](const Tensor& x) { return partial_cross_entropy(x, toy.clicks); }, p));
    add("regularizer.pred", s,
        check([&](const Tensor& x) { return gated_pairwise_regularizer(x, toy.frames[1], toy.clicks, {}); }, p));
    add("weakly.pred", s, check([&](const Tensor& x) { return weakly_loss(x, toy.frames[1], toy.clicks, 0.1); }, p));
    const ConsistencyMatrix w = consistency_matrix(warp(q, toy.flows[1]), t);
    add("mfd.source", s, check([&](const Tensor& x) { return mfd_loss(warp(x, toy.flows[1]), p, w); }, q));
    add("mfd.target", s, check([&](const Tensor& x) { return mfd_loss(warp(q, toy.flows[1]), x, w); }, p));
    add("kd.student", s, check([&](const Tensor& x) { return kd_loss(x, t); }, p));
  }
  return out;
}

}  // namespace gradcases
