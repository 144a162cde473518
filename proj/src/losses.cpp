#include "weclick/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

void require_prob_map(const char* op, const Tensor& t) {
  if (t.rank() != 4 || t.dim(0) != 1) {
    throw ShapeError(std::string(op) + ": expected (1, C, H, W), got " + shape_to_string(t.shape()));
  }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

// Repeats a (1, 1, H, W) plane across `c` channels as a constant.
Tensor broadcast_channels(std::span<const Real> plane, std::size_t c, std::size_t h, std::size_t w) {
  std::vector<Real> v(c * plane.size());
  for (std::size_t k = 0; k < c; ++k) std::copy(plane.begin(), plane.end(), v.begin() + k * plane.size());
  return Tensor({1, c, h, w}, std::move(v));
}

}  // namespace

Tensor partial_cross_entropy(const Tensor& pred, const ClickMap& clicks) {
  require_prob_map("partial_cross_entropy", pred);
  const std::size_t c = pred.dim(1), h = pred.dim(2), w = pred.dim(3), plane = h * w;
  if (clicks.height() != h || clicks.width() != w) {
    throw ShapeError("partial_cross_entropy: clicks " + std::to_string(clicks.height()) + "x" +
                     std::to_string(clicks.width()) + " do not match prediction " + shape_to_string(pred.shape()));
  }
  clicks.validate();
  const std::size_t m = clicks.count();
  if (m == 0) throw std::invalid_argument("partial_cross_entropy: click mask is all zero");
  std::vector<Real> target(c * plane, Real(0));
  for (std::size_t p = 0; p < plane; ++p) {
    if (!clicks.mask[p]) continue;
    const auto label = clicks.labels.values[p];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw std::invalid_argument("partial_cross_entropy: click label " + std::to_string(label) +
                                  " out of range for " + std::to_string(c) + " classes");
    }
    target[static_cast<std::size_t>(label) * plane + p] = Real(1);
  }
  const Tensor y(pred.shape(), std::move(target));
  return ops::scale(ops::reduce_sum(ops::mul(y, ops::log(pred))), static_cast<Real>(-1.0 / double(m)));
}

double pairwise_kernel(double dy, double dx, double color_dist2, const RegularizerParams& params) {
  double e = -(dy * dy + dx * dx) / (2.0 * params.sigma_xy * params.sigma_xy);
  if (std::isfinite(params.sigma_rgb)) e -= color_dist2 / (2.0 * params.sigma_rgb * params.sigma_rgb);
  return std::exp(e);
}

Tensor gated_pairwise_regularizer(const Tensor& pred, const Tensor& frame, const ClickMap& clicks,
                                  const RegularizerParams& params) {
  require_prob_map("gated_pairwise_regularizer", pred);
  if (params.radius < 1) throw std::invalid_argument("gated_pairwise_regularizer: radius must be >= 1");
  const std::size_t c = pred.dim(1), h = pred.dim(2), w = pred.dim(3), plane = h * w;
  if (frame.rank() != 4 || frame.dim(0) != 1 || frame.dim(2) != h || frame.dim(3) != w) {
    throw ShapeError("gated_pairwise_regularizer: frame " + shape_to_string(frame.shape()) +
                     " does not match prediction " + shape_to_string(pred.shape()));
  }
  const std::size_t fc = frame.dim(1);
  auto img = frame.data();

  Tensor p = pred;
  if (params.detach_clicked && clicks.height() == h && clicks.width() == w && clicks.count() > 0) {
    std::vector<Real> keep(plane), held(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      held[i] = clicks.mask[i] ? Real(1) : Real(0);
      keep[i] = Real(1) - held[i];
    }
    p = ops::add(ops::mul(pred, broadcast_channels(keep, c, h, w)),
                 ops::mul(pred.detach(), broadcast_channels(held, c, h, w)));
  }

  const auto hh = static_cast<std::int64_t>(h), ww = static_cast<std::int64_t>(w);
  Tensor acc;
  double z = 0.0;
  for (int dy = -params.radius; dy <= params.radius; ++dy) {
    for (int dx = -params.radius; dx <= params.radius; ++dx) {
      if (dy == 0 && dx == 0) continue;
      std::vector<Real> kernel(plane, Real(0)), coords(2 * plane);
      double offset_mass = 0.0;
      for (std::int64_t r = 0; r < hh; ++r) {
        for (std::int64_t col = 0; col < ww; ++col) {
          const std::size_t i = static_cast<std::size_t>(r * ww + col);
          coords[i] = static_cast<Real>(r + dy);
          coords[plane + i] = static_cast<Real>(col + dx);
          const auto nr = r + dy, nc = col + dx;
          if (nr < 0 || nc < 0 || nr >= hh || nc >= ww) continue;
          const std::size_t j = static_cast<std::size_t>(nr * ww + nc);
          double d2 = 0.0;
          for (std::size_t k = 0; k < fc; ++k) {
            const double diff = static_cast<double>(img[k * plane + i]) - img[k * plane + j];
            d2 += diff * diff;
          }
          const double kv = pairwise_kernel(dy, dx, d2, params);
          kernel[i] = static_cast<Real>(kv);
          offset_mass += kv;
        }
      }
      if (offset_mass == 0.0) continue;
      z += offset_mass;
      const Tensor neighbor = ops::bilinear_sample(p, Tensor({1, 2, h, w}, std::move(coords)));
      const Tensor disagreement = ops::sub(p, ops::mul(p, neighbor));
      const Tensor term = ops::mul(broadcast_channels(kernel, c, h, w), disagreement);
      acc = acc.defined() ? ops::add(acc, term) : term;
    }
  }
  if (!acc.defined() || z == 0.0) return ops::scale(ops::reduce_sum(pred), Real(0));
  return ops::scale(ops::reduce_sum(acc), static_cast<Real>(1.0 / z));
}

Tensor weakly_loss(const Tensor& pred, const Tensor& frame, const ClickMap& clicks, double lambda,
                   const RegularizerParams& params) {
  if (lambda < 0) throw std::invalid_argument("weakly_loss: lambda must be >= 0");
  Tensor pce = partial_cross_entropy(pred, clicks);
  if (lambda == 0.0) return pce;
  return ops::add(pce, ops::scale(gated_pairwise_regularizer(pred, frame, clicks, params), static_cast<Real>(lambda)));
}

std::string to_string(WfMode mode) { return mode == WfMode::paper_exp ? "paper_exp" : "attenuating_exp"; }

WfMode parse_wf_mode(const std::string& text) {
  if (text == "paper_exp") return WfMode::paper_exp;
  if (text == "attenuating_exp") return WfMode::attenuating_exp;
  throw std::invalid_argument("unknown wf_mode '" + text + "'");
}

ConsistencyMatrix consistency_matrix(const Tensor& warped_student, const Tensor& teacher_k, WfMode mode) {
  require_prob_map("consistency_matrix", warped_student);
  require_same("consistency_matrix", warped_student, teacher_k);
  const std::size_t c = warped_student.dim(1), h = warped_student.dim(2), w = warped_student.dim(3);
  const std::size_t plane = h * w;
  auto a = warped_student.data(), b = teacher_k.data();
  std::vector<Real> weights(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    double d = 0.0;
    for (std::size_t k = 0; k < c; ++k) d += std::abs(static_cast<double>(a[k * plane + p]) - b[k * plane + p]);
    d /= static_cast<double>(c);
    weights[p] = static_cast<Real>(mode == WfMode::paper_exp ? std::exp(d) : std::exp(-d));
  }
  return {Tensor({1, 1, h, w}, std::move(weights)), mode};
}

Tensor mfd_loss(const Tensor& warped_student, const Tensor& student_k, const ConsistencyMatrix& cm,
                const Tensor* valid) {
  require_prob_map("mfd_loss", warped_student);
  require_same("mfd_loss", warped_student, student_k);
  const std::size_t c = warped_student.dim(1), h = warped_student.dim(2), w = warped_student.dim(3);
  if (cm.weights.shape() != Shape{1, 1, h, w}) {
    throw ShapeError("mfd_loss: consistency matrix " + shape_to_string(cm.weights.shape()) +
                     " does not match " + shape_to_string(warped_student.shape()));
  }
  std::vector<Real> weights(cm.weights.data().begin(), cm.weights.data().end());
  if (valid) {
    if (valid->shape() != cm.weights.shape()) throw ShapeError("mfd_loss: validity mask shape mismatch");
    for (std::size_t p = 0; p < weights.size(); ++p) weights[p] *= valid->at(p);
  }
  const Tensor diff = ops::sub(warped_student, student_k);
  const Tensor weighted = ops::mul(broadcast_channels(weights, c, h, w), ops::mul(diff, diff));
  return ops::scale(ops::reduce_sum(weighted), static_cast<Real>(1.0 / double(h * w)));
}

Tensor kd_loss(const Tensor& student_f, const Tensor& teacher_f) {
  require_prob_map("kd_loss", student_f);
  require_same("kd_loss", student_f, teacher_f);
  const Tensor log_t = ops::log(teacher_f.detach());
  const Tensor kl = ops::mul(student_f, ops::sub(ops::log(student_f), log_t));
  const double pixels = static_cast<double>(student_f.dim(2) * student_f.dim(3));
  return ops::scale(ops::reduce_sum(kl), static_cast<Real>(1.0 / pixels));
}

void LossWeights::validate() const {
  if (lambda < 0 || alpha < 0 || beta < 0 || gamma < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

LossBreakdown total_loss(const TotalLossInputs& in, const LossWeights& weights, const TotalLossOptions& options) {
  weights.validate();
  LossBreakdown out;
  auto accumulate = [&out](const Tensor& term, double weight) {
    const Tensor scaled = ops::scale(term, static_cast<Real>(weight));
    out.total = out.total.defined() ? ops::add(out.total, scaled) : scaled;
  };

  // Zero-weighted terms are not evaluated; their sub-totals report 0.
  if (weights.alpha > 0) {
    const Tensor weak = weakly_loss(in.student_target, in.target_frame, in.clicks, weights.lambda, options.regularizer);
    out.weakly = weak.item();
    accumulate(weak, weights.alpha);
  }
  if (weights.beta > 0 && !in.neighbors.empty()) {
    Tensor sum;
    if (!options.frozen_consistency.empty() && options.frozen_consistency.size() != in.neighbors.size()) {
      throw std::invalid_argument("total_loss: " + std::to_string(options.frozen_consistency.size()) +
                                  " frozen consistency maps for " + std::to_string(in.neighbors.size()) + " neighbours");
    }
    for (std::size_t i = 0; i < in.neighbors.size(); ++i) {
      const auto& nb = in.neighbors[i];
      const WarpResult wr = warp_with_validity(nb.student, nb.flow);
      const ConsistencyMatrix cm = options.frozen_consistency.empty()
                                       ? consistency_matrix(wr.warped, in.teacher_target, options.wf_mode)
                                       : ConsistencyMatrix{options.frozen_consistency[i], options.wf_mode};
      out.consistency.push_back(cm.weights);
      const Tensor term = mfd_loss(wr.warped, in.student_target, cm, options.mask_invalid_warp ? &wr.valid : nullptr);
      sum = sum.defined() ? ops::add(sum, term) : term;
    }
    out.mfd = sum.item();
    accumulate(sum, weights.beta);
  }
  if (weights.gamma > 0) {
    Tensor sum = kd_loss(in.student_target, in.teacher_target);
    for (const auto& nb : in.neighbors) sum = ops::add(sum, kd_loss(nb.student, nb.teacher));
    out.kd = sum.item();
    accumulate(sum, weights.gamma);
  }
  if (!out.total.defined()) out.total = ops::scale(ops::reduce_sum(in.student_target), Real(0));
  return out;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
