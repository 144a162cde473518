#pragma once

#include <string>
#include <vector>

#include "weclick/click_map.hpp"
#include "weclick/flow.hpp"
#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Mean negative log-likelihood over clicked pixels. pred is (1, C, H, W).
Tensor partial_cross_entropy(const Tensor& pred, const ClickMap& clicks);

/// Gaussian-kernel pairwise compatibility regulariser.
struct RegularizerParams {
  int radius = 3;          ///< square window half-size
  double sigma_xy = 3.0;   ///< spatial bandwidth, pixels
  double sigma_rgb = 0.1;  ///< colour bandwidth; +inf disables the colour term
  bool detach_clicked = false;
};

/// (1/Z) sum_i sum_{j in window(i), j != i} k(i,j) sum_c p_i(c) (1 - p_j(c)),
/// with k(i,j) = exp(-|p_i - p_j|^2 / 2 sigma_xy^2 - |I_i - I_j|^2 / 2 sigma_rgb^2)
/// and Z = sum of k over all in-frame ordered pairs.
Tensor gated_pairwise_regularizer(const Tensor& pred, const Tensor& frame, const ClickMap& clicks,
                                  const RegularizerParams& params = {});

/// Pairwise affinity for a single displacement; exposed for tests.
double pairwise_kernel(double dy, double dx, double color_dist2, const RegularizerParams& params);

Tensor weakly_loss(const Tensor& pred, const Tensor& frame, const ClickMap& clicks, double lambda,
                   const RegularizerParams& params = {});

enum class WfMode { paper_exp, attenuating_exp };
std::string to_string(WfMode mode);
WfMode parse_wf_mode(const std::string& text);

struct ConsistencyMatrix {
  Tensor weights;  ///< (1, 1, H, W), detached
  WfMode mode = WfMode::attenuating_exp;
};

/// d(p) = mean_c |warped(p,c) - teacher(p,c)|; W = exp(d) or exp(-d).
ConsistencyMatrix consistency_matrix(const Tensor& warped_student, const Tensor& teacher_k,
                                     WfMode mode = WfMode::attenuating_exp);

/// mean_p W(p) * sum_c (warped(p,c) - student_k(p,c))^2. When `valid` is
/// given, pixels whose warp sample fell outside the frame are dropped.
Tensor mfd_loss(const Tensor& warped_student, const Tensor& student_k, const ConsistencyMatrix& w,
                const Tensor* valid = nullptr);

/// mean_p KL(student(p) || teacher(p)); the teacher side is detached.
Tensor kd_loss(const Tensor& student_f, const Tensor& teacher_f);

struct LossWeights {
  double lambda = 0.1;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  void validate() const;
};

struct NeighborInputs {
  Tensor student;  ///< student probabilities for frame f
  Tensor teacher;  ///< teacher probabilities for frame f
  FlowField flow;  ///< M_{f->k} on the target grid
};

struct TotalLossInputs {
  Tensor target_frame;    ///< x_k, (1, 3, H, W)
  Tensor student_target;  ///< student probabilities for x_k
  Tensor teacher_target;  ///< teacher probabilities for x_k
  ClickMap clicks;
  std::vector<NeighborInputs> neighbors;
};

struct TotalLossOptions {
  RegularizerParams regularizer;
  WfMode wf_mode = WfMode::attenuating_exp;
  bool mask_invalid_warp = false;
  /// Per-neighbour W to use instead of recomputing it; lets a caller hold the
  /// stop-gradient weights fixed, e.g. for finite-difference checks.
  std::vector<Tensor> frozen_consistency;
};

struct LossBreakdown {
  Tensor total;
  double weakly = 0, mfd = 0, kd = 0;  ///< unweighted sub-totals
  std::vector<Tensor> consistency;     ///< W per neighbour, when MFD was evaluated
};

/// alpha * L_weakly(x_k) + beta * sum_f L_MFD(x_f, x_k) + gamma * sum_{f incl. k} L_KD(x_f).
LossBreakdown total_loss(const TotalLossInputs& in, const LossWeights& weights,
                         const TotalLossOptions& options = {});

}  // namespace WECLICK_ABI
}  // namespace weclick
