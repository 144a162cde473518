#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Element type of every tensor. The production build uses 32-bit reals; the
// gradient-integrity test build recompiles the same sources with double.
#ifndef WECLICK_REAL
#define WECLICK_REAL float
#define WECLICK_ABI f32
#endif

namespace weclick {
inline namespace WECLICK_ABI {

using Real = WECLICK_REAL;
using Shape = std::vector<std::size_t>;

/// Raised when operand shapes do not satisfy an op's shape rule.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor;

// One recorded operation. `backward` receives d(loss)/d(output) and must
// accumulate into the supplied per-input gradient buffers (empty span for
// inputs that do not require grad).
struct TapeNode {
  std::string op;
  std::vector<Tensor> inputs;
  std::function<void(std::span<const Real> grad_out,
                     std::vector<std::span<Real>>& grad_in)>
      backward;
};

/// Dense row-major tensor with an optional link into the autodiff tape.
///
/// Tensors are cheap handles: copying a Tensor shares storage. Values produced
/// by ops are never mutated afterwards; only leaves (parameters) are updated
/// in place by the optimizer through `mutable_data()`.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value) { return full({1}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<const Real> data() const;
  std::span<Real> mutable_data();
  Real item() const;
  Real at(std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  /// Zeros when requires_grad is set and nothing has flowed in yet; empty otherwise.
  std::span<const Real> grad() const;
  void zero_grad();

  /// Value copy with no tape history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool is_leaf() const;
  const TapeNode* node() const;

  // Internal: used by ops to attach history and by backward to reach grads.
  void attach_node(std::shared_ptr<TapeNode> node);
  std::vector<Real>& grad_buffer();
  const void* identity() const { return impl_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<Real> data;
    bool requires_grad = false;
    std::vector<Real> grad;
    std::shared_ptr<TapeNode> node;
  };
  std::shared_ptr<Storage> impl_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate.
void backward(const Tensor& loss);

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor elemwise_max(const Tensor& a, const Tensor& b);
Tensor abs(const Tensor& x);
/// exp(clamp(x, -60, 60)).
Tensor exp(const Tensor& x);
/// log(max(x, 1e-8)).
Tensor log(const Tensor& x);
Tensor relu(const Tensor& x);

/// 3x3 convolution, stride 1, zero padding 1.
/// x (N, Cin, H, W), weight (Cout, Cin, 3, 3), bias (Cout) -> (N, Cout, H, W).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Fixed 2x bilinear upsampling (half-pixel centers, edge clamp).
/// (N, C, H, W) -> (N, C, 2H, 2W).
Tensor upsample2x_bilinear(const Tensor& x);

/// Softmax over dim 1 of a rank-4 tensor.
Tensor softmax_channel(const Tensor& logits);

/// Full reductions; result has shape {1}.
Tensor reduce_sum(const Tensor& x);
Tensor reduce_mean(const Tensor& x);

/// Gather-style bilinear sampling.
/// source (1, C, Hs, Ws), coords (1, 2, Ho, Wo) holding absolute (row, col)
/// sample positions -> (1, C, Ho, Wo). Positions clamp to the source border.
/// Differentiable w.r.t. source only; coords are treated as constants.
Tensor bilinear_sample(const Tensor& source, const Tensor& coords);

// Convenience compositions built from the primitives above.
Tensor scale(const Tensor& x, Real factor);
Tensor constant_like(const Tensor& x, Real value);

}  // namespace ops

/// Name-dispatched entry point over the fixed op set.
Tensor forward_op(std::string_view name, std::span<const Tensor> inputs);
const std::vector<std::string>& op_names();

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Max over elements of |analytic - numeric| / (|analytic| + |numeric| + 1e-8),
/// numeric being the central difference with step `eps`. NaN on either side
/// yields +inf.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-3);

}  // namespace WECLICK_ABI
}  // namespace weclick
