#include "weclick/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace weclick {
inline namespace WECLICK_ABI {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  impl_ = std::make_shared<Storage>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, Real(0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, Real value, bool requires_grad) {
  return Tensor(shape, std::vector<Real>(shape_numel(shape), value), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) {
    throw ShapeError("dim " + std::to_string(i) + " out of range for " + shape_to_string(s));
  }
  return s[i];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const Real> Tensor::data() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->data;
}

std::span<Real> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->data;
}

Real Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on && impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), Real(0));
  }
  if (!on) impl_->grad.clear();
}

std::span<const Real> Tensor::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

bool Tensor::is_leaf() const { return impl_ && !impl_->node; }

const TapeNode* Tensor::node() const { return impl_ ? impl_->node.get() : nullptr; }

void Tensor::attach_node(std::shared_ptr<TapeNode> node) {
  impl_->node = std::move(node);
  impl_->requires_grad = true;
}

std::vector<Real>& Tensor::grad_buffer() { return impl_->grad; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  for (auto d : loss.shape()) {
    if (d != 1) {
      throw ShapeError("backward: loss must be scalar, got " + shape_to_string(loss.shape()));
    }
  }
  if (!loss.requires_grad()) return;

  // Post-order DFS gives a topological order; iterate it in reverse.
  std::vector<Tensor> order;
  std::unordered_set<const void*> visited;
  std::vector<std::pair<Tensor, std::size_t>> stack;
  stack.emplace_back(loss, 0);
  visited.insert(loss.identity());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const TapeNode* node = t.node();
    if (node && next < node->inputs.size()) {
      const Tensor& in = node->inputs[next++];
      if (in.requires_grad() && visited.insert(in.identity()).second) {
        stack.emplace_back(in, 0);
      }
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  // Intermediate gradients live only for the duration of this sweep.
  std::unordered_map<const void*, std::vector<Real>> inner;
  auto grad_of = [&inner](Tensor& t) -> std::span<Real> {
    if (t.is_leaf()) return t.grad_buffer();
    auto& g = inner[t.identity()];
    if (g.empty()) g.assign(t.numel(), Real(0));
    return g;
  };

  Tensor root = loss;
  grad_of(root)[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor& t = *it;
    const TapeNode* node = t.node();
    if (!node) continue;
    std::span<Real> g_out = grad_of(t);
    std::vector<std::span<Real>> g_in;
    g_in.reserve(node->inputs.size());
    for (const Tensor& in : node->inputs) {
      if (in.requires_grad()) {
        Tensor handle = in;
        g_in.push_back(grad_of(handle));
      } else {
        g_in.emplace_back();
      }
    }
    node->backward(g_out, g_in);
    inner.erase(t.identity());
  }
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  Tensor leaf(x.shape(), std::vector<Real>(x.data().begin(), x.data().end()), true);
  Tensor loss = f(leaf);
  backward(loss);
  std::vector<Real> analytic(leaf.grad().begin(), leaf.grad().end());

  double worst = 0.0;
  std::vector<Real> probe(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Real saved = probe[i];
    const Real hi = static_cast<Real>(saved + eps);
    const Real lo = static_cast<Real>(saved - eps);
    probe[i] = hi;
    const double up = f(Tensor(x.shape(), probe)).item();
    probe[i] = lo;
    const double down = f(Tensor(x.shape(), probe)).item();
    probe[i] = saved;
    // Divide by the step actually representable in Real.
    const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
    const double a = analytic[i];
    if (std::isnan(a) || std::isnan(numeric)) return std::numeric_limits<double>::infinity();
    const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
