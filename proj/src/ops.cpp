#include <algorithm>
#include <cmath>
#include <map>

#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

using Backward = decltype(TapeNode::backward);

constexpr Real kLogFloor = Real(1e-8);
constexpr Real kExpClamp = Real(60);

Tensor record(std::string op, Shape shape, std::vector<Real> values,
              std::vector<Tensor> inputs, Backward fn) {
  Tensor out(std::move(shape), std::move(values));
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    auto node = std::make_shared<TapeNode>();
    node->op = std::move(op);
    node->inputs = std::move(inputs);
    node->backward = std::move(fn);
    out.attach_node(std::move(node));
  }
  return out;
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_rank4(std::string_view op, const Tensor& x, std::string_view what) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": " + std::string(what) + " must be rank 4, got " +
                     shape_to_string(x.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return record(name, x.shape(), std::move(out), {x},
                [x, deriv](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  auto in = x.data();
                  for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * deriv(in[i]);
                });
}

// Per-axis interpolation table: output index -> (lo, hi, weight of hi).
struct Tap {
  std::size_t lo, hi;
  Real w;
};

Tap make_tap(double pos, std::size_t extent) {
  const double top = static_cast<double>(extent - 1);
  pos = std::clamp(pos, 0.0, top);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, extent - 1);
  return {lo, hi, static_cast<Real>(pos - static_cast<double>(lo))};
}

}  // namespace

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return record("add", a.shape(), std::move(out), {a, b},
                [](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  for (auto& dst : gi) {
                    if (dst.empty()) continue;
                    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                  }
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return record("sub", a.shape(), std::move(out), {a, b},
                [](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  if (!gi[0].empty())
                    for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                  if (!gi[1].empty())
                    for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] -= g[i];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return record("mul", a.shape(), std::move(out), {a, b},
                [a, b](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  auto x = a.data(), y = b.data();
                  if (!gi[0].empty())
                    for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * y[i];
                  if (!gi[1].empty())
                    for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] += g[i] * x[i];
                });
}

Tensor elemwise_max(const Tensor& a, const Tensor& b) {
  require_same_shape("elemwise_max", a, b);
  auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x[i], y[i]);
  // Ties route the gradient to the first operand.
  return record("elemwise_max", a.shape(), std::move(out), {a, b},
                [a, b](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  auto x = a.data(), y = b.data();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const std::size_t k = x[i] >= y[i] ? 0 : 1;
                    if (!gi[k].empty()) gi[k][i] += g[i];
                  }
                });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](Real v) { return std::abs(v); },
      [](Real v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](Real v) { return std::exp(std::clamp(v, -kExpClamp, kExpClamp)); },
      [](Real v) { return (v < -kExpClamp || v > kExpClamp) ? Real(0) : std::exp(v); });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](Real v) { return std::log(std::max(v, kLogFloor)); },
      [](Real v) { return v > kLogFloor ? Real(1) / v : Real(0); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](Real v) { return v > 0 ? v : Real(0); },
      [](Real v) { return v > 0 ? Real(1) : Real(0); });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank4("conv2d", x, "input");
  require_rank4("conv2d", weight, "weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(0);
  if (weight.dim(1) != cin || weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw ShapeError("conv2d: weight " + shape_to_string(weight.shape()) +
                     " incompatible with input " + shape_to_string(x.shape()) +
                     " (expected (Cout, " + std::to_string(cin) + ", 3, 3))");
  }
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                     shape_to_string(weight.shape()));
  }
  const std::size_t plane = h * w;
  auto in = x.data(), wt = weight.data(), bs = bias.data();
  std::vector<Real> out(n * cout * plane);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      Real* dst = out.data() + (b * cout + co) * plane;
      std::fill(dst, dst + plane, bs[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const Real* src = in.data() + (b * cin + ci) * plane;
        const Real* k = wt.data() + (co * cin + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const Real kv = k[ky * 3 + kx];
            const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? h - 1 : h;
            const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? w - 1 : w;
            for (std::size_t yy = y_lo; yy < y_hi; ++yy) {
              const Real* row = src + (yy + ky - 1) * w;
              Real* orow = dst + yy * w;
              for (std::size_t xx = x_lo; xx < x_hi; ++xx) orow[xx] += kv * row[xx + kx - 1];
            }
          }
        }
      }
    }
  }

  return record(
      "conv2d", {n, cout, h, w}, std::move(out), {x, weight, bias},
      [x, weight, n, cin, cout, h, w](std::span<const Real> g,
                                      std::vector<std::span<Real>>& gi) {
        const std::size_t plane = h * w;
        auto in = x.data(), wt = weight.data();
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const Real* go = g.data() + (b * cout + co) * plane;
            if (!gi[2].empty()) {
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += go[i];
              gi[2][co] += static_cast<Real>(acc);
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const Real* src = in.data() + (b * cin + ci) * plane;
              const std::size_t kbase = (co * cin + ci) * 9;
              Real* gx = gi[0].empty() ? nullptr : gi[0].data() + (b * cin + ci) * plane;
              for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                  const Real kv = wt[kbase + ky * 3 + kx];
                  const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? h - 1 : h;
                  const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? w - 1 : w;
                  double gw = 0.0;
                  for (std::size_t yy = y_lo; yy < y_hi; ++yy) {
                    const std::size_t off = (yy + ky - 1) * w;
                    const Real* grow = go + yy * w;
                    const Real* row = src + off;
                    Real* gxrow = gx ? gx + off : nullptr;
                    for (std::size_t xx = x_lo; xx < x_hi; ++xx) {
                      gw += static_cast<double>(grow[xx]) * row[xx + kx - 1];
                      if (gxrow) gxrow[xx + kx - 1] += kv * grow[xx];
                    }
                  }
                  if (!gi[1].empty()) gi[1][kbase + ky * 3 + kx] += static_cast<Real>(gw);
                }
              }
            }
          }
        }
      });
}

Tensor upsample2x_bilinear(const Tensor& x) {
  require_rank4("upsample2x_bilinear", x, "input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<Tap> ty(oh), tx(ow);
  for (std::size_t i = 0; i < oh; ++i) ty[i] = make_tap((i + 0.5) / 2.0 - 0.5, h);
  for (std::size_t j = 0; j < ow; ++j) tx[j] = make_tap((j + 0.5) / 2.0 - 0.5, w);

  auto in = x.data();
  std::vector<Real> out(n * c * oh * ow);
  for (std::size_t p = 0; p < n * c; ++p) {
    const Real* src = in.data() + p * h * w;
    Real* dst = out.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < ow; ++j) {
        const Tap& b = tx[j];
        const Real top = src[a.lo * w + b.lo] * (1 - b.w) + src[a.lo * w + b.hi] * b.w;
        const Real bot = src[a.hi * w + b.lo] * (1 - b.w) + src[a.hi * w + b.hi] * b.w;
        dst[i * ow + j] = top * (1 - a.w) + bot * a.w;
      }
    }
  }
  return record("upsample2x_bilinear", {n, c, oh, ow}, std::move(out), {x},
                [ty, tx, n, c, h, w](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  const std::size_t oh = 2 * h, ow = 2 * w;
                  for (std::size_t p = 0; p < n * c; ++p) {
                    Real* gs = gi[0].data() + p * h * w;
                    const Real* go = g.data() + p * oh * ow;
                    for (std::size_t i = 0; i < oh; ++i) {
                      const Tap& a = ty[i];
                      for (std::size_t j = 0; j < ow; ++j) {
                        const Tap& b = tx[j];
                        const Real v = go[i * ow + j];
                        gs[a.lo * w + b.lo] += v * (1 - a.w) * (1 - b.w);
                        gs[a.lo * w + b.hi] += v * (1 - a.w) * b.w;
                        gs[a.hi * w + b.lo] += v * a.w * (1 - b.w);
                        gs[a.hi * w + b.hi] += v * a.w * b.w;
                      }
                    }
                  }
                });
}

Tensor softmax_channel(const Tensor& logits) {
  require_rank4("softmax_channel", logits, "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  auto in = logits.data();
  std::vector<Real> out(in.size());
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t base = b * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      Real top = in[base + p];
      for (std::size_t k = 1; k < c; ++k) top = std::max(top, in[base + k * plane + p]);
      double total = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const Real e = std::exp(in[base + k * plane + p] - top);
        out[base + k * plane + p] = e;
        total += e;
      }
      for (std::size_t k = 0; k < c; ++k) {
        out[base + k * plane + p] = static_cast<Real>(out[base + k * plane + p] / total);
      }
    }
  }
  std::vector<Real> saved = out;
  return record("softmax_channel", logits.shape(), std::move(out), {logits},
                [y = std::move(saved), n, c, plane](std::span<const Real> g,
                                                    std::vector<std::span<Real>>& gi) {
                  for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t base = b * c * plane;
                    for (std::size_t p = 0; p < plane; ++p) {
                      double dot = 0.0;
                      for (std::size_t k = 0; k < c; ++k)
                        dot += g[base + k * plane + p] * y[base + k * plane + p];
                      for (std::size_t k = 0; k < c; ++k) {
                        const std::size_t i = base + k * plane + p;
                        gi[0][i] += static_cast<Real>(y[i] * (g[i] - dot));
                      }
                    }
                  }
                });
}

Tensor reduce_sum(const Tensor& x) {
  double acc = 0.0;
  for (Real v : x.data()) acc += v;
  return record("reduce_sum", {1}, {static_cast<Real>(acc)}, {x},
                [](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  for (auto& v : gi[0]) v += g[0];
                });
}

Tensor reduce_mean(const Tensor& x) {
  double acc = 0.0;
  for (Real v : x.data()) acc += v;
  const double count = static_cast<double>(x.numel());
  return record("reduce_mean", {1}, {static_cast<Real>(acc / count)}, {x},
                [count](std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  const Real share = static_cast<Real>(g[0] / count);
                  for (auto& v : gi[0]) v += share;
                });
}

Tensor bilinear_sample(const Tensor& source, const Tensor& coords) {
  require_rank4("bilinear_sample", source, "source");
  require_rank4("bilinear_sample", coords, "coords");
  if (source.dim(0) != 1 || coords.dim(0) != 1 || coords.dim(1) != 2) {
    throw ShapeError("bilinear_sample: expected source (1, C, H, W) and coords (1, 2, H, W), got " +
                     shape_to_string(source.shape()) + " and " + shape_to_string(coords.shape()));
  }
  const std::size_t c = source.dim(1), hs = source.dim(2), ws = source.dim(3);
  const std::size_t ho = coords.dim(2), wo = coords.dim(3);
  const std::size_t plane_in = hs * ws, plane_out = ho * wo;
  auto cd = coords.data();

  struct Sample {
    std::size_t i00, i01, i10, i11;
    Real w00, w01, w10, w11;
  };
  std::vector<Sample> taps(plane_out);
  for (std::size_t p = 0; p < plane_out; ++p) {
    const Tap ty = make_tap(cd[p], hs);
    const Tap tx = make_tap(cd[plane_out + p], ws);
    taps[p] = {ty.lo * ws + tx.lo, ty.lo * ws + tx.hi, ty.hi * ws + tx.lo, ty.hi * ws + tx.hi,
               (1 - ty.w) * (1 - tx.w), (1 - ty.w) * tx.w, ty.w * (1 - tx.w), ty.w * tx.w};
  }

  auto in = source.data();
  std::vector<Real> out(c * plane_out);
  for (std::size_t k = 0; k < c; ++k) {
    const Real* src = in.data() + k * plane_in;
    Real* dst = out.data() + k * plane_out;
    for (std::size_t p = 0; p < plane_out; ++p) {
      const Sample& s = taps[p];
      dst[p] = src[s.i00] * s.w00 + src[s.i01] * s.w01 + src[s.i10] * s.w10 + src[s.i11] * s.w11;
    }
  }
  // Only the source participates in the tape.
  return record("bilinear_sample", {1, c, ho, wo}, std::move(out), {source},
                [taps = std::move(taps), c, plane_in, plane_out](
                    std::span<const Real> g, std::vector<std::span<Real>>& gi) {
                  for (std::size_t k = 0; k < c; ++k) {
                    Real* gs = gi[0].data() + k * plane_in;
                    const Real* go = g.data() + k * plane_out;
                    for (std::size_t p = 0; p < plane_out; ++p) {
                      const Sample& s = taps[p];
                      gs[s.i00] += go[p] * s.w00;
                      gs[s.i01] += go[p] * s.w01;
                      gs[s.i10] += go[p] * s.w10;
                      gs[s.i11] += go[p] * s.w11;
                    }
                  }
                });
}

Tensor constant_like(const Tensor& x, Real value) { return Tensor::full(x.shape(), value); }

Tensor scale(const Tensor& x, Real factor) { return mul(x, constant_like(x, factor)); }

}  // namespace ops

namespace {

using OpFn = Tensor (*)(std::span<const Tensor>);

template <Tensor (*F)(const Tensor&)>
Tensor call1(std::span<const Tensor> in) { return F(in[0]); }
template <Tensor (*F)(const Tensor&, const Tensor&)>
Tensor call2(std::span<const Tensor> in) { return F(in[0], in[1]); }
template <Tensor (*F)(const Tensor&, const Tensor&, const Tensor&)>
Tensor call3(std::span<const Tensor> in) { return F(in[0], in[1], in[2]); }

struct OpEntry {
  std::size_t arity;
  OpFn fn;
};

const std::map<std::string, OpEntry, std::less<>>& op_table() {
  static const std::map<std::string, OpEntry, std::less<>> table = {
      {"add", {2, call2<ops::add>}},
      {"sub", {2, call2<ops::sub>}},
      {"mul", {2, call2<ops::mul>}},
      {"abs", {1, call1<ops::abs>}},
      {"exp", {1, call1<ops::exp>}},
      {"log", {1, call1<ops::log>}},
      {"relu", {1, call1<ops::relu>}},
      {"conv2d", {3, call3<ops::conv2d>}},
      {"upsample2x_bilinear", {1, call1<ops::upsample2x_bilinear>}},
      {"softmax_channel", {1, call1<ops::softmax_channel>}},
      {"reduce_mean", {1, call1<ops::reduce_mean>}},
      {"reduce_sum", {1, call1<ops::reduce_sum>}},
      {"elemwise_max", {2, call2<ops::elemwise_max>}},
      {"bilinear_sample", {2, call2<ops::bilinear_sample>}},
  };
  return table;
}

}  // namespace

Tensor forward_op(std::string_view name, std::span<const Tensor> inputs) {
  const auto& table = op_table();
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown op '" + std::string(name) + "'");
  if (inputs.size() != it->second.arity) {
    throw std::invalid_argument(std::string(name) + ": expected " +
                                std::to_string(it->second.arity) + " inputs, got " +
                                std::to_string(inputs.size()));
  }
  return it->second.fn(inputs);
}

const std::vector<std::string>& op_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : op_table()) v.push_back(k);
    return v;
  }();
  return names;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
