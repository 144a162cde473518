#include "weclick/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "weclick/rng.hpp"
#include "weclick/tensor_io.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

FlowField zero_flow(std::size_t h, std::size_t w, std::size_t f, std::size_t k) {
  return {Tensor::zeros({1, 2, h, w}), f, k};
}

FlowField constant_flow(std::size_t h, std::size_t w, double dy, double dx, std::size_t f, std::size_t k) {
  std::vector<Real> v(2 * h * w);
  std::fill(v.begin(), v.begin() + h * w, static_cast<Real>(dy));
  std::fill(v.begin() + h * w, v.end(), static_cast<Real>(dx));
  return {Tensor({1, 2, h, w}, std::move(v)), f, k};
}

WarpResult warp_with_validity(const Tensor& source_map, const FlowField& flow) {
  if (source_map.rank() != 4 || source_map.dim(0) != 1 || flow.grid.rank() != 4 ||
      flow.grid.dim(1) != 2 || source_map.dim(2) != flow.grid.dim(2) || source_map.dim(3) != flow.grid.dim(3)) {
    throw ShapeError("warp: source " + shape_to_string(source_map.shape()) + " does not match flow " +
                     shape_to_string(flow.grid.shape()));
  }
  const std::size_t h = flow.height(), w = flow.width(), plane = h * w;
  auto d = flow.grid.data();
  std::vector<Real> coords(2 * plane), valid(plane);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t p = r * w + c;
      const double y = static_cast<double>(r) + d[p];
      const double x = static_cast<double>(c) + d[plane + p];
      coords[p] = static_cast<Real>(y);
      coords[plane + p] = static_cast<Real>(x);
      const bool inside = y >= 0.0 && x >= 0.0 && y <= double(h - 1) && x <= double(w - 1);
      valid[p] = inside ? Real(1) : Real(0);
    }
  }
  Tensor sample_at({1, 2, h, w}, std::move(coords));
  return {ops::bilinear_sample(source_map, sample_at), Tensor({1, 1, h, w}, std::move(valid))};
}

Tensor warp(const Tensor& source_map, const FlowField& flow) {
  return warp_with_validity(source_map, flow).warped;
}

FlowField gt_flow(const VideoClip& clip, std::size_t f, std::size_t k) {
  if (f >= clip.length() || k >= clip.length()) {
    throw std::out_of_range("gt_flow: frame indices (" + std::to_string(f) + ", " + std::to_string(k) +
                            ") out of range for clip of length " + std::to_string(clip.length()));
  }
  if (clip.instances.size() != clip.length()) throw std::invalid_argument("gt_flow: clip carries no motion data");
  const std::size_t h = clip.height(), w = clip.width(), plane = h * w;
  const double dt = static_cast<double>(k) - static_cast<double>(f);
  std::vector<Real> v(2 * plane, Real(0));
  const LabelMap& inst = clip.instances[k];
  for (std::size_t p = 0; p < plane; ++p) {
    const auto s = inst.values[p];
    if (s <= 0) continue;
    const ShapeMotion& m = clip.motions.at(static_cast<std::size_t>(s - 1));
    v[p] = static_cast<Real>(-m.vy * dt);
    v[plane + p] = static_cast<Real>(-m.vx * dt);
  }
  return {Tensor({1, 2, h, w}, std::move(v)), f, k};
}

FlowField block_match_flow(const Tensor& x_f, const Tensor& x_k, std::size_t patch, std::size_t radius,
                           std::size_t f, std::size_t k) {
  if (x_f.shape() != x_k.shape() || x_f.rank() != 4 || x_f.dim(0) != 1) {
    throw ShapeError("block_match: frames " + shape_to_string(x_f.shape()) + " and " +
                     shape_to_string(x_k.shape()) + " must share shape (1, C, H, W)");
  }
  if (patch % 2 == 0) throw std::invalid_argument("block_match: patch side must be odd");
  const std::size_t ch = x_f.dim(1), h = x_f.dim(2), w = x_f.dim(3), plane = h * w;
  const auto hh = static_cast<std::int64_t>(h), ww = static_cast<std::int64_t>(w);
  const auto half = static_cast<std::int64_t>(patch / 2), rad = static_cast<std::int64_t>(radius);
  auto a = x_f.data(), b = x_k.data();

  // Smaller displacements win ties.
  std::vector<std::pair<std::int64_t, std::int64_t>> cands;
  for (std::int64_t dy = -rad; dy <= rad; ++dy)
    for (std::int64_t dx = -rad; dx <= rad; ++dx) cands.emplace_back(dy, dx);
  std::stable_sort(cands.begin(), cands.end(), [](auto& l, auto& r) {
    return l.first * l.first + l.second * l.second < r.first * r.first + r.second * r.second;
  });

  auto clampi = [](std::int64_t v, std::int64_t hi) { return std::clamp<std::int64_t>(v, 0, hi - 1); };
  std::vector<Real> out(2 * plane, Real(0));
  for (std::int64_t r = 0; r < hh; ++r) {
    for (std::int64_t c = 0; c < ww; ++c) {
      double best = std::numeric_limits<double>::infinity();
      std::pair<std::int64_t, std::int64_t> arg{0, 0};
      for (const auto& [dy, dx] : cands) {
        double sad = 0.0;
        for (std::int64_t py = -half; py <= half; ++py) {
          for (std::int64_t px = -half; px <= half; ++px) {
            const auto qy = clampi(r + py, hh), qx = clampi(c + px, ww);
            const auto sy = clampi(qy + dy, hh), sx = clampi(qx + dx, ww);
            for (std::size_t q = 0; q < ch; ++q) {
              sad += std::abs(static_cast<double>(b[q * plane + qy * w + qx]) - a[q * plane + sy * w + sx]);
            }
          }
        }
        if (sad < best) {
          best = sad;
          arg = {dy, dx};
        }
      }
      out[r * w + c] = static_cast<Real>(arg.first);
      out[plane + r * w + c] = static_cast<Real>(arg.second);
    }
  }
  return {Tensor({1, 2, h, w}, std::move(out)), f, k};
}

std::string to_string(const FlowProvider& p) {
  std::ostringstream os;
  switch (p.kind) {
    case FlowKind::ground_truth: os << "ground_truth"; break;
    case FlowKind::noisy: os << "noisy:" << p.sigma << ':' << p.seed; break;
    case FlowKind::block_match: os << "block_match:" << p.patch << ':' << p.radius; break;
  }
  return os.str();
}

FlowProvider parse_flow_provider(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ':')) parts.push_back(item);
  if (parts.empty()) throw std::invalid_argument("empty flow provider");
  FlowProvider p;
  try {
    if (parts[0] == "ground_truth" && parts.size() == 1) {
      p.kind = FlowKind::ground_truth;
    } else if (parts[0] == "noisy" && (parts.size() == 2 || parts.size() == 3)) {
      p.kind = FlowKind::noisy;
      p.sigma = std::stod(parts[1]);
      if (parts.size() == 3) p.seed = std::stoull(parts[2]);
      if (p.sigma < 0) throw std::invalid_argument("sigma must be >= 0");
    } else if (parts[0] == "block_match" && parts.size() == 3) {
      p.kind = FlowKind::block_match;
      p.patch = std::stoull(parts[1]);
      p.radius = std::stoull(parts[2]);
      if (p.patch % 2 == 0) throw std::invalid_argument("patch must be odd");
    } else {
      throw std::invalid_argument("unrecognised form");
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("bad flow provider '" + text + "': " + e.what());
  }
  return p;
}

FlowField estimate_flow(const FlowProvider& provider, const Tensor& x_f, const Tensor& x_k,
                        const VideoClip* clip, std::size_t f, std::size_t k) {
  if (x_f.shape() != x_k.shape()) {
    throw ShapeError("estimate_flow: frame shapes differ " + shape_to_string(x_f.shape()) + " vs " +
                     shape_to_string(x_k.shape()));
  }
  switch (provider.kind) {
    case FlowKind::block_match:
      return block_match_flow(x_f, x_k, provider.patch, provider.radius, f, k);
    case FlowKind::ground_truth:
    case FlowKind::noisy: {
      if (!clip) throw std::invalid_argument("estimate_flow: " + to_string(provider) + " provider requires a clip with stored motion");
      FlowField flow = gt_flow(*clip, f, k);
      if (provider.kind == FlowKind::noisy && provider.sigma > 0) {
        Rng rng(derive_seed({provider.seed, clip->seed, f, k}));
        for (auto& v : flow.grid.mutable_data()) v = static_cast<Real>(v + provider.sigma * rng.normal());
      }
      return flow;
    }
  }
  throw std::logic_error("unhandled flow kind");
}

void save_flow(const std::filesystem::path& path, const FlowField& flow, const std::string& kind) {
  save_tensor(path, flow.grid);
  std::ofstream side(path.string() + ".txt", std::ios::trunc);
  if (!side) throw FormatError(path.string() + ".txt: cannot open for writing");
  side << "f=" << flow.src_index << "\nk=" << flow.dst_index << "\nkind=" << kind << '\n';
}

FlowField load_flow(const std::filesystem::path& path) {
  FlowField flow;
  flow.grid = load_tensor(path);
  if (flow.grid.rank() != 4 || flow.grid.dim(0) != 1 || flow.grid.dim(1) != 2) {
    throw FormatError(path.string() + ": flow grid must be (1, 2, H, W)");
  }
  const std::string side = path.string() + ".txt";
  std::ifstream in(side);
  if (!in) throw FormatError(side + ": cannot open flow sidecar");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("f=")) flow.src_index = std::stoull(line.substr(2));
    else if (line.starts_with("k=")) flow.dst_index = std::stoull(line.substr(2));
  }
  return flow;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
