#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "weclick/label_map.hpp"
#include "weclick/rng.hpp"
#include "weclick/tensor.hpp"

namespace test {

inline weclick::Tensor random_tensor(const weclick::Shape& shape, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0, bool requires_grad = false) {
  weclick::Rng rng(weclick::derive_seed({seed, 0x7e57}));
  std::vector<weclick::Real> v(weclick::shape_numel(shape));
  for (auto& x : v) x = static_cast<weclick::Real>(rng.uniform(lo, hi));
  return weclick::Tensor(shape, std::move(v), requires_grad);
}

inline std::vector<double> values(std::span<const weclick::Real> s) { return {s.begin(), s.end()}; }
inline std::vector<double> values(const weclick::Tensor& t) { return values(t.data()); }

// Random probability map (1, C, H, W) with every entry bounded away from 0.
inline weclick::Tensor random_probs(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  return weclick::ops::softmax_channel(random_tensor({1, c, h, w}, seed, -2.0, 2.0)).detach();
}

// Blobby random label map: a coarse random grid upsampled, with sprinkled
// noise, so regions of many sizes and diagonal contacts occur.
inline weclick::LabelMap random_label_map(std::uint64_t seed, std::size_t h = 16, std::size_t w = 16, int classes = 3) {
  weclick::Rng rng(weclick::derive_seed({seed, 0xc11c}));
  weclick::LabelMap m(h, w);
  const std::size_t cell = 1 + rng.below(3);
  std::vector<int> coarse((h / cell + 1) * (w / cell + 1));
  for (auto& v : coarse) v = static_cast<int>(rng.below(classes));
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      m.at(r, c) = coarse[(r / cell) * (w / cell + 1) + c / cell];
      if (rng.uniform() < 0.1) m.at(r, c) = static_cast<int>(rng.below(classes));
    }
  return m;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("weclick_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
