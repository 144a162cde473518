#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Integer-valued H x W map (class ids, instance ids, predictions).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> values;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0)
      : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const { return values.size(); }
  std::int32_t& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  std::int32_t at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  bool operator==(const LabelMap&) const = default;
};

/// (1, 1, H, W) tensor with the map's values as reals.
Tensor label_map_to_tensor(const LabelMap& map);
/// Accepts (H, W) or (1, 1, H, W); values must be integral.
LabelMap label_map_from_tensor(const Tensor& t);

/// One-hot (1, C, H, W) encoding; entries outside [0, C) encode as all-zero.
Tensor one_hot(const LabelMap& map, std::size_t num_classes);

/// Per-pixel argmax over dim 1 of a (1, C, H, W) map; ties pick the smaller id.
LabelMap argmax_channel(const Tensor& prob);

}  // namespace WECLICK_ABI
}  // namespace weclick
