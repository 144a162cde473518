#pragma once

#include <cstdint>
#include <vector>

#include "weclick/label_map.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

inline constexpr std::int32_t kNoClick = -1;

/// Sparse click supervision: `labels` holds a class id where `mask` is 1 and
/// kNoClick elsewhere.
struct ClickMap {
  LabelMap labels;
  std::vector<std::uint8_t> mask;

  ClickMap() = default;
  ClickMap(std::size_t h, std::size_t w) : labels(h, w, kNoClick), mask(h * w, 0) {}

  std::size_t height() const { return labels.height; }
  std::size_t width() const { return labels.width; }
  std::size_t count() const;
  void set(std::size_t r, std::size_t c, std::int32_t label);
  /// Throws std::invalid_argument if labels and mask disagree.
  void validate() const;
  bool operator==(const ClickMap&) const = default;
};

}  // namespace WECLICK_ABI
}  // namespace weclick
