#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "weclick/click_map.hpp"
#include "weclick/label_map.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

struct Component {
  std::int32_t class_id = 0;
  std::vector<std::size_t> pixels;  ///< row-major linear indices, ascending
  std::size_t area = 0;
  double centroid_row = 0, centroid_col = 0;
  bool is_instance = false;
};

/// 8-connected components of every class in `class_set`; other values are
/// void. Components are ordered by their first pixel in row-major order.
std::vector<Component> connected_components(const LabelMap& mask, const std::set<std::int32_t>& class_set);

struct ClickConfig {
  std::size_t min_area = 512;        ///< discard threshold for non-instance components
  std::set<std::int32_t> instance_classes;
  std::uint64_t seed = 0;
};

/// One click per retained object: instance classes take their objects from
/// `instances` (may be null, in which case every class is non-instance),
/// the rest from 8-connected components of at least `min_area` pixels.
ClickMap generate_clicks(const LabelMap& mask, const LabelMap* instances, const ClickConfig& cfg);

/// Objects generate_clicks would click, in emission order.
std::vector<Component> click_objects(const LabelMap& mask, const LabelMap* instances, const ClickConfig& cfg);

struct ClickStats {
  std::map<std::int32_t, std::size_t> clicks_per_class;
  std::size_t total_clicks = 0;
  double annotated_fraction = 0;
  std::vector<std::int32_t> classes_without_clicks;  ///< classes present in the mask
  std::size_t label_mismatches = 0;                   ///< clicks whose label differs from the mask
};

ClickStats click_stats(const ClickMap& clicks, const LabelMap& mask);

}  // namespace WECLICK_ABI
}  // namespace weclick
