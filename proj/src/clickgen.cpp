#include "weclick/clickgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "weclick/rng.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

void finish(Component& comp, std::size_t width) {
  std::sort(comp.pixels.begin(), comp.pixels.end());
  comp.area = comp.pixels.size();
  double sr = 0, sc = 0;
  for (auto p : comp.pixels) {
    sr += static_cast<double>(p / width);
    sc += static_cast<double>(p % width);
  }
  comp.centroid_row = sr / static_cast<double>(comp.area);
  comp.centroid_col = sc / static_cast<double>(comp.area);
}

// Nearest integer, ties toward the smaller index.
std::int64_t round_half_down(double v) { return static_cast<std::int64_t>(std::ceil(v - 0.5)); }

}  // namespace

std::vector<Component> connected_components(const LabelMap& mask, const std::set<std::int32_t>& class_set) {
  const std::size_t h = mask.height, w = mask.width;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Component> out;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (seen[start] || !class_set.contains(mask.values[start])) continue;
    Component comp;
    comp.class_id = mask.values[start];
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.pixels.push_back(p);
      const auto r = static_cast<std::int64_t>(p / w), c = static_cast<std::int64_t>(p % w);
      for (std::int64_t dr = -1; dr <= 1; ++dr) {
        for (std::int64_t dc = -1; dc <= 1; ++dc) {
          const auto nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<std::int64_t>(h) || nc >= static_cast<std::int64_t>(w)) continue;
          const auto q = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
          if (!seen[q] && mask.values[q] == comp.class_id) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    finish(comp, w);
    out.push_back(std::move(comp));
  }
  return out;
}

std::vector<Component> click_objects(const LabelMap& mask, const LabelMap* instances, const ClickConfig& cfg) {
  if (cfg.min_area < 1) throw std::invalid_argument("generate_clicks: min_area must be >= 1");
  if (instances && (instances->height != mask.height || instances->width != mask.width)) {
    throw ShapeError("generate_clicks: instance map size does not match mask");
  }
  std::set<std::int32_t> present(mask.values.begin(), mask.values.end());
  std::set<std::int32_t> stuff;
  for (auto c : present) {
    if (c < 0) continue;
    if (!instances || !cfg.instance_classes.contains(c)) stuff.insert(c);
  }

  std::vector<Component> objects;
  for (auto& comp : connected_components(mask, stuff)) {
    if (comp.area >= cfg.min_area) objects.push_back(std::move(comp));
  }
  if (instances) {
    // Instance objects keyed by (instance id, class), ordered by first pixel.
    std::map<std::pair<std::int32_t, std::int32_t>, Component> by_id;
    std::vector<std::pair<std::int32_t, std::int32_t>> order;
    for (std::size_t p = 0; p < mask.size(); ++p) {
      const auto cls = mask.values[p];
      const auto id = instances->values[p];
      if (cls < 0 || id <= 0 || !cfg.instance_classes.contains(cls)) continue;
      auto key = std::make_pair(id, cls);
      auto [it, inserted] = by_id.try_emplace(key);
      if (inserted) {
        it->second.class_id = cls;
        it->second.is_instance = true;
        order.push_back(key);
      }
      it->second.pixels.push_back(p);
    }
    for (const auto& key : order) {
      Component comp = std::move(by_id[key]);
      finish(comp, mask.width);
      objects.push_back(std::move(comp));
    }
  }
  std::stable_sort(objects.begin(), objects.end(),
                   [](const Component& a, const Component& b) { return a.pixels.front() < b.pixels.front(); });
  return objects;
}

ClickMap generate_clicks(const LabelMap& mask, const LabelMap* instances, const ClickConfig& cfg) {
  const auto objects = click_objects(mask, instances, cfg);
  if (objects.empty()) throw std::invalid_argument("generate_clicks: mask has no retained objects");
  ClickMap clicks(mask.height, mask.width);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Component& obj = objects[i];
    const auto r = round_half_down(obj.centroid_row), c = round_half_down(obj.centroid_col);
    const auto at = static_cast<std::size_t>(r) * mask.width + static_cast<std::size_t>(c);
    std::size_t pick = at;
    if (!std::binary_search(obj.pixels.begin(), obj.pixels.end(), at)) {
      Rng rng(derive_seed({cfg.seed, i, obj.pixels.front()}));
      pick = obj.pixels[rng.below(obj.pixels.size())];
    }
    clicks.set(pick / mask.width, pick % mask.width, obj.class_id);
  }
  return clicks;
}

ClickStats click_stats(const ClickMap& clicks, const LabelMap& mask) {
  if (clicks.labels.size() != mask.size()) throw ShapeError("click_stats: click map size does not match mask");
  ClickStats s;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!clicks.mask[p]) continue;
    ++s.total_clicks;
    ++s.clicks_per_class[clicks.labels.values[p]];
    if (clicks.labels.values[p] != mask.values[p]) ++s.label_mismatches;
  }
  s.annotated_fraction = mask.size() ? static_cast<double>(s.total_clicks) / static_cast<double>(mask.size()) : 0.0;
  std::set<std::int32_t> present(mask.values.begin(), mask.values.end());
  for (auto c : present) {
    if (c >= 0 && !s.clicks_per_class.contains(c)) s.classes_without_clicks.push_back(c);
  }
  return s;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
