#include "weclick/label_map.hpp"

#include <cmath>
#include <stdexcept>

#include "weclick/click_map.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

Tensor label_map_to_tensor(const LabelMap& map) {
  std::vector<Real> v(map.values.begin(), map.values.end());
  return Tensor({1, 1, map.height, map.width}, std::move(v));
}

LabelMap label_map_from_tensor(const Tensor& t) {
  std::size_t h = 0, w = 0;
  if (t.rank() == 2) {
    h = t.dim(0);
    w = t.dim(1);
  } else if (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1) {
    h = t.dim(2);
    w = t.dim(3);
  } else {
    throw ShapeError("label map tensor must be (H, W) or (1, 1, H, W), got " +
                     shape_to_string(t.shape()));
  }
  LabelMap map(h, w);
  auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = std::round(static_cast<double>(d[i]));
    if (r != static_cast<double>(d[i])) throw std::invalid_argument("label map value is not integral");
    map.values[i] = static_cast<std::int32_t>(r);
  }
  return map;
}

Tensor one_hot(const LabelMap& map, std::size_t num_classes) {
  const std::size_t plane = map.size();
  std::vector<Real> v(num_classes * plane, Real(0));
  for (std::size_t i = 0; i < plane; ++i) {
    const auto c = map.values[i];
    if (c >= 0 && static_cast<std::size_t>(c) < num_classes) v[c * plane + i] = Real(1);
  }
  return Tensor({1, num_classes, map.height, map.width}, std::move(v));
}

LabelMap argmax_channel(const Tensor& prob) {
  if (prob.rank() != 4 || prob.dim(0) != 1) {
    throw ShapeError("argmax_channel expects (1, C, H, W), got " + shape_to_string(prob.shape()));
  }
  const std::size_t c = prob.dim(1), h = prob.dim(2), w = prob.dim(3), plane = h * w;
  LabelMap out(h, w);
  auto d = prob.data();
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (d[k * plane + p] > d[best * plane + p]) best = k;
    }
    out.values[p] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::size_t ClickMap::count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

void ClickMap::set(std::size_t r, std::size_t c, std::int32_t label) {
  if (label < 0) throw std::invalid_argument("click label must be non-negative");
  labels.at(r, c) = label;
  mask[r * labels.width + c] = 1;
}

void ClickMap::validate() const {
  if (mask.size() != labels.size()) throw std::invalid_argument("click mask size does not match labels");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) throw std::invalid_argument("click mask must be binary");
    const bool labelled = labels.values[i] != kNoClick;
    if (labelled != (mask[i] == 1)) {
      throw std::invalid_argument("click labels defined exactly where mask is 1 (pixel " +
                                  std::to_string(i) + ")");
    }
  }
}

}  // namespace WECLICK_ABI
}  // namespace weclick
