#include "weclick/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : classes_(num_classes), counts_(num_classes * num_classes) {
  if (num_classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(const LabelMap& truth, const LabelMap& pred) {
  if (truth.height != pred.height || truth.width != pred.width) {
    throw ShapeError("confusion matrix: ground truth " + std::to_string(truth.height) + "x" +
                     std::to_string(truth.width) + " vs prediction " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width));
  }
  const auto c = static_cast<std::int32_t>(classes_);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = truth.values[i], p = pred.values[i];
    if (t < 0 || t >= c) continue;
    if (p < 0 || p >= c) throw std::invalid_argument("confusion matrix: predicted class " + std::to_string(p) + " out of range");
    ++counts_[static_cast<std::size_t>(t) * classes_ + static_cast<std::size_t>(p)];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

EvalReport summarize(const ConfusionMatrix& cm) {
  const std::size_t c = cm.num_classes();
  EvalReport r;
  r.per_class_iou.resize(c);
  r.per_class_pa.resize(c);
  double iou_sum = 0, pa_sum = 0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::uint64_t tp = cm.at(k, k);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) r.per_class_iou[k] = static_cast<double>(tp) / static_cast<double>(uni);
    if (row == 0) {
      r.excluded_classes.push_back(k);
      continue;
    }
    r.per_class_pa[k] = static_cast<double>(tp) / static_cast<double>(row);
    iou_sum += *r.per_class_iou[k];
    pa_sum += *r.per_class_pa[k];
    ++present;
  }
  if (present > 0) {
    r.miou = iou_sum / static_cast<double>(present);
    r.mpa = pa_sum / static_cast<double>(present);
  }
  return r;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
