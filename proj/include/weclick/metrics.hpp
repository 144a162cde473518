#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "weclick/label_map.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Row = ground truth class, column = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  /// Pixels whose ground truth lies outside [0, C) are ignored; predictions
  /// outside that range are rejected.
  void add(const LabelMap& truth, const LabelMap& pred);

  std::size_t num_classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::uint64_t total() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct EvalReport {
  std::vector<std::optional<double>> per_class_iou;  ///< empty when absent from both maps
  std::vector<std::optional<double>> per_class_pa;   ///< empty when absent from ground truth
  std::vector<std::size_t> excluded_classes;         ///< classes absent from ground truth
  double miou = 0;
  double mpa = 0;
  std::size_t param_count = 0;
  double frames_per_second = 0;
};

/// IoU_c = TP / (TP + FP + FN), PA_c = TP / (TP + FN); both means run over
/// classes present in ground truth.
EvalReport summarize(const ConfusionMatrix& cm);

}  // namespace WECLICK_ABI
}  // namespace weclick
