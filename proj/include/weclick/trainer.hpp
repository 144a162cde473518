#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weclick/click_map.hpp"
#include "weclick/clickgen.hpp"
#include "weclick/flow.hpp"
#include "weclick/losses.hpp"
#include "weclick/metrics.hpp"
#include "weclick/nets.hpp"
#include "weclick/synthdata.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

enum class Direction { forward, backward, bidirection };
std::string to_string(Direction d);
Direction parse_direction(const std::string& text);

struct Sampling {
  enum class Kind { fixed, random };
  Kind kind = Kind::fixed;
  std::size_t value = 1;  ///< interval for fixed, range for random

  static Sampling fixed(std::size_t interval) { return {Kind::fixed, interval}; }
  static Sampling random(std::size_t range) { return {Kind::random, range}; }
  bool operator==(const Sampling&) const = default;
};
/// "fixed:<interval>" or "random:<range>".
std::string to_string(const Sampling& s);
Sampling parse_sampling(const std::string& text);

struct TrainConfig {
  double lr0 = 7e-3;
  double lr_power = 0.9;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 40;          ///< student phase
  std::size_t teacher_epochs = 40;
  double lambda = 0.1;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  std::size_t n = 3;
  Direction direction = Direction::forward;
  Sampling sampling = Sampling::fixed(1);
  WfMode wf_mode = WfMode::attenuating_exp;
  FlowProvider flow;
  bool mask_invalid_warp = false;
  RegularizerParams regularizer;
  std::size_t teacher_channels = kTeacherChannels;
  std::size_t student_channels = kStudentChannels;
  std::uint64_t seed = 0;       ///< weight initialisation
  std::uint64_t data_seed = 0;  ///< clip order and random neighbour draws
  std::size_t val_every = 1;    ///< epochs between validation passes; 0 disables
  bool cache_teacher = true;    ///< precompute frozen teacher outputs once

  LossWeights loss_weights() const { return {lambda, alpha, beta, gamma}; }
  void validate() const;
};

TrainConfig default_config();

/// Sets one field from its textual form; unknown keys are rejected.
void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
/// Every field as key=value lines in a fixed order.
std::string config_to_text(const TrainConfig& cfg);
/// `key=value` lines; blank lines and '#' comments are skipped.
TrainConfig parse_config(const std::string& text, TrainConfig base = default_config());
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = default_config());
/// 64-bit FNV-1a of config_to_text, as 16 hex digits.
std::string config_fingerprint(const TrainConfig& cfg);

/// lr0 * (1 - step / total_steps)^power.
double poly_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

struct SgdState {
  std::vector<std::vector<double>> velocity;
};

/// v = momentum * v + grad + weight_decay * w; w -= lr * v.
void sgd_step(std::vector<Tensor>& params, SgdState& state, double lr, double momentum, double weight_decay);
void sgd_step(SegNet& net, SgdState& state, double lr, double momentum, double weight_decay);

/// Neighbour frame indices for target k, ascending; n - 1 of them.
std::vector<std::size_t> select_neighbors(std::size_t k, std::size_t clip_length, std::size_t n, Direction direction,
                                          const Sampling& sampling, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus-level data

std::filesystem::path clicks_path(const std::filesystem::path& corpus_root, const std::string& clip_id);
void save_clicks(const std::filesystem::path& path, const ClickMap& clicks);
ClickMap load_clicks(const std::filesystem::path& path);

/// Default click settings for the synthetic corpus: shapes are instance
/// classes, background is clicked per connected component.
ClickConfig corpus_click_config(std::size_t num_classes, std::uint64_t seed);

/// Generates target-frame clicks for every clip and writes them next to the
/// corpus. Returns per-clip click statistics keyed by clip id.
std::map<std::string, ClickStats> generate_corpus_clicks(const CorpusManifest& corpus, const ClickConfig& cfg);

struct SplitData {
  std::vector<VideoClip> clips;
  std::vector<ClickMap> clicks;  ///< parallel to clips when loaded with clicks
};

SplitData load_split(const CorpusManifest& corpus, Split split, bool with_clicks);

// ---------------------------------------------------------------------------
// Training

struct StepLog {
  std::size_t step = 0;
  double weakly = 0, mfd = 0, kd = 0, total = 0, lr = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double weakly = 0, mfd = 0, kd = 0, total = 0;
  std::optional<double> val_miou;
};

struct TrainResult {
  SegNet net;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
};

struct TrainHooks {
  /// Called after every backward, before the optimizer update.
  std::function<void(std::size_t step)> after_backward;
};

/// Phase one: weakly loss on the clicked target frames only.
TrainResult train_teacher(const SplitData& train, const std::vector<VideoClip>* val, const TrainConfig& cfg,
                          const TrainHooks& hooks = {});

/// Phase two: full objective with frozen teacher and flow. `teacher` may be
/// null only when beta and gamma are both zero.
TrainResult train_student(const SplitData& train, const std::vector<VideoClip>* val, const TrainConfig& cfg,
                          const SegNet* teacher, const TrainHooks& hooks = {});

std::string steps_csv(const std::vector<StepLog>& steps);
std::string epochs_csv(const std::vector<EpochLog>& epochs);

/// Checkpoint plus train_steps.csv and train_epochs.csv in `dir`.
void save_training(const std::filesystem::path& dir, const TrainResult& result, const TrainConfig& cfg,
                   const std::string& phase);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  bool target_frames_only = false;
  bool measure_fps = true;
  std::size_t fps_warmup = 10;
  std::size_t fps_calls = 100;
};

EvalReport evaluate(const SegNet& net, const std::vector<VideoClip>& clips, const EvalOptions& options = {});

/// Deterministic metrics table (FPS is not included).
std::string eval_csv(const EvalReport& report);

// ---------------------------------------------------------------------------
// Ablation

struct AblationCell {
  std::string id;
  std::vector<std::pair<std::string, std::string>> overrides;
};

struct AblationRow {
  std::string id;
  bool ok = false;
  std::string error;
  std::vector<double> miou;  ///< one per seed
  std::vector<double> mpa;
  double mean_miou = 0;
  double mean_mpa = 0;
};

struct AblationSpec {
  std::vector<AblationCell> cells;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
};

/// Lines "cell_id key=value ...".
std::vector<AblationCell> parse_ablation_grid(const std::string& text);
/// direction x n cells, ids like "forward_n3".
std::vector<AblationCell> direction_frame_grid(const std::vector<Direction>& directions,
                                               const std::vector<std::size_t>& frame_counts);

using ProgressFn = std::function<void(const std::string& cell, std::uint64_t seed, double miou)>;

/// Trains a student per (cell, seed) with the seed as weight seed and
/// evaluates it on `val`. Invalid cells are reported as failed.
std::vector<AblationRow> run_ablation(const SplitData& train, const std::vector<VideoClip>& val,
                                      const TrainConfig& base, const SegNet* teacher, const AblationSpec& spec,
                                      const ProgressFn& progress = {});

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds);

}  // namespace WECLICK_ABI
}  // namespace weclick
