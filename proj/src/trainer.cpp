#include "weclick/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "weclick/inference.hpp"
#include "weclick/rng.hpp"
#include "weclick/tensor_io.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

constexpr std::uint64_t kTeacherInitTag = 0x7ea;
constexpr std::uint64_t kStudentInitTag = 0x57d;
constexpr std::uint64_t kShuffleTag = 0x5f1;
constexpr std::uint64_t kNeighborTag = 0x4eb;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t data_seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({data_seed, kShuffleTag, epoch}));
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

// Picks `count` frames on one side of k.
std::vector<std::size_t> side_frames(std::size_t k, std::size_t length, std::size_t count, bool before,
                                     const Sampling& sampling, Rng& rng) {
  std::vector<std::size_t> out;
  if (count == 0) return out;
  const char* side = before ? "preceding" : "subsequent";
  const std::size_t available = before ? k : length - 1 - k;
  if (sampling.kind == Sampling::Kind::fixed) {
    const std::size_t span = sampling.value * count;
    if (span > available) {
      throw std::invalid_argument("select_neighbors: insufficient " + std::string(side) + " frames: need " +
                                  std::to_string(span) + " at interval " + std::to_string(sampling.value) +
                                  ", have " + std::to_string(available));
    }
    for (std::size_t i = 1; i <= count; ++i) out.push_back(before ? k - i * sampling.value : k + i * sampling.value);
  } else {
    const std::size_t pool_size = std::min(sampling.value, available);
    if (pool_size < count) {
      throw std::invalid_argument("select_neighbors: insufficient " + std::string(side) + " frames: need " +
                                  std::to_string(count) + " within range " + std::to_string(sampling.value) +
                                  ", have " + std::to_string(pool_size));
    }
    std::vector<std::size_t> pool(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool[i] = before ? k - 1 - i : k + 1 + i;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.below(pool_size - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  return out;
}

struct StepValues {
  double weakly = 0, mfd = 0, kd = 0, total = 0;
};

// Shared epoch/step loop. `step_fn` builds the loss for one clip and returns
// the scalar to differentiate.
TrainResult run_training(SegNet net, std::size_t epochs, const SplitData& train, const std::vector<VideoClip>* val,
                         const TrainConfig& cfg, const TrainHooks& hooks,
                         const std::function<Tensor(std::size_t clip, std::size_t epoch, StepValues&)>& step_fn) {
  if (epochs == 0) throw std::invalid_argument("training needs at least one epoch");
  const std::size_t total_steps = epochs * train.clips.size();
  TrainResult result;
  SgdState sgd;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t ci : epoch_order(train.clips.size(), cfg.data_seed, epoch)) {
      StepValues v;
      Tensor loss = step_fn(ci, epoch, v);
      net.zero_grad();
      backward(loss);
      if (hooks.after_backward) hooks.after_backward(step);
      const double lr = poly_lr(cfg, step, total_steps);
      sgd_step(net, sgd, lr, cfg.momentum, cfg.weight_decay);
      result.steps.push_back({step, v.weakly, v.mfd, v.kd, v.total, lr});
      log.weakly += v.weakly;
      log.mfd += v.mfd;
      log.kd += v.kd;
      log.total += v.total;
      ++step;
    }
    const double count = static_cast<double>(train.clips.size());
    log.weakly /= count;
    log.mfd /= count;
    log.kd /= count;
    log.total /= count;
    const bool last = epoch + 1 == epochs;
    if (val && !val->empty() && cfg.val_every > 0 && ((epoch + 1) % cfg.val_every == 0 || last)) {
      log.val_miou = evaluate(net, *val, {.measure_fps = false}).miou;
    }
    result.epochs.push_back(log);
  }
  net.zero_grad();
  result.net = std::move(net);
  return result;
}

void require_trainable_split(const SplitData& train, const char* phase) {
  if (train.clips.empty()) throw std::invalid_argument(std::string(phase) + ": training split is empty");
  if (train.clicks.size() != train.clips.size()) {
    throw std::invalid_argument(std::string(phase) + ": corpus has no clicks for the training split (run gen-clicks)");
  }
  for (std::size_t i = 0; i < train.clips.size(); ++i) {
    if (train.clicks[i].count() == 0) {
      throw std::invalid_argument(std::string(phase) + ": clip '" + train.clips[i].id + "' has no clicks");
    }
  }
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

double poly_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) throw std::invalid_argument("poly_lr: total_steps must be > 0");
  if (step > total_steps) {
    throw std::invalid_argument("poly_lr: step " + std::to_string(step) + " exceeds total " + std::to_string(total_steps));
  }
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.lr0 * std::pow(frac, cfg.lr_power);
}

void sgd_step(std::vector<Tensor>& params, SgdState& state, double lr, double momentum, double weight_decay) {
  if (lr < 0) throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  if (state.velocity.size() != params.size()) {
    state.velocity.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) state.velocity[i].assign(params[i].numel(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& v = state.velocity[i];
    if (v.size() != w.size()) throw std::invalid_argument("sgd_step: optimizer state does not match parameters");
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double grad = g.empty() ? 0.0 : static_cast<double>(g[j]);
      v[j] = momentum * v[j] + grad + weight_decay * static_cast<double>(w[j]);
      w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * v[j]);
    }
  }
}

void sgd_step(SegNet& net, SgdState& state, double lr, double momentum, double weight_decay) {
  std::vector<Tensor> params;
  params.reserve(net.params.size());
  for (auto& p : net.params) params.push_back(p.value);
  sgd_step(params, state, lr, momentum, weight_decay);
}

std::vector<std::size_t> select_neighbors(std::size_t k, std::size_t clip_length, std::size_t n, Direction direction,
                                          const Sampling& sampling, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("select_neighbors: n must be >= 1");
  if (k >= clip_length) {
    throw std::invalid_argument("select_neighbors: target index " + std::to_string(k) + " outside clip of length " +
                                std::to_string(clip_length));
  }
  if (sampling.value < 1) throw std::invalid_argument("select_neighbors: interval/range must be >= 1");
  const std::size_t m = n - 1;
  std::size_t before = 0, after = 0;
  switch (direction) {
    case Direction::forward: before = m; break;
    case Direction::backward: after = m; break;
    case Direction::bidirection:
      before = (m + 1) / 2;
      after = m / 2;
      break;
  }
  Rng rng(seed);
  auto out = side_frames(k, clip_length, before, true, sampling, rng);
  const auto later = side_frames(k, clip_length, after, false, sampling, rng);
  out.insert(out.end(), later.begin(), later.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::filesystem::path clicks_path(const std::filesystem::path& corpus_root, const std::string& clip_id) {
  return corpus_root / "clicks" / (clip_id + ".wct");
}

void save_clicks(const std::filesystem::path& path, const ClickMap& clicks) {
  clicks.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_tensor(path, label_map_to_tensor(clicks.labels));
}

ClickMap load_clicks(const std::filesystem::path& path) {
  const Tensor t = load_tensor(path);
  ClickMap clicks;
  try {
    clicks.labels = label_map_from_tensor(t);
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  clicks.mask.resize(clicks.labels.size());
  for (std::size_t i = 0; i < clicks.labels.size(); ++i) {
    const auto v = clicks.labels.values[i];
    if (v < kNoClick) throw FormatError(path.string() + ": invalid click label " + std::to_string(v));
    clicks.mask[i] = v != kNoClick ? 1 : 0;
  }
  return clicks;
}

ClickConfig corpus_click_config(std::size_t num_classes, std::uint64_t seed) {
  ClickConfig cfg;
  cfg.min_area = 16;
  cfg.seed = seed;
  for (std::size_t c = 1; c < num_classes; ++c) cfg.instance_classes.insert(static_cast<std::int32_t>(c));
  return cfg;
}

std::map<std::string, ClickStats> generate_corpus_clicks(const CorpusManifest& corpus, const ClickConfig& cfg) {
  std::map<std::string, ClickStats> stats;
  for (const auto& e : corpus.entries) {
    const VideoClip clip = load_clip(corpus.root / e.path);
    const std::size_t k = clip.target_index;
    ClickConfig per_clip = cfg;
    per_clip.seed = derive_seed({cfg.seed, clip.seed});
    const ClickMap clicks = generate_clicks(clip.masks[k], &clip.instances[k], per_clip);
    save_clicks(clicks_path(corpus.root, e.clip_id), clicks);
    stats[e.clip_id] = click_stats(clicks, clip.masks[k]);
  }
  return stats;
}

SplitData load_split(const CorpusManifest& corpus, Split split, bool with_clicks) {
  SplitData data;
  for (const auto& e : corpus.split(split)) {
    data.clips.push_back(load_clip(corpus.root / e.path));
    if (data.clips.back().target_index != e.target_index) {
      throw FormatError((corpus.root / e.path).string() + ": target index disagrees with the corpus manifest");
    }
    if (with_clicks) {
      const auto path = clicks_path(corpus.root, e.clip_id);
      if (!std::filesystem::exists(path)) {
        throw std::invalid_argument(path.string() + ": missing clicks for clip '" + e.clip_id + "' (run gen-clicks)");
      }
      data.clicks.push_back(load_clicks(path));
      if (data.clicks.back().height() != data.clips.back().height() ||
          data.clicks.back().width() != data.clips.back().width()) {
        throw FormatError(path.string() + ": click map size does not match the clip");
      }
    }
  }
  return data;
}

TrainResult train_teacher(const SplitData& train, const std::vector<VideoClip>* val, const TrainConfig& cfg,
                          const TrainHooks& hooks) {
  cfg.validate();
  require_trainable_split(train, "train_teacher");
  const std::size_t classes = train.clips.front().num_classes;
  SegNet net = build_net(NetRole::teacher, cfg.teacher_channels, classes, derive_seed({cfg.seed, kTeacherInitTag}));
  return run_training(net, cfg.teacher_epochs, train, val, cfg, hooks,
                      [&](std::size_t ci, std::size_t, StepValues& v) {
                        const VideoClip& clip = train.clips[ci];
                        const Tensor& frame = clip.frames[clip.target_index];
                        Tensor loss = weakly_loss(forward(net, frame), frame, train.clicks[ci], cfg.lambda,
                                                  cfg.regularizer);
                        v.weakly = v.total = loss.item();
                        return loss;
                      });
}

TrainResult train_student(const SplitData& train, const std::vector<VideoClip>* val, const TrainConfig& cfg,
                          const SegNet* teacher, const TrainHooks& hooks) {
  cfg.validate();
  require_trainable_split(train, "train_student");
  const std::size_t classes = train.clips.front().num_classes;
  const bool uses_teacher = cfg.beta > 0 || cfg.gamma > 0;
  if (uses_teacher && !teacher) throw std::invalid_argument("train_student: a teacher is required when beta or gamma > 0");
  if (teacher && teacher->num_classes != classes) {
    throw std::invalid_argument("train_student: teacher predicts " + std::to_string(teacher->num_classes) +
                                " classes, corpus has " + std::to_string(classes));
  }
  // Fail early on configurations the clips cannot serve.
  for (const auto& clip : train.clips) {
    select_neighbors(clip.target_index, clip.length(), cfg.n, cfg.direction, cfg.sampling, 0);
  }

  SegNet frozen;
  if (uses_teacher && cfg.cache_teacher) {
    frozen = clone_net(*teacher);
    frozen.set_trainable(false);
  }
  std::vector<std::vector<Tensor>> teacher_cache(train.clips.size());
  auto teacher_pred = [&](std::size_t ci, std::size_t f) -> Tensor {
    const Tensor& frame = train.clips[ci].frames[f];
    if (!cfg.cache_teacher) return forward(*teacher, frame);
    auto& slot = teacher_cache[ci];
    if (slot.empty()) slot.resize(train.clips[ci].length());
    if (!slot[f].defined()) slot[f] = forward(frozen, frame);
    return slot[f];
  };
  std::map<std::pair<std::size_t, std::size_t>, FlowField> flow_cache;
  auto flow_for = [&](std::size_t ci, std::size_t f) -> const FlowField& {
    auto it = flow_cache.find({ci, f});
    if (it != flow_cache.end()) return it->second;
    const VideoClip& clip = train.clips[ci];
    const std::size_t k = clip.target_index;
    FlowField flow = estimate_flow(cfg.flow, clip.frames[f], clip.frames[k], &clip, f, k);
    return flow_cache.emplace(std::make_pair(ci, f), std::move(flow)).first->second;
  };

  SegNet net = build_net(NetRole::student, cfg.student_channels, classes, derive_seed({cfg.seed, kStudentInitTag}));
  const LossWeights weights = cfg.loss_weights();
  TotalLossOptions options;
  options.regularizer = cfg.regularizer;
  options.wf_mode = cfg.wf_mode;
  options.mask_invalid_warp = cfg.mask_invalid_warp;

  return run_training(net, cfg.epochs, train, val, cfg, hooks, [&](std::size_t ci, std::size_t epoch, StepValues& v) {
    const VideoClip& clip = train.clips[ci];
    const std::size_t k = clip.target_index;
    const auto neighbors = select_neighbors(k, clip.length(), cfg.n, cfg.direction, cfg.sampling,
                                            derive_seed({cfg.data_seed, kNeighborTag, epoch, clip.seed}));
    TotalLossInputs in;
    in.target_frame = clip.frames[k];
    in.student_target = forward(net, clip.frames[k]);
    in.clicks = train.clicks[ci];
    if (uses_teacher) {
      in.teacher_target = teacher_pred(ci, k);
      for (std::size_t f : neighbors) {
        NeighborInputs nb;
        nb.student = forward(net, clip.frames[f]);
        nb.teacher = teacher_pred(ci, f);
        if (cfg.beta > 0) nb.flow = flow_for(ci, f);
        in.neighbors.push_back(std::move(nb));
      }
    }
    LossBreakdown lb = total_loss(in, weights, options);
    v.weakly = lb.weakly;
    v.mfd = lb.mfd;
    v.kd = lb.kd;
    v.total = lb.total.item();
    return lb.total;
  });
}

std::string steps_csv(const std::vector<StepLog>& steps) {
  std::string out = "step,L_weakly,L_MFD,L_KD,total,lr\n";
  for (const auto& s : steps) {
    out += std::to_string(s.step) + "," + fmt(s.weakly) + "," + fmt(s.mfd) + "," + fmt(s.kd) + "," + fmt(s.total) +
           "," + fmt(s.lr) + "\n";
  }
  return out;
}

std::string epochs_csv(const std::vector<EpochLog>& epochs) {
  std::string out = "epoch,L_weakly,L_MFD,L_KD,total,val_miou\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.weakly) + "," + fmt(e.mfd) + "," + fmt(e.kd) + "," + fmt(e.total) +
           "," + (e.val_miou ? fmt(*e.val_miou) : "") + "\n";
  }
  return out;
}

void save_training(const std::filesystem::path& dir, const TrainResult& result, const TrainConfig& cfg,
                   const std::string& phase) {
  save_checkpoint(dir, result.net, result.steps.size(),
                  {{"phase", phase}, {"config_fingerprint", config_fingerprint(cfg)}});
  write_text(dir / "config.txt", config_to_text(cfg));
  write_text(dir / "train_steps.csv", steps_csv(result.steps));
  write_text(dir / "train_epochs.csv", epochs_csv(result.epochs));
}

EvalReport evaluate(const SegNet& net, const std::vector<VideoClip>& clips, const EvalOptions& options) {
  if (clips.empty()) throw std::invalid_argument("evaluate: split is empty");
  SegNet frozen = clone_net(net);
  frozen.set_trainable(false);
  ConfusionMatrix cm(net.num_classes);
  for (const auto& clip : clips) {
    if (options.target_frames_only) {
      cm.add(clip.masks[clip.target_index], predict(frozen, clip.frames[clip.target_index]));
      continue;
    }
    for (std::size_t f = 0; f < clip.length(); ++f) cm.add(clip.masks[f], predict(frozen, clip.frames[f]));
  }
  EvalReport report = summarize(cm);
  report.param_count = net.param_count();
  if (options.measure_fps && options.fps_calls > 0) {
    const Tensor& frame = clips.front().frames[clips.front().target_index];
    for (std::size_t i = 0; i < options.fps_warmup; ++i) predict(frozen, frame);
    std::vector<double> seconds;
    seconds.reserve(options.fps_calls);
    for (std::size_t i = 0; i < options.fps_calls; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      predict(frozen, frame);
      seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(seconds.begin(), seconds.end());
    const std::size_t mid = seconds.size() / 2;
    const double median = seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
    report.frames_per_second = median > 0 ? 1.0 / median : 0.0;
  }
  return report;
}

std::string eval_csv(const EvalReport& report) {
  std::string out = "metric,value\n";
  out += "miou," + fmt(report.miou) + "\n";
  out += "mpa," + fmt(report.mpa) + "\n";
  out += "param_count," + std::to_string(report.param_count) + "\n";
  for (std::size_t c = 0; c < report.per_class_iou.size(); ++c) {
    const auto& iou = report.per_class_iou[c];
    const auto& pa = report.per_class_pa[c];
    const bool excluded = std::find(report.excluded_classes.begin(), report.excluded_classes.end(), c) !=
                          report.excluded_classes.end();
    out += "iou_class_" + std::to_string(c) + "," + (iou ? fmt(*iou) : "") + (excluded ? ",excluded" : "") + "\n";
    out += "pa_class_" + std::to_string(c) + "," + (pa ? fmt(*pa) : "") + (excluded ? ",excluded" : "") + "\n";
  }
  return out;
}

std::vector<AblationCell> parse_ablation_grid(const std::string& text) {
  std::vector<AblationCell> cells;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream words(line);
    AblationCell cell;
    if (!(words >> cell.id)) continue;
    std::string kv;
    while (words >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("ablation grid line " + std::to_string(lineno) + ": expected key=value, got '" +
                                    kv + "'");
      }
      cell.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& other : cells) {
      if (other.id == cell.id) throw std::invalid_argument("ablation grid: duplicate cell id '" + cell.id + "'");
    }
    cells.push_back(std::move(cell));
  }
  if (cells.empty()) throw std::invalid_argument("ablation grid is empty");
  return cells;
}

std::vector<AblationCell> direction_frame_grid(const std::vector<Direction>& directions,
                                               const std::vector<std::size_t>& frame_counts) {
  std::vector<AblationCell> cells;
  for (auto d : directions) {
    for (auto n : frame_counts) {
      cells.push_back({to_string(d) + "_n" + std::to_string(n), {{"direction", to_string(d)}, {"n", std::to_string(n)}}});
    }
  }
  return cells;
}

std::vector<AblationRow> run_ablation(const SplitData& train, const std::vector<VideoClip>& val,
                                      const TrainConfig& base, const SegNet* teacher, const AblationSpec& spec,
                                      const ProgressFn& progress) {
  if (spec.seeds.empty()) throw std::invalid_argument("run_ablation: seed list is empty");
  std::vector<AblationRow> rows;
  for (const auto& cell : spec.cells) {
    AblationRow row;
    row.id = cell.id;
    try {
      TrainConfig cfg = base;
      for (const auto& [key, value] : cell.overrides) apply_config_value(cfg, key, value);
      cfg.val_every = 0;
      cfg.validate();
      for (auto seed : spec.seeds) {
        cfg.seed = seed;
        cfg.data_seed = seed;
        const TrainResult trained = train_student(train, nullptr, cfg, teacher);
        const EvalReport report = evaluate(trained.net, val, {.measure_fps = false});
        row.miou.push_back(report.miou);
        row.mpa.push_back(report.mpa);
        if (progress) progress(cell.id, seed, report.miou);
      }
      const double count = static_cast<double>(spec.seeds.size());
      row.mean_miou = std::accumulate(row.miou.begin(), row.miou.end(), 0.0) / count;
      row.mean_mpa = std::accumulate(row.mpa.begin(), row.mpa.end(), 0.0) / count;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.miou.clear();
      row.mpa.clear();
      if (progress) progress(cell.id, 0, std::nan(""));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds) {
  std::string out = "cell_id,status";
  for (auto s : seeds) out += ",miou_seed" + std::to_string(s);
  out += ",mean_miou,mean_mpa,error\n";
  for (const auto& r : rows) {
    out += csv_quote(r.id) + (r.ok ? ",ok" : ",failed");
    for (std::size_t i = 0; i < seeds.size(); ++i) out += "," + (r.ok ? fmt(r.miou[i]) : "");
    out += "," + (r.ok ? fmt(r.mean_miou) : "") + "," + (r.ok ? fmt(r.mean_mpa) : "") + "," + csv_quote(r.error) + "\n";
  }
  return out;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
