// Command-line front end for data generation, training, evaluation and ablation.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "weclick/inference.hpp"
#include "weclick/trainer.hpp"

namespace fs = std::filesystem;
using namespace weclick;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "key=value training config file");
    cmd->add_option("--set", overrides, "override one config field, key=value");
  }

  TrainConfig load() const {
    TrainConfig cfg = path.empty() ? default_config() : load_config(path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void print_epochs(const TrainResult& r) {
  for (const auto& e : r.epochs) {
    std::printf("epoch %zu  loss %.5f", e.epoch, e.total);
    if (e.val_miou) std::printf("  val_miou %.4f", *e.val_miou);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weclick: click-supervised video segmentation with memory-flow distillation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic video corpus");
  std::string gen_out, gen_scene, gen_ratios = "0.6666666666666666,0.16666666666666666,0.16666666666666666";
  std::size_t gen_clips = 30;
  std::uint64_t gen_seed = 0;
  SceneSpec scene;
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_option("--clips", gen_clips, "number of clips")->capture_default_str();
  gen->add_option("--seed", gen_seed, "corpus seed")->capture_default_str();
  gen->add_option("--ratios", gen_ratios, "train,val,test fractions")->capture_default_str();
  gen->add_option("--scene", gen_scene, "scene spec file (key=value)");
  gen->add_option("--height", scene.height)->capture_default_str();
  gen->add_option("--width", scene.width)->capture_default_str();
  gen->add_option("--length", scene.length, "frames per clip")->capture_default_str();
  gen->add_option("--target", scene.target_index, "annotated frame index")->capture_default_str();
  gen->add_option("--classes", scene.num_classes)->capture_default_str();
  gen->add_option("--max-speed", scene.max_speed)->capture_default_str();
  gen->add_flag("--subpixel", scene.subpixel_velocity, "real-valued velocities");

  // gen-clicks
  auto* clicks = app.add_subcommand("gen-clicks", "simulate click annotations on target frames");
  std::string clicks_corpus;
  std::uint64_t clicks_seed = 0;
  std::size_t clicks_min_area = 16;
  clicks->add_option("--corpus", clicks_corpus)->required();
  clicks->add_option("--seed", clicks_seed)->capture_default_str();
  clicks->add_option("--min-area", clicks_min_area, "minimum background component area")->capture_default_str();

  // train-teacher / train-student
  auto* tt = app.add_subcommand("train-teacher", "train the teacher on the weakly loss");
  std::string tt_corpus, tt_out;
  ConfigArgs tt_cfg;
  tt->add_option("--corpus", tt_corpus)->required();
  tt->add_option("--out", tt_out, "checkpoint directory")->required();
  tt_cfg.attach(tt);

  auto* ts = app.add_subcommand("train-student", "train the student with the frozen teacher");
  std::string ts_corpus, ts_out, ts_teacher;
  ConfigArgs ts_cfg;
  ts->add_option("--corpus", ts_corpus)->required();
  ts->add_option("--teacher", ts_teacher, "teacher checkpoint directory");
  ts->add_option("--out", ts_out, "checkpoint directory")->required();
  ts_cfg.attach(ts);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ev_corpus, ev_ckpt, ev_split = "val", ev_out;
  bool ev_no_fps = false, ev_target_only = false;
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--split", ev_split)->capture_default_str();
  ev->add_option("--out", ev_out, "metrics CSV");
  ev->add_flag("--no-fps", ev_no_fps, "skip the timing pass");
  ev->add_flag("--target-only", ev_target_only, "evaluate annotated frames only");

  // infer
  auto* inf = app.add_subcommand("infer", "single-frame inference with a student checkpoint");
  std::string inf_ckpt, inf_frame, inf_out;
  inf->add_option("--checkpoint", inf_ckpt)->required();
  inf->add_option("--frame", inf_frame, "WCT1 frame (1, 3, H, W)")->required();
  inf->add_option("--out", inf_out, "WCT1 class map (H, W)")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and evaluate a grid of student configurations");
  std::string ab_corpus, ab_teacher, ab_grid, ab_preset, ab_out, ab_seeds = "0,1,2,3,4";
  ConfigArgs ab_cfg;
  ab->add_option("--corpus", ab_corpus)->required();
  ab->add_option("--teacher", ab_teacher);
  ab->add_option("--grid", ab_grid, "grid file, lines 'cell_id key=value ...'");
  ab->add_option("--preset", ab_preset, "built-in grid: direction-frames");
  ab->add_option("--seeds", ab_seeds)->capture_default_str();
  ab->add_option("--out", ab_out, "ablation CSV")->required();
  ab_cfg.attach(ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (!gen_scene.empty()) scene = load_scene_spec(gen_scene);
      const auto r = parse_reals(gen_ratios);
      if (r.size() != 3) throw std::invalid_argument("--ratios expects three comma-separated values");
      const CorpusManifest m = build_corpus(gen_out, scene, gen_clips, {r[0], r[1], r[2]}, gen_seed);
      std::printf("wrote %zu clips to %s (train %zu, val %zu, test %zu)\n", m.entries.size(), gen_out.c_str(),
                  m.split(Split::train).size(), m.split(Split::val).size(), m.split(Split::test).size());
    } else if (clicks->parsed()) {
      const CorpusManifest m = load_corpus(clicks_corpus);
      const std::size_t classes = load_scene_spec(fs::path(clicks_corpus) / "scene.txt").num_classes;
      ClickConfig cfg = corpus_click_config(classes, clicks_seed);
      cfg.min_area = clicks_min_area;
      const auto stats = generate_corpus_clicks(m, cfg);
      std::string csv = "clip_id,total_clicks,annotated_fraction,classes_without_clicks,label_mismatches\n";
      std::size_t total = 0, mismatches = 0;
      for (const auto& [id, s] : stats) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", s.annotated_fraction);
        csv += id + "," + std::to_string(s.total_clicks) + "," + buf + "," +
               std::to_string(s.classes_without_clicks.size()) + "," + std::to_string(s.label_mismatches) + "\n";
        total += s.total_clicks;
        mismatches += s.label_mismatches;
      }
      write_file(fs::path(clicks_corpus) / "click_stats.csv", csv);
      std::printf("wrote clicks for %zu clips (%zu clicks, %zu label mismatches)\n", stats.size(), total, mismatches);
    } else if (tt->parsed()) {
      const TrainConfig cfg = tt_cfg.load();
      const CorpusManifest m = load_corpus(tt_corpus);
      const SplitData train = load_split(m, Split::train, true);
      const SplitData val = load_split(m, Split::val, false);
      const TrainResult r = train_teacher(train, &val.clips, cfg);
      save_training(tt_out, r, cfg, "teacher");
      print_epochs(r);
      std::printf("saved teacher to %s\n", tt_out.c_str());
    } else if (ts->parsed()) {
      const TrainConfig cfg = ts_cfg.load();
      const CorpusManifest m = load_corpus(ts_corpus);
      const SplitData train = load_split(m, Split::train, true);
      const SplitData val = load_split(m, Split::val, false);
      std::optional<Checkpoint> teacher;
      if (!ts_teacher.empty()) teacher = load_checkpoint(ts_teacher);
      if (teacher && teacher->net.role != NetRole::teacher) {
        throw std::invalid_argument(ts_teacher + ": checkpoint role is not 'teacher'");
      }
      const TrainResult r = train_student(train, &val.clips, cfg, teacher ? &teacher->net : nullptr);
      save_training(ts_out, r, cfg, "student");
      print_epochs(r);
      std::printf("saved student to %s\n", ts_out.c_str());
    } else if (ev->parsed()) {
      const CorpusManifest m = load_corpus(ev_corpus);
      const SplitData data = load_split(m, parse_split(ev_split), false);
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      EvalOptions opt;
      opt.measure_fps = !ev_no_fps;
      opt.target_frames_only = ev_target_only;
      const EvalReport rep = evaluate(ck.net, data.clips, opt);
      if (!ev_out.empty()) write_file(ev_out, eval_csv(rep));
      std::printf("miou %.6f  mpa %.6f  params %zu", rep.miou, rep.mpa, rep.param_count);
      if (opt.measure_fps) std::printf("  fps %.1f", rep.frames_per_second);
      std::printf("\n");
      for (auto c : rep.excluded_classes) std::printf("class %zu absent from ground truth; excluded\n", c);
    } else if (inf->parsed()) {
      const LabelMap pred = infer_file(inf_ckpt, inf_frame, inf_out);
      std::printf("wrote %zux%zu class map to %s\n", pred.height, pred.width, inf_out.c_str());
    } else if (ab->parsed()) {
      const TrainConfig cfg = ab_cfg.load();
      AblationSpec spec;
      if (!ab_grid.empty() == !ab_preset.empty()) throw std::invalid_argument("ablate: give exactly one of --grid or --preset");
      if (ab_preset == "direction-frames") {
        spec.cells = direction_frame_grid({Direction::forward, Direction::backward, Direction::bidirection}, {1, 3, 5});
      } else if (!ab_preset.empty()) {
        throw std::invalid_argument("ablate: unknown preset '" + ab_preset + "'");
      } else {
        spec.cells = parse_ablation_grid(read_file(ab_grid));
      }
      spec.seeds.clear();
      std::stringstream seeds(ab_seeds);
      for (std::string item; std::getline(seeds, item, ',');) spec.seeds.push_back(std::stoull(item));
      const CorpusManifest m = load_corpus(ab_corpus);
      const SplitData train = load_split(m, Split::train, true);
      const SplitData val = load_split(m, Split::val, false);
      std::optional<Checkpoint> teacher;
      if (!ab_teacher.empty()) teacher = load_checkpoint(ab_teacher);
      const auto rows = run_ablation(train, val.clips, cfg, teacher ? &teacher->net : nullptr, spec,
                                     [](const std::string& cell, std::uint64_t seed, double miou) {
                                       std::printf("%s seed %llu miou %.4f\n", cell.c_str(),
                                                   static_cast<unsigned long long>(seed), miou);
                                       std::fflush(stdout);
                                     });
      write_file(ab_out, ablation_csv(rows, spec.seeds));
      std::printf("wrote %zu cells to %s\n", rows.size(), ab_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
