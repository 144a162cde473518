#include "weclick/synthdata.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "weclick/rng.hpp"
#include "weclick/tensor_io.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace fs = std::filesystem;
namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::array<double, 3> class_color(std::int32_t class_id, std::size_t num_classes) {
  if (class_id == 0) return {0.45, 0.45, 0.45};
  // Evenly spaced hues, moderate saturation.
  const double hue = 6.0 * (class_id - 1) / static_cast<double>(num_classes - 1);
  const double s = 0.6, v = 0.8;
  const int sector = static_cast<int>(std::floor(hue)) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Hashed per-coordinate noise in [-1, 1].
double lattice_noise(std::uint64_t seed, std::int64_t r, std::int64_t c, std::uint64_t channel) {
  const auto h = derive_seed({seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c), channel});
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

// Smooth background texture: bilinear interpolation of a coarse lattice.
double smooth_noise(std::uint64_t seed, double r, double c, std::uint64_t channel) {
  constexpr double cell = 8.0;
  const double y = r / cell, x = c / cell;
  const auto y0 = static_cast<std::int64_t>(std::floor(y)), x0 = static_cast<std::int64_t>(std::floor(x));
  const double ty = y - y0, tx = x - x0;
  const double a = lattice_noise(seed, y0, x0, channel), b = lattice_noise(seed, y0, x0 + 1, channel);
  const double d = lattice_noise(seed, y0 + 1, x0, channel), e = lattice_noise(seed, y0 + 1, x0 + 1, channel);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty;
}

std::int64_t render_pos(double base, double velocity, std::size_t t) {
  return static_cast<std::int64_t>(std::llround(base + velocity * static_cast<double>(t)));
}

struct Rendered {
  std::vector<Tensor> frames;
  std::vector<LabelMap> masks, instances;
};

Rendered render(const SceneSpec& spec, std::uint64_t seed, const std::vector<ShapeMotion>& motions,
                const std::array<double, 3>& bg_color, std::uint64_t bg_seed) {
  const std::size_t h = spec.height, w = spec.width, plane = h * w;
  Rendered out;
  for (std::size_t t = 0; t < spec.length; ++t) {
    LabelMap mask(h, w, 0), inst(h, w, 0);
    std::vector<double> img(3 * plane);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        for (std::uint64_t ch = 0; ch < 3; ++ch) {
          img[ch * plane + r * w + c] =
              bg_color[ch] + spec.texture_amplitude * smooth_noise(bg_seed, double(r), double(c), ch);
        }
      }
    }
    for (std::size_t s = 0; s < motions.size(); ++s) {
      const ShapeMotion& m = motions[s];
      const std::int64_t top = render_pos(m.row0, m.vy, t), left = render_pos(m.col0, m.vx, t);
      for (std::int64_t r = 0; r < static_cast<std::int64_t>(m.extent_h); ++r) {
        for (std::int64_t c = 0; c < static_cast<std::int64_t>(m.extent_w); ++c) {
          if (!m.covers(r, c)) continue;
          const std::int64_t y = top + r, x = left + c;
          if (y < 0 || x < 0 || y >= static_cast<std::int64_t>(h) || x >= static_cast<std::int64_t>(w)) continue;
          const std::size_t p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          for (std::uint64_t ch = 0; ch < 3; ++ch) {
            img[ch * plane + p] = m.color[ch] + 0.5 * spec.texture_amplitude * lattice_noise(m.texture_seed, r, c, ch);
          }
          mask.values[p] = m.class_id;
          inst.values[p] = static_cast<std::int32_t>(s + 1);
        }
      }
    }
    Rng noise(derive_seed({seed, 0x6e6f697365ULL, t}));
    std::vector<Real> px(3 * plane);
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = static_cast<Real>(std::clamp(img[i] + spec.frame_noise * noise.normal(), 0.0, 1.0));
    }
    out.frames.emplace_back(Shape{1, 3, h, w}, std::move(px));
    out.masks.push_back(std::move(mask));
    out.instances.push_back(std::move(inst));
  }
  return out;
}

bool boxes_overlap(const ShapeMotion& a, const ShapeMotion& b, std::size_t t) {
  const auto ar = render_pos(a.row0, a.vy, t), ac = render_pos(a.col0, a.vx, t);
  const auto br = render_pos(b.row0, b.vy, t), bc = render_pos(b.col0, b.vx, t);
  return ar < br + static_cast<std::int64_t>(b.extent_h) && br < ar + static_cast<std::int64_t>(a.extent_h) &&
         ac < bc + static_cast<std::int64_t>(b.extent_w) && bc < ac + static_cast<std::int64_t>(a.extent_w);
}

std::map<std::string, std::string> read_kv(const fs::path& path, std::vector<std::string>* ordered_keys = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": malformed line '" + line + "'");
    auto key = line.substr(0, eq);
    if (ordered_keys) ordered_keys->push_back(key);
    kv[key] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key,
                               const fs::path& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(origin.string() + ": missing key '" + key + "'");
  return it->second;
}

std::string frame_name(const char* prefix, std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.wct", prefix, t);
  return buf;
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::disk: return "disk";
    case ShapeKind::l_shape: return "l_shape";
  }
  return "?";
}

ShapeKind parse_shape_kind(const std::string& text) {
  if (text == "rectangle") return ShapeKind::rectangle;
  if (text == "disk") return ShapeKind::disk;
  if (text == "l_shape") return ShapeKind::l_shape;
  throw std::invalid_argument("unknown shape kind '" + text + "'");
}

bool ShapeMotion::covers(std::int64_t r, std::int64_t c) const {
  const auto eh = static_cast<std::int64_t>(extent_h), ew = static_cast<std::int64_t>(extent_w);
  if (r < 0 || c < 0 || r >= eh || c >= ew) return false;
  switch (kind) {
    case ShapeKind::rectangle: return true;
    case ShapeKind::disk: {
      const double dy = (r + 0.5 - eh / 2.0) / (eh / 2.0), dx = (c + 0.5 - ew / 2.0) / (ew / 2.0);
      return dy * dy + dx * dx <= 1.0;
    }
    case ShapeKind::l_shape: return !(r < eh / 2 && c >= ew / 2);
  }
  return false;
}

void SceneSpec::validate() const {
  if (height < 2 || width < 2 || height % 2 || width % 2) {
    throw std::invalid_argument("scene: H and W must be even and >= 2");
  }
  if (num_classes < 2) throw std::invalid_argument("scene: need at least 2 classes");
  if (length < 1) throw std::invalid_argument("scene: clip length must be >= 1");
  if (target_index >= length) throw std::invalid_argument("scene: target_index must be < length");
  if (min_shapes < 1 || min_shapes > max_shapes) throw std::invalid_argument("scene: invalid shape count range");
  if (kinds.empty()) throw std::invalid_argument("scene: no shape kinds");
  if (min_extent < 2 || min_extent > max_extent) throw std::invalid_argument("scene: invalid extent range");
  if (max_speed < 0) throw std::invalid_argument("scene: max_speed must be >= 0");
  const double travel = max_speed * static_cast<double>(length - 1);
  if (static_cast<double>(max_extent) + travel + 1.0 > static_cast<double>(std::min(height, width))) {
    throw std::invalid_argument("scene: shapes of extent " + std::to_string(max_extent) +
                                " moving up to " + fmt_double(travel) + " px cannot fit in " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

VideoClip generate_clip(const SceneSpec& spec, std::uint64_t seed, std::string id) {
  spec.validate();
  Rng rng(seed);
  const double steps = static_cast<double>(spec.length - 1);

  for (int attempt = 0; attempt < 500; ++attempt) {
    std::array<double, 3> bg = class_color(0, spec.num_classes);
    for (auto& v : bg) v += rng.uniform(-spec.color_jitter, spec.color_jitter);
    const std::uint64_t bg_seed = derive_seed({seed, 0x6267ULL, static_cast<std::uint64_t>(attempt)});

    const auto count = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.min_shapes), static_cast<std::int64_t>(spec.max_shapes)));
    std::vector<ShapeMotion> motions;
    for (std::size_t s = 0; s < count; ++s) {
      ShapeMotion m;
      m.kind = spec.kinds[rng.below(spec.kinds.size())];
      m.class_id = static_cast<std::int32_t>(rng.between(1, static_cast<std::int64_t>(spec.num_classes) - 1));
      const auto lo = static_cast<std::int64_t>(spec.min_extent), hi = static_cast<std::int64_t>(spec.max_extent);
      m.extent_h = static_cast<std::size_t>(rng.between(lo, hi));
      m.extent_w = m.kind == ShapeKind::disk ? m.extent_h : static_cast<std::size_t>(rng.between(lo, hi));
      const auto speed = static_cast<std::int64_t>(std::floor(spec.max_speed));
      if (spec.subpixel_velocity) {
        m.vy = rng.uniform(-spec.max_speed, spec.max_speed);
        m.vx = rng.uniform(-spec.max_speed, spec.max_speed);
      } else {
        m.vy = static_cast<double>(rng.between(-speed, speed));
        m.vx = static_cast<double>(rng.between(-speed, speed));
      }
      // Keep the whole trajectory inside the frame.
      auto place = [&](double v, std::size_t extent, std::size_t size) {
        const double lo_pos = std::max(0.0, -v * steps);
        const double hi_pos = static_cast<double>(size - extent) - std::max(0.0, v * steps);
        if (spec.subpixel_velocity) return rng.uniform(lo_pos + 0.5, hi_pos - 0.5);
        return static_cast<double>(rng.between(static_cast<std::int64_t>(std::ceil(lo_pos)),
                                               static_cast<std::int64_t>(std::floor(hi_pos))));
      };
      m.row0 = place(m.vy, m.extent_h, spec.height);
      m.col0 = place(m.vx, m.extent_w, spec.width);
      m.color = class_color(m.class_id, spec.num_classes);
      for (auto& v : m.color) v += rng.uniform(-spec.color_jitter, spec.color_jitter);
      m.texture_seed = derive_seed({seed, static_cast<std::uint64_t>(attempt), s});
      motions.push_back(m);
    }

    if (!spec.allow_occlusion) {
      bool clash = false;
      for (std::size_t a = 0; a < count && !clash; ++a)
        for (std::size_t b = a + 1; b < count && !clash; ++b)
          for (std::size_t t = 0; t < spec.length && !clash; ++t) clash = boxes_overlap(motions[a], motions[b], t);
      if (clash) continue;
    }

    Rendered r = render(spec, seed, motions, bg, bg_seed);
    std::set<std::int32_t> present(r.masks[spec.target_index].values.begin(),
                                   r.masks[spec.target_index].values.end());
    if (present.size() < 2) continue;

    VideoClip clip;
    clip.id = std::move(id);
    clip.seed = seed;
    clip.num_classes = spec.num_classes;
    clip.frames = std::move(r.frames);
    clip.masks = std::move(r.masks);
    clip.instances = std::move(r.instances);
    clip.target_index = spec.target_index;
    clip.motions = std::move(motions);
    return clip;
  }
  throw std::runtime_error("generate_clip: could not place shapes satisfying the scene constraints");
}

void save_clip(const fs::path& dir, const VideoClip& clip) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".wct" && entry.path().filename().string().starts_with("frame_")) {
      fs::remove(entry.path());
    }
  }
  std::ostringstream m;
  m << "format=weclick-clip-1\n"
    << "id=" << clip.id << '\n'
    << "seed=" << clip.seed << '\n'
    << "height=" << clip.height() << '\n'
    << "width=" << clip.width() << '\n'
    << "length=" << clip.length() << '\n'
    << "target_index=" << clip.target_index << '\n'
    << "num_classes=" << clip.num_classes << '\n'
    << "shapes=" << clip.motions.size() << '\n';
  for (std::size_t s = 0; s < clip.motions.size(); ++s) {
    const auto& sm = clip.motions[s];
    m << "shape." << s << '=' << to_string(sm.kind) << ' ' << sm.class_id << ' ' << fmt_double(sm.row0) << ' '
      << fmt_double(sm.col0) << ' ' << fmt_double(sm.vy) << ' ' << fmt_double(sm.vx) << ' ' << sm.extent_h
      << ' ' << sm.extent_w << ' ' << fmt_double(sm.color[0]) << ' ' << fmt_double(sm.color[1]) << ' '
      << fmt_double(sm.color[2]) << ' ' << sm.texture_seed << '\n';
  }
  for (std::size_t t = 0; t < clip.length(); ++t) {
    save_tensor(dir / frame_name("frame", t), clip.frames[t]);
    save_tensor(dir / frame_name("mask", t), label_map_to_tensor(clip.masks[t]));
    save_tensor(dir / frame_name("inst", t), label_map_to_tensor(clip.instances[t]));
  }
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw FormatError((dir / "manifest.txt").string() + ": cannot open for writing");
  out << m.str();
}

VideoClip load_clip(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.txt";
  const auto kv = read_kv(mpath);
  if (require_key(kv, "format", mpath) != "weclick-clip-1") throw FormatError(mpath.string() + ": unknown format");
  VideoClip clip;
  std::size_t length = 0, h = 0, w = 0, shapes = 0;
  try {
    clip.id = require_key(kv, "id", mpath);
    clip.seed = std::stoull(require_key(kv, "seed", mpath));
    h = std::stoull(require_key(kv, "height", mpath));
    w = std::stoull(require_key(kv, "width", mpath));
    length = std::stoull(require_key(kv, "length", mpath));
    clip.target_index = std::stoull(require_key(kv, "target_index", mpath));
    clip.num_classes = std::stoull(require_key(kv, "num_classes", mpath));
    shapes = std::stoull(require_key(kv, "shapes", mpath));
    for (std::size_t s = 0; s < shapes; ++s) {
      std::istringstream is(require_key(kv, "shape." + std::to_string(s), mpath));
      ShapeMotion sm;
      std::string kind;
      is >> kind >> sm.class_id >> sm.row0 >> sm.col0 >> sm.vy >> sm.vx >> sm.extent_h >> sm.extent_w >>
          sm.color[0] >> sm.color[1] >> sm.color[2] >> sm.texture_seed;
      if (!is) throw FormatError(mpath.string() + ": malformed shape." + std::to_string(s));
      sm.kind = parse_shape_kind(kind);
      clip.motions.push_back(sm);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  if (clip.target_index >= length) throw FormatError(mpath.string() + ": target_index out of range");

  std::size_t frame_files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("frame_") && entry.path().extension() == ".wct") ++frame_files;
  }
  if (frame_files != length) {
    throw FormatError(mpath.string() + ": manifest lists " + std::to_string(length) + " frames but " +
                      std::to_string(frame_files) + " frame files are present");
  }
  for (std::size_t t = 0; t < length; ++t) {
    const fs::path fpath = dir / frame_name("frame", t);
    if (!fs::exists(fpath)) throw FormatError(fpath.string() + ": missing frame file");
    Tensor frame = load_tensor(fpath);
    if (frame.shape() != Shape{1, 3, h, w}) {
      throw FormatError(fpath.string() + ": shape " + shape_to_string(frame.shape()) + " does not match manifest");
    }
    clip.frames.push_back(std::move(frame));
    for (const char* prefix : {"mask", "inst"}) {
      const fs::path p = dir / frame_name(prefix, t);
      LabelMap map = label_map_from_tensor(load_tensor(p));
      if (map.height != h || map.width != w) throw FormatError(p.string() + ": size does not match manifest");
      (prefix[0] == 'm' ? clip.masks : clip.instances).push_back(std::move(map));
    }
  }
  return clip;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + text + "'");
}

std::vector<CorpusEntry> CorpusManifest::split(Split s) const {
  std::vector<CorpusEntry> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t num_clips, const std::array<double, 3>& ratios) {
  double total = 0;
  for (double r : ratios) {
    if (r < 0) throw std::invalid_argument("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1, got " + fmt_double(total));
  if (num_clips < ratios.size()) {
    throw std::invalid_argument("need at least " + std::to_string(ratios.size()) + " clips for " +
                                std::to_string(ratios.size()) + " splits, got " + std::to_string(num_clips));
  }
  const auto val = static_cast<std::size_t>(std::llround(ratios[1] * num_clips));
  const auto test = static_cast<std::size_t>(std::llround(ratios[2] * num_clips));
  if (val + test > num_clips) throw std::invalid_argument("split ratios leave no room for training clips");
  return {num_clips - val - test, val, test};
}

CorpusManifest build_corpus(const fs::path& root, const SceneSpec& spec, std::size_t num_clips,
                            const std::array<double, 3>& ratios, std::uint64_t seed) {
  spec.validate();
  const auto sizes = split_sizes(num_clips, ratios);
  std::vector<std::size_t> order(num_clips);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({seed, 0x73706c6974ULL}));
  for (std::size_t i = num_clips; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<Split> assign(num_clips);
  for (std::size_t i = 0; i < num_clips; ++i) {
    assign[order[i]] = i < sizes[0] ? Split::train : (i < sizes[0] + sizes[1] ? Split::val : Split::test);
  }

  CorpusManifest manifest;
  manifest.root = root;
  fs::create_directories(root / "clips");
  for (std::size_t i = 0; i < num_clips; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%04zu", i);
    const VideoClip clip = generate_clip(spec, derive_seed({seed, 0x636c6970ULL, i}), name);
    const fs::path rel = fs::path("clips") / name;
    save_clip(root / rel, clip);
    manifest.entries.push_back({name, rel, clip.target_index, assign[i]});
  }

  auto write_list = [&](const fs::path& file, std::optional<Split> only) {
    std::ofstream out(root / file, std::ios::trunc);
    if (!out) throw FormatError((root / file).string() + ": cannot open for writing");
    for (const auto& e : manifest.entries) {
      if (only && e.split != *only) continue;
      out << e.clip_id << ' ' << e.path.generic_string() << ' ' << e.target_index << '\n';
    }
  };
  write_list("corpus.txt", std::nullopt);
  write_list("train.txt", Split::train);
  write_list("val.txt", Split::val);
  write_list("test.txt", Split::test);
  save_scene_spec(root / "scene.txt", spec);
  return manifest;
}

CorpusManifest load_corpus(const fs::path& root) {
  CorpusManifest manifest;
  manifest.root = root;
  std::map<std::string, Split> split_of;
  for (Split s : {Split::train, Split::val, Split::test}) {
    const fs::path p = root / (to_string(s) + ".txt");
    std::ifstream in(p);
    if (!in) throw FormatError(p.string() + ": cannot open split manifest");
    std::string id, path;
    std::size_t target;
    while (in >> id >> path >> target) split_of[id] = s;
  }
  const fs::path all = root / "corpus.txt";
  std::ifstream in(all);
  if (!in) throw FormatError(all.string() + ": cannot open corpus manifest");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    CorpusEntry e;
    std::string path;
    if (!(is >> e.clip_id >> path >> e.target_index)) throw FormatError(all.string() + ": malformed line '" + line + "'");
    e.path = path;
    auto it = split_of.find(e.clip_id);
    if (it == split_of.end()) throw FormatError(all.string() + ": clip " + e.clip_id + " is in no split");
    e.split = it->second;
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_scene_spec(const fs::path& path, const SceneSpec& spec) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "height=" << spec.height << "\nwidth=" << spec.width << "\nlength=" << spec.length
      << "\ntarget_index=" << spec.target_index << "\nmin_shapes=" << spec.min_shapes
      << "\nmax_shapes=" << spec.max_shapes << "\nnum_classes=" << spec.num_classes << "\nkinds=";
  for (std::size_t i = 0; i < spec.kinds.size(); ++i) out << (i ? "," : "") << to_string(spec.kinds[i]);
  out << "\nmin_extent=" << spec.min_extent << "\nmax_extent=" << spec.max_extent
      << "\nmax_speed=" << fmt_double(spec.max_speed) << "\nsubpixel_velocity=" << spec.subpixel_velocity
      << "\nallow_occlusion=" << spec.allow_occlusion << "\ntexture_amplitude=" << fmt_double(spec.texture_amplitude)
      << "\ncolor_jitter=" << fmt_double(spec.color_jitter) << "\nframe_noise=" << fmt_double(spec.frame_noise)
      << '\n';
}

SceneSpec load_scene_spec(const fs::path& path) {
  SceneSpec spec;
  for (const auto& [k, v] : read_kv(path)) {
    try {
      if (k == "height") spec.height = std::stoull(v);
      else if (k == "width") spec.width = std::stoull(v);
      else if (k == "length") spec.length = std::stoull(v);
      else if (k == "target_index") spec.target_index = std::stoull(v);
      else if (k == "min_shapes") spec.min_shapes = std::stoull(v);
      else if (k == "max_shapes") spec.max_shapes = std::stoull(v);
      else if (k == "num_classes") spec.num_classes = std::stoull(v);
      else if (k == "min_extent") spec.min_extent = std::stoull(v);
      else if (k == "max_extent") spec.max_extent = std::stoull(v);
      else if (k == "max_speed") spec.max_speed = std::stod(v);
      else if (k == "subpixel_velocity") spec.subpixel_velocity = v == "1" || v == "true";
      else if (k == "allow_occlusion") spec.allow_occlusion = v == "1" || v == "true";
      else if (k == "texture_amplitude") spec.texture_amplitude = std::stod(v);
      else if (k == "color_jitter") spec.color_jitter = std::stod(v);
      else if (k == "frame_noise") spec.frame_noise = std::stod(v);
      else if (k == "kinds") {
        spec.kinds.clear();
        std::istringstream is(v);
        std::string item;
        while (std::getline(is, item, ',')) spec.kinds.push_back(parse_shape_kind(item));
      } else {
        throw FormatError(path.string() + ": unknown key '" + k + "'");
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ": bad value for '" + k + "': " + e.what());
    }
  }
  spec.validate();
  return spec;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
