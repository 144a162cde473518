#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weclick/label_map.hpp"
#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

enum class ShapeKind { rectangle, disk, l_shape };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& text);

struct SceneSpec {
  std::size_t height = 48;
  std::size_t width = 48;
  std::size_t length = 5;
  std::size_t target_index = 2;
  std::size_t min_shapes = 2;
  std::size_t max_shapes = 3;
  std::size_t num_classes = 4;
  std::vector<ShapeKind> kinds = {ShapeKind::rectangle, ShapeKind::disk, ShapeKind::l_shape};
  std::size_t min_extent = 10;  ///< shape bounding-box side range, pixels
  std::size_t max_extent = 18;
  double max_speed = 2.0;       ///< per-axis |velocity| bound, pixels/frame
  bool subpixel_velocity = false;
  bool allow_occlusion = true;
  double texture_amplitude = 0.12;
  double color_jitter = 0.12;
  double frame_noise = 0.02;

  void validate() const;
};

/// Rigid motion of one rendered shape. Position at frame t is
/// (row0 + vy * t, col0 + vx * t), rendered at the rounded position.
struct ShapeMotion {
  ShapeKind kind = ShapeKind::rectangle;
  std::int32_t class_id = 1;
  double row0 = 0, col0 = 0;
  double vy = 0, vx = 0;
  std::size_t extent_h = 0, extent_w = 0;
  std::array<double, 3> color{};
  std::uint64_t texture_seed = 0;

  /// Membership test in the shape's local frame (0 <= r < extent_h, ...).
  bool covers(std::int64_t r, std::int64_t c) const;
};

struct VideoClip {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  std::vector<Tensor> frames;       ///< (1, 3, H, W), values in [0, 1]
  std::vector<LabelMap> masks;      ///< class ids
  std::vector<LabelMap> instances;  ///< 0 = background, i + 1 = motions[i]
  std::size_t target_index = 0;
  std::vector<ShapeMotion> motions;

  std::size_t length() const { return frames.size(); }
  std::size_t height() const { return masks.empty() ? 0 : masks[0].height; }
  std::size_t width() const { return masks.empty() ? 0 : masks[0].width; }
};

VideoClip generate_clip(const SceneSpec& spec, std::uint64_t seed, std::string id = "clip");

/// Directory of WCT1 frames/masks/instances plus manifest.txt.
void save_clip(const std::filesystem::path& dir, const VideoClip& clip);
VideoClip load_clip(const std::filesystem::path& dir);

enum class Split { train, val, test };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct CorpusEntry {
  std::string clip_id;
  std::filesystem::path path;  ///< relative to the corpus root
  std::size_t target_index = 0;
  Split split = Split::train;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;

  std::vector<CorpusEntry> split(Split s) const;
};

/// Split sizes for `num_clips`; validation/test sizes are rounded and the
/// training split takes the remainder.
std::array<std::size_t, 3> split_sizes(std::size_t num_clips, const std::array<double, 3>& ratios);

/// Generates `num_clips` clips under `root` and writes manifests
/// (corpus.txt plus train.txt / val.txt / test.txt, lines "clip_id path target_index").
CorpusManifest build_corpus(const std::filesystem::path& root, const SceneSpec& spec,
                            std::size_t num_clips, const std::array<double, 3>& ratios,
                            std::uint64_t seed);
CorpusManifest load_corpus(const std::filesystem::path& root);

void save_scene_spec(const std::filesystem::path& path, const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

}  // namespace WECLICK_ABI
}  // namespace weclick
