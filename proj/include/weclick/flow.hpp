#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "weclick/synthdata.hpp"
#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Backward displacement field stored on the target (k) grid: target pixel p
/// reads the source frame f at p + grid(p). Channel 0 is dy, channel 1 is dx.
struct FlowField {
  Tensor grid;  ///< (1, 2, H, W), never part of the tape
  std::size_t src_index = 0;
  std::size_t dst_index = 0;

  std::size_t height() const { return grid.dim(2); }
  std::size_t width() const { return grid.dim(3); }
};

FlowField zero_flow(std::size_t h, std::size_t w, std::size_t f = 0, std::size_t k = 0);
FlowField constant_flow(std::size_t h, std::size_t w, double dy, double dx, std::size_t f = 0, std::size_t k = 0);

struct WarpResult {
  Tensor warped;  ///< (1, C, H, W)
  Tensor valid;   ///< (1, 1, H, W), 1 where the sample point lies inside the frame
};

/// Resamples `source_map` onto the target grid; differentiable in source_map.
Tensor warp(const Tensor& source_map, const FlowField& flow);
WarpResult warp_with_validity(const Tensor& source_map, const FlowField& flow);

/// Exact displacement of the synthetic scene from frame f into frame k's grid.
FlowField gt_flow(const VideoClip& clip, std::size_t f, std::size_t k);

enum class FlowKind { ground_truth, noisy, block_match };

struct FlowProvider {
  FlowKind kind = FlowKind::ground_truth;
  double sigma = 0.0;       ///< noisy: Gaussian std-dev in pixels
  std::uint64_t seed = 0;   ///< noisy
  std::size_t patch = 3;    ///< block_match: odd patch side
  std::size_t radius = 2;   ///< block_match: search radius

  bool operator==(const FlowProvider&) const = default;
};

std::string to_string(const FlowProvider& provider);
/// "ground_truth", "noisy:<sigma>[:<seed>]", "block_match:<patch>:<radius>".
FlowProvider parse_flow_provider(const std::string& text);

/// Flow from frame f into frame k. `clip` is required for ground_truth and
/// noisy providers; block_match works from the two frames alone.
FlowField estimate_flow(const FlowProvider& provider, const Tensor& x_f, const Tensor& x_k,
                        const VideoClip* clip, std::size_t f, std::size_t k);

/// Block matching by exhaustive SAD search over integer displacements.
FlowField block_match_flow(const Tensor& x_f, const Tensor& x_k, std::size_t patch, std::size_t radius,
                           std::size_t f = 0, std::size_t k = 0);

/// WCT1 grid plus a "<path>.txt" sidecar naming f, k and the provider kind.
void save_flow(const std::filesystem::path& path, const FlowField& flow, const std::string& kind);
FlowField load_flow(const std::filesystem::path& path);

}  // namespace WECLICK_ABI
}  // namespace weclick
