#pragma once

#include <filesystem>
#include <span>

#include "weclick/label_map.hpp"
#include "weclick/nets.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Argmax class map for one (1, 3, H, W) frame; any role.
LabelMap predict(const SegNet& net, const Tensor& frame);

/// Deployment entry point: student weights and exactly one frame.
/// Rejects teacher checkpoints and batched or multi-frame input.
LabelMap infer(const Checkpoint& student, const Tensor& frame);
LabelMap infer(const Checkpoint& student, std::span<const Tensor> frames);

/// Loads a student checkpoint for infer(); rejects other roles.
Checkpoint load_student(const std::filesystem::path& dir);

/// Reads a WCT1 frame, runs infer() and writes the class map as WCT1 (H, W).
LabelMap infer_file(const std::filesystem::path& checkpoint_dir, const std::filesystem::path& frame_path,
                    const std::filesystem::path& out_path);

}  // namespace WECLICK_ABI
}  // namespace weclick
