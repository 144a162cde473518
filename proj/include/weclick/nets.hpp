#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

enum class NetRole { teacher, student };

std::string to_string(NetRole role);
NetRole parse_net_role(const std::string& text);

struct NamedParam {
  std::string name;
  Tensor value;
};

/// Small encoder/decoder segmentation net: conv-relu at full resolution,
/// 2x average downsample, conv-relu, bilinear 2x upsample with a skip add,
/// then a conv head and channel softmax.
struct SegNet {
  NetRole role = NetRole::student;
  std::size_t channels = 0;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<NamedParam> params;

  std::size_t param_count() const;
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  void zero_grad();
  void set_trainable(bool on);
};

inline constexpr std::size_t kTeacherChannels = 32;
inline constexpr std::size_t kStudentChannels = 8;

SegNet build_net(NetRole role, std::size_t channels, std::size_t num_classes, std::uint64_t seed);

/// frame (1, 3, H, W) with even H, W -> per-pixel class probabilities (1, C, H, W).
Tensor forward(const SegNet& net, const Tensor& frame);

/// Deep copy (independent weights, no shared storage).
SegNet clone_net(const SegNet& net);

struct Checkpoint {
  SegNet net;
  std::size_t step = 0;
  std::map<std::string, std::string> extra;
};

/// Directory of WCT1 parameter files plus a key=value manifest.txt.
void save_checkpoint(const std::filesystem::path& dir, const SegNet& net, std::size_t step,
                     const std::map<std::string, std::string>& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace WECLICK_ABI
}  // namespace weclick
