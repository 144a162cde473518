#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "weclick/tensor.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

/// Malformed or unreadable on-disk artifact. The message names the file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// WCT1 layout: "WCT1", u8 rank, rank x u32 LE dims, numel x f32 LE values.
std::vector<std::uint8_t> encode_wct1(const Tensor& t);
Tensor decode_wct1(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace WECLICK_ABI
}  // namespace weclick
