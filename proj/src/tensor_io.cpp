#include "weclick/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

constexpr std::uint8_t kMagic[4] = {0x57, 0x43, 0x54, 0x31};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_wct1(const Tensor& t) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + 4 * t.numel());
  for (Real v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_wct1(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": bad WCT1 magic");
  }
  const std::size_t rank = bytes[4];
  if (rank < 1 || rank > 4) throw FormatError(origin + ": unsupported rank " + std::to_string(rank));
  if (bytes.size() < 5 + 4 * rank) throw FormatError(origin + ": truncated header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes.data() + 5 + 4 * i);
  const std::size_t n = shape_numel(shape);
  const std::size_t body = 5 + 4 * rank;
  if (bytes.size() != body + 4 * n) {
    throw FormatError(origin + ": expected " + std::to_string(body + 4 * n) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  std::vector<Real> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<Real>(std::bit_cast<float>(get_u32(bytes.data() + body + 4 * i)));
  }
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_wct1(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wct1(bytes, path.string());
}

}  // namespace WECLICK_ABI
}  // namespace weclick
