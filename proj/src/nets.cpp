#include "weclick/nets.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "weclick/rng.hpp"
#include "weclick/tensor_io.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

const char* const kManifest = "manifest.txt";

Tensor uniform_init(const Shape& shape, double bound, Rng& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
  return Tensor(shape, std::move(v), true);
}

// Sample positions at the centre of each 2x2 block: bilinear sampling there
// is exactly the block average.
Tensor half_grid(std::size_t h, std::size_t w) {
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<Real> v(2 * oh * ow);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      v[i * ow + j] = static_cast<Real>(2 * i + 0.5);
      v[oh * ow + i * ow + j] = static_cast<Real>(2 * j + 0.5);
    }
  }
  return Tensor({1, 2, oh, ow}, std::move(v));
}

}  // namespace

std::string to_string(NetRole role) { return role == NetRole::teacher ? "teacher" : "student"; }

NetRole parse_net_role(const std::string& text) {
  if (text == "teacher") return NetRole::teacher;
  if (text == "student") return NetRole::student;
  throw std::invalid_argument("unknown net role '" + text + "'");
}

std::size_t SegNet::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

Tensor& SegNet::param(const std::string& name) {
  for (auto& p : params) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

const Tensor& SegNet::param(const std::string& name) const {
  return const_cast<SegNet*>(this)->param(name);
}

void SegNet::zero_grad() {
  for (auto& p : params) p.value.zero_grad();
}

void SegNet::set_trainable(bool on) {
  for (auto& p : params) p.value.set_requires_grad(on);
}

SegNet build_net(NetRole role, std::size_t channels, std::size_t num_classes, std::uint64_t seed) {
  if (channels < 4) throw std::invalid_argument("build_net: channels must be >= 4, got " + std::to_string(channels));
  if (num_classes < 2) {
    throw std::invalid_argument("build_net: num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  SegNet net;
  net.role = role;
  net.channels = channels;
  net.num_classes = num_classes;
  net.seed = seed;
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(role)}));

  auto conv = [&](const std::string& name, std::size_t cin, std::size_t cout, double gain) {
    const double fan_in = static_cast<double>(cin * 9);
    net.params.push_back({name + ".weight", uniform_init({cout, cin, 3, 3}, std::sqrt(gain / fan_in), rng)});
    net.params.push_back({name + ".bias", Tensor::zeros({cout}, true)});
  };
  conv("block1", 3, channels, 6.0);
  conv("block2", channels, channels, 6.0);
  conv("head", channels, num_classes, 3.0);
  return net;
}

Tensor forward(const SegNet& net, const Tensor& frame) {
  if (frame.rank() != 4 || frame.dim(0) != 1 || frame.dim(1) != 3) {
    throw ShapeError("forward: frame must be (1, 3, H, W), got " + shape_to_string(frame.shape()));
  }
  const std::size_t h = frame.dim(2), w = frame.dim(3);
  if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("forward: H and W must be divisible by 2, got " + shape_to_string(frame.shape()));
  }
  const Tensor full = ops::relu(ops::conv2d(frame, net.param("block1.weight"), net.param("block1.bias")));
  const Tensor half = ops::bilinear_sample(full, half_grid(h, w));
  const Tensor deep = ops::relu(ops::conv2d(half, net.param("block2.weight"), net.param("block2.bias")));
  const Tensor merged = ops::add(ops::upsample2x_bilinear(deep), full);
  const Tensor logits = ops::conv2d(merged, net.param("head.weight"), net.param("head.bias"));
  return ops::softmax_channel(logits);
}

SegNet clone_net(const SegNet& net) {
  SegNet out = net;
  for (auto& p : out.params) {
    const bool rg = p.value.requires_grad();
    p.value = p.value.detach();
    p.value.set_requires_grad(rg);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const SegNet& net, std::size_t step,
                     const std::map<std::string, std::string>& extra) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "role=" << to_string(net.role) << '\n'
           << "channels=" << net.channels << '\n'
           << "num_classes=" << net.num_classes << '\n'
           << "seed=" << net.seed << '\n'
           << "step=" << step << '\n';
  for (const auto& [k, v] : extra) manifest << k << '=' << v << '\n';
  for (const auto& p : net.params) {
    save_tensor(dir / (p.name + ".wct"), p.value);
  }
  std::ofstream out(dir / kManifest, std::ios::trunc);
  if (!out) throw FormatError((dir / kManifest).string() + ": cannot open for writing");
  out << manifest.str();
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / kManifest;
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open checkpoint manifest");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(path.string() + ": missing key '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  Checkpoint ck;
  try {
    const NetRole role = parse_net_role(take("role"));
    const auto channels = std::stoull(take("channels"));
    const auto classes = std::stoull(take("num_classes"));
    const auto seed = std::stoull(take("seed"));
    ck.step = std::stoull(take("step"));
    ck.net = build_net(role, channels, classes, seed);
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  ck.extra = std::move(kv);
  for (auto& p : ck.net.params) {
    Tensor loaded = load_tensor(dir / (p.name + ".wct"));
    if (loaded.shape() != p.value.shape()) {
      throw FormatError((dir / (p.name + ".wct")).string() + ": shape " + shape_to_string(loaded.shape()) +
                        " does not match architecture " + shape_to_string(p.value.shape()));
    }
    loaded.set_requires_grad(true);
    p.value = loaded;
  }
  return ck;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
