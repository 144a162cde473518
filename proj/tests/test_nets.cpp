#include <gtest/gtest.h>

#include "test_util.hpp"
#include "weclick/losses.hpp"
#include "weclick/nets.hpp"

using namespace weclick;

namespace {

void expect_simplex(const Tensor& p) {
  const std::size_t c = p.dim(1), plane = p.dim(2) * p.dim(3);
  for (std::size_t px = 0; px < plane; ++px) {
    double sum = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const double v = p.at(k * plane + px);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

std::vector<std::vector<double>> weights(const SegNet& net) {
  std::vector<std::vector<double>> out;
  for (const auto& p : net.params) out.push_back(test::values(p.value));
  return out;
}

}  // namespace

TEST(Build, DeterministicUnderSeed) {
  EXPECT_EQ(weights(build_net(NetRole::teacher, 32, 4, 0)), weights(build_net(NetRole::teacher, 32, 4, 0)));
  EXPECT_NE(weights(build_net(NetRole::teacher, 32, 4, 0)), weights(build_net(NetRole::teacher, 32, 4, 1)));
}

TEST(Build, TeacherIsLarger) {
  EXPECT_GT(build_net(NetRole::teacher, 32, 4, 0).param_count(), build_net(NetRole::student, 8, 4, 0).param_count());
}

TEST(Build, ParamCountMatchesTensors) {
  const SegNet net = build_net(NetRole::student, 8, 4, 0);
  std::size_t total = 0;
  for (const auto& p : net.params) {
    total += p.value.numel();
    EXPECT_TRUE(p.value.requires_grad()) << p.name;
  }
  EXPECT_EQ(net.param_count(), total);
}

TEST(Build, RejectsTinyNets) {
  EXPECT_THROW(build_net(NetRole::student, 3, 4, 0), std::invalid_argument);
  EXPECT_THROW(build_net(NetRole::student, 8, 1, 0), std::invalid_argument);
}

TEST(Forward, ZeroImageGivesSimplex) {
  const Tensor p = forward(build_net(NetRole::teacher, 32, 4, 0), Tensor::zeros({1, 3, 8, 8}));
  EXPECT_EQ(p.shape(), (Shape{1, 4, 8, 8}));
  expect_simplex(p);
}

TEST(Forward, RandomFrameSimplexAndPure) {
  const SegNet net = build_net(NetRole::student, 8, 4, 3);
  const Tensor x = test::random_tensor({1, 3, 8, 8}, 5, 0, 1);
  const Tensor a = forward(net, x), b = forward(net, x);
  expect_simplex(a);
  EXPECT_EQ(test::values(a), test::values(b));
}

TEST(Forward, RejectsOddSizes) {
  const SegNet net = build_net(NetRole::student, 8, 4, 3);
  try {
    forward(net, Tensor::zeros({1, 3, 7, 8}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("divisible by 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(forward(net, Tensor::zeros({1, 2, 8, 8})), ShapeError);
}

TEST(Forward, EveryWeightReceivesGradient) {
  SegNet net = build_net(NetRole::student, 8, 3, 9);
  const Tensor x = test::random_tensor({1, 3, 8, 8}, 2, 0, 1);
  ClickMap clicks(8, 8);
  clicks.set(1, 1, 0);
  clicks.set(6, 5, 2);
  backward(weakly_loss(forward(net, x), x, clicks, 0.1));
  for (const auto& p : net.params) {
    bool any = false;
    for (auto g : p.value.grad()) any = any || g != 0.0f;
    EXPECT_TRUE(any) << p.name;
  }
}

TEST(Clone, IsIndependent) {
  SegNet net = build_net(NetRole::student, 8, 3, 1);
  SegNet copy = clone_net(net);
  copy.params[0].value.mutable_data()[0] += 1.0f;
  EXPECT_NE(copy.params[0].value.at(0), net.params[0].value.at(0));
  SegNet shared = net;
  EXPECT_EQ(shared.params[0].value.identity(), net.params[0].value.identity());
}

TEST(FreezeTest, FrozenNetRecordsNoGradient) {
  SegNet net = build_net(NetRole::teacher, 8, 3, 1);
  net.set_trainable(false);
  Tensor x = test::random_tensor({1, 3, 4, 4}, 1, 0, 1, true);
  backward(ops::reduce_sum(ops::mul(forward(net, x), forward(net, x))));
  for (const auto& p : net.params) EXPECT_FALSE(p.value.requires_grad());
}

TEST(CheckpointTest, RoundTrip) {
  const auto dir = test::fresh_dir("ckpt");
  const SegNet net = build_net(NetRole::teacher, 12, 4, 77);
  save_checkpoint(dir / "t", net, 123, {{"phase", "teacher"}});
  const Checkpoint back = load_checkpoint(dir / "t");
  EXPECT_EQ(back.step, 123u);
  EXPECT_EQ(back.extra.at("phase"), "teacher");
  EXPECT_EQ(back.net.role, NetRole::teacher);
  EXPECT_EQ(back.net.channels, 12u);
  EXPECT_EQ(back.net.num_classes, 4u);
  EXPECT_EQ(weights(back.net), weights(net));
  const Tensor x = test::random_tensor({1, 3, 8, 8}, 1, 0, 1);
  EXPECT_EQ(test::values(forward(back.net, x)), test::values(forward(net, x)));
  EXPECT_THROW(load_checkpoint(dir / "missing"), std::exception);
}
