#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "weclick/tensor.hpp"
#include "weclick/tensor_io.hpp"

using namespace weclick;

TEST(Ops, SoftmaxSymmetricLogits) {
  const Tensor out = ops::softmax_channel(Tensor({1, 2, 1, 1}, {0, 0}));
  EXPECT_FLOAT_EQ(out.at(0), 0.5f);
  EXPECT_FLOAT_EQ(out.at(1), 0.5f);
}

TEST(Ops, SoftmaxTwoClassValues) {
  const Tensor out = ops::softmax_channel(Tensor({1, 2, 1, 1}, {1, 0}));
  const double e = std::exp(1.0);
  EXPECT_NEAR(out.at(0), e / (e + 1.0), 1e-4);
  EXPECT_NEAR(out.at(1), 1.0 / (e + 1.0), 1e-4);
  EXPECT_NEAR(out.at(0), 0.7311, 1e-4);
}

TEST(Ops, SoftmaxSimplexOnRandomLogits) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor p = ops::softmax_channel(test::random_tensor({1, 5, 4, 3}, seed, -8, 8));
    for (std::size_t px = 0; px < 12; ++px) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        const double v = p.at(c * 12 + px);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(Ops, ReluClipsNegatives) {
  const Tensor out = ops::relu(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(test::values(out), (std::vector<double>{0, 0, 2}));
}

TEST(Ops, LogAndExpClamp) {
  const Tensor l = ops::log(Tensor({2}, {0, 1}));
  EXPECT_NEAR(l.at(0), std::log(1e-8), 1e-4);
  EXPECT_EQ(l.at(1), 0.0f);
  const Tensor e = ops::exp(Tensor({2}, {1000, -1000}));
  EXPECT_TRUE(std::isfinite(e.at(0)));
  EXPECT_NEAR(e.at(0) / std::exp(60.0f), 1.0, 1e-5);
  EXPECT_GT(e.at(1), 0.0f);
}

TEST(Ops, ElemwiseMaxTiesGoToFirstInput) {
  Tensor a({2}, {1, 3}, true), b({2}, {1, 2}, true);
  backward(ops::reduce_sum(ops::elemwise_max(a, b)));
  EXPECT_EQ(test::values(a.grad()), (std::vector<double>{1, 1}));
  EXPECT_EQ(test::values(b.grad()), (std::vector<double>{0, 0}));
}

TEST(Ops, ConvIdentityKernel) {
  std::vector<Real> w(9, 0);
  w[4] = 1;  // centre tap
  const Tensor x = test::random_tensor({1, 1, 4, 5}, 3);
  const Tensor y = ops::conv2d(x, Tensor({1, 1, 3, 3}, w), Tensor({1}, {0.5f}));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(y.at(i), x.at(i) + 0.5f);
}

TEST(Ops, ConvZeroPadding) {
  // All-ones kernel over an all-ones image counts in-frame neighbours.
  const Tensor y = ops::conv2d(Tensor::full({1, 1, 3, 3}, 1), Tensor::full({1, 1, 3, 3}, 1), Tensor({1}, {0}));
  EXPECT_EQ(test::values(y), (std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST(Ops, UpsampleConstantAndShape) {
  const Tensor y = ops::upsample2x_bilinear(Tensor::full({1, 2, 3, 4}, 1.5f));
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6, 8}));
  for (auto v : y.data()) EXPECT_FLOAT_EQ(v, 1.5f);
}

TEST(Ops, UpsampleHalfPixelWeights) {
  // 1x2 row [0, 4] -> [0, 1, 3, 4] with half-pixel centres and edge clamp.
  const Tensor y = ops::upsample2x_bilinear(Tensor({1, 1, 1, 2}, {0, 4}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_EQ(test::values(y), (std::vector<double>{0, 1, 3, 4, 0, 1, 3, 4}));
}

TEST(Ops, BilinearSampleInterpolatesAndClamps) {
  const Tensor src({1, 1, 2, 2}, {0, 1, 2, 3});
  const Tensor coords({1, 2, 1, 3}, {0.5f, -5, 1, 0.5f, -5, 7});
  const Tensor y = ops::bilinear_sample(src, coords);
  EXPECT_FLOAT_EQ(y.at(0), 1.5f);  // centre
  EXPECT_FLOAT_EQ(y.at(1), 0.0f);  // clamped to (0, 0)
  EXPECT_FLOAT_EQ(y.at(2), 3.0f);  // clamped to (1, 1)
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  try {
    ops::add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
    EXPECT_NE(msg.find("(3, 2)"), std::string::npos);
  }
}

TEST(Ops, ForwardOpDispatch) {
  const std::vector<Tensor> in = {Tensor({3}, {-1, 0, 2})};
  EXPECT_EQ(test::values(forward_op("relu", in)), (std::vector<double>{0, 0, 2}));
  EXPECT_THROW(forward_op("tanh", in), std::invalid_argument);
  EXPECT_THROW(forward_op("add", in), std::invalid_argument);
  EXPECT_EQ(op_names().size(), 14u);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = test::random_tensor({2, 3, 4}, 1, -1, 1, true);
  backward(ops::reduce_sum(x));
  for (auto g : x.grad()) EXPECT_EQ(g, 1.0f);
}

TEST(Backward, MeanOfSquares) {
  Tensor x({3}, {1, 2, 3}, true);
  backward(ops::reduce_mean(ops::mul(x, x)));
  EXPECT_NEAR(x.grad()[0], 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(x.grad()[1], 4.0 / 3.0, 1e-6);
  EXPECT_NEAR(x.grad()[2], 2.0, 1e-6);
}

TEST(Backward, DisconnectedLeafStaysZero) {
  Tensor x({2}, {1, 2}, true), y({2}, {3, 4}, true);
  backward(ops::reduce_sum(x));
  EXPECT_EQ(test::values(y.grad()), (std::vector<double>{0, 0}));
}

TEST(Backward, FanOutAccumulates) {
  Tensor x({1}, {3}, true);
  backward(ops::reduce_sum(ops::add(ops::mul(x, x), x)));
  EXPECT_FLOAT_EQ(x.grad()[0], 7.0f);
  backward(ops::reduce_sum(x));
  EXPECT_FLOAT_EQ(x.grad()[0], 8.0f);
  x.zero_grad();
  EXPECT_FLOAT_EQ(x.grad()[0], 0.0f);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(backward(ops::mul(x, x)), ShapeError);
}

TEST(Backward, BitIdenticalAcrossRuns) {
  auto run = [] {
    Tensor x = test::random_tensor({1, 2, 6, 6}, 11, -1, 1, true);
    Tensor w = test::random_tensor({3, 2, 3, 3}, 12, -1, 1, true);
    Tensor b = test::random_tensor({3}, 13, -1, 1, true);
    Tensor y = ops::softmax_channel(ops::upsample2x_bilinear(ops::relu(ops::conv2d(x, w, b))));
    backward(ops::reduce_mean(ops::mul(y, ops::log(y))));
    return std::make_pair(test::values(x.grad()), test::values(w.grad()));
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const Tensor x = test::random_tensor({5}, 0);
  EXPECT_EQ(grad_check([](const Tensor& t) { return ops::scale(ops::reduce_sum(t), 0); }, x), 0.0);
}

TEST(GradCheck, SumOfSquares) {
  const Tensor x = test::random_tensor({6}, 0);
  EXPECT_LT(grad_check([](const Tensor& t) { return ops::reduce_sum(ops::mul(t, t)); }, x), 1e-3);
}

TEST(GradCheck, NanReportsInfinity) {
  const Tensor x = test::random_tensor({2}, 0);
  const double err = grad_check(
      [](const Tensor& t) {
        Tensor nan({1}, {std::nanf("")});
        return ops::reduce_sum(ops::mul(ops::reduce_sum(t), nan));
      },
      x);
  EXPECT_TRUE(std::isinf(err));
}

TEST(TensorIo, RoundTripIsBitExact) {
  const Tensor t = test::random_tensor({1, 3, 5, 7}, 4);
  const Tensor back = decode_wct1(encode_wct1(t));
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(test::values(back), test::values(t));
}

TEST(TensorIo, HeaderLayout) {
  const auto bytes = encode_wct1(Tensor({2}, {1.0f, -2.0f}));
  ASSERT_EQ(bytes.size(), 4u + 1u + 4u + 8u);
  EXPECT_EQ(bytes[0], 0x57);
  EXPECT_EQ(bytes[1], 0x43);
  EXPECT_EQ(bytes[2], 0x54);
  EXPECT_EQ(bytes[3], 0x31);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 2);
  EXPECT_EQ(bytes[6] | bytes[7] | bytes[8], 0);
  // 1.0f little-endian
  EXPECT_EQ(bytes[9], 0x00);
  EXPECT_EQ(bytes[12], 0x3f);
}

TEST(TensorIo, RejectsCorruption) {
  auto bytes = encode_wct1(Tensor({2, 2}, {1, 2, 3, 4}));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_wct1(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_wct1(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_wct1(trailing), FormatError);
  auto bad_rank = bytes;
  bad_rank[4] = 9;
  EXPECT_THROW(decode_wct1(bad_rank), FormatError);
}

TEST(TensorIo, LoadErrorNamesFile) {
  const auto dir = test::fresh_dir("tensor_io");
  const auto path = dir / "broken.wct";
  std::ofstream(path, std::ios::binary) << "WCT";
  try {
    load_tensor(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.wct"), std::string::npos);
  }
}

TEST(TensorType, ConstructorChecksSize) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({1, 1, 1, 1, 1}, {1}), ShapeError);
  Tensor t({2}, {1, 2}, true);
  EXPECT_EQ(t.grad().size(), t.numel());
}
