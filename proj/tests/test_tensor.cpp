#include <gtest/gtest.h>

#include <sstream>

#include "semcorr/semcorr.hpp"
#include "support/gradcheck.hpp"

namespace semcorr {
namespace {

Var cvar(Shape s, std::initializer_list<float> v) { return Var::constant(Tensor::from(std::move(s), v)); }

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
  EXPECT_EQ(t.reshaped({4, 6}).shape(), (Shape{4, 6}));
}

TEST(Tensor, RowMajorWidthFastest) {
  Tensor t({1, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(t.at(0, 1, 0, 0), 6.f);
  EXPECT_EQ(t.at(0, 0, 1, 2), 5.f);
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  auto x = Var::constant(Tensor({1, 1, 3, 3}));
  auto w = cvar({1, 1, 2, 2}, {1, -2, 3, 4});
  auto y = conv2d(x, w, Var::constant(Tensor({1})), 1, 0);
  for (float v : y.value().data()) EXPECT_EQ(v, 0.f);
}

TEST(Conv2d, IdentityKernel) {
  auto x = cvar({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = conv2d(x, cvar({1, 1, 1, 1}, {1}), Var::constant(Tensor({1})), 1, 0);
  EXPECT_EQ(y.value(), x.value());
}

TEST(Conv2d, AllOnesKernelSumsWindow) {
  auto x = cvar({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = conv2d(x, Var::constant(Tensor({1, 1, 3, 3}, 1.f)), Var::constant(Tensor({1})), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.value().item(), 45.f);
}

TEST(Conv2d, OutputShapeFollowsConvolutionArithmetic) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int in_h = 1 + static_cast<int>(rng.index(12)), in_w = 1 + static_cast<int>(rng.index(12));
    const int k = 1 + static_cast<int>(rng.index(5)), stride = 1 + static_cast<int>(rng.index(3));
    const int pad = static_cast<int>(rng.index(3));
    const int oh = (in_h + 2 * pad - k) / stride + 1, ow = (in_w + 2 * pad - k) / stride + 1;
    auto x = Var::constant(Tensor({1, 2, in_h, in_w}, 1.f));
    auto w = Var::constant(Tensor({3, 2, k, k}, 1.f));
    auto b = Var::constant(Tensor({3}));
    if (in_h + 2 * pad < k || in_w + 2 * pad < k) {
      EXPECT_THROW(conv2d(x, w, b, stride, pad), ShapeError);
    } else {
      EXPECT_EQ(conv2d(x, w, b, stride, pad).shape(), (Shape{1, 3, oh, ow}));
    }
  }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  auto x = Var::constant(Tensor({1, 3, 4, 4}));
  auto w = Var::constant(Tensor({2, 4, 3, 3}));
  try {
    conv2d(x, w, Var::constant(Tensor({2})), 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3x4x4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x4x3x3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, MatchesDirectSummation) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int stride = 1 + static_cast<int>(rng.index(2)), pad = static_cast<int>(rng.index(2));
    Tensor x({1, 2, 5, 6}), w({3, 2, 3, 3}), b({3});
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b.data()) v = static_cast<float>(rng.uniform(-1, 1));
    const auto y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b), stride, pad).value();
    for (int o = 0; o < 3; ++o) {
      for (int oy = 0; oy < y.dim(2); ++oy) {
        for (int ox = 0; ox < y.dim(3); ++ox) {
          double acc = b[static_cast<std::size_t>(o)];
          for (int c = 0; c < 2; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || ix < 0 || iy >= 5 || ix >= 6) continue;
                acc += static_cast<double>(x.at(0, c, iy, ix)) * w.at(o, c, ky, kx);
              }
            }
          }
          EXPECT_NEAR(y.at(0, o, oy, ox), acc, 1e-5);
        }
      }
    }
  }
}

TEST(Conv2d, ThreadCountDoesNotChangeResults) {
  Rng rng(2);
  Tensor x({2, 4, 9, 9}), w({5, 4, 3, 3});
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-1, 1));
  set_threads(1);
  const auto a = conv2d(Var::constant(x), Var::constant(w), Var::constant(Tensor({5})), 1, 1).value();
  set_threads(3);
  const auto b = conv2d(Var::constant(x), Var::constant(w), Var::constant(Tensor({5})), 1, 1).value();
  set_threads(1);
  EXPECT_EQ(a, b);
}

TEST(Relu, ClampsNegatives) {
  auto y = relu(cvar({3}, {-1, 0, 2}));
  EXPECT_EQ(y.value(), Tensor::from({3}, {0, 0, 2}));
}

TEST(Maxpool, HandExample) {
  auto y = maxpool2d(cvar({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value().item(), 4.f);
}

TEST(Maxpool, ConstantFieldStaysConstant) {
  auto y = maxpool2d(Var::constant(Tensor({1, 2, 6, 6}, 2.5f)), 3, 2);
  for (float v : y.value().data()) EXPECT_EQ(v, 2.5f);
}

TEST(Maxpool, WindowLargerThanMapRejected) {
  EXPECT_THROW(maxpool2d(Var::constant(Tensor({1, 1, 2, 3})), 3, 1), ShapeError);
}

TEST(BilinearResize, SameSizeIsIdentity) {
  Rng rng(1);
  Tensor x({1, 2, 4, 5});
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(bilinear_resize(Var::constant(x), 4, 5).value(), x);
}

TEST(BilinearResize, ConstantFieldPreserved) {
  for (auto [th, tw] : {std::pair{1, 1}, {3, 7}, {64, 64}, {2, 9}}) {
    auto y = bilinear_resize(Var::constant(Tensor({1, 1, 3, 4}, 0.3f)), th, tw);
    for (float v : y.value().data()) EXPECT_EQ(v, 0.3f);
  }
}

TEST(BilinearResize, CenterOfTwoByTwoIsCornerMean) {
  auto y = bilinear_resize(cvar({1, 1, 2, 2}, {1, 3, 5, 7}), 3, 3).value();
  EXPECT_FLOAT_EQ(y.at(0, 0, 1, 1), 4.0f);
}

TEST(BilinearResize, CornersReproducedExactly) {
  Rng rng(4);
  Tensor x({1, 1, 5, 3});
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-5, 5));
  auto y = bilinear_resize(Var::constant(x), 17, 11).value();
  EXPECT_EQ(y.at(0, 0, 0, 0), x.at(0, 0, 0, 0));
  EXPECT_EQ(y.at(0, 0, 0, 10), x.at(0, 0, 0, 2));
  EXPECT_EQ(y.at(0, 0, 16, 0), x.at(0, 0, 4, 0));
  EXPECT_EQ(y.at(0, 0, 16, 10), x.at(0, 0, 4, 2));
}

TEST(BilinearResize, SinglePixelAxisBroadcasts) {
  auto y = bilinear_resize(cvar({1, 1, 1, 2}, {2, 4}), 3, 3).value();
  for (int r = 0; r < 3; ++r) {
    EXPECT_FLOAT_EQ(y.at(0, 0, r, 0), 2.f);
    EXPECT_FLOAT_EQ(y.at(0, 0, r, 1), 3.f);
    EXPECT_FLOAT_EQ(y.at(0, 0, r, 2), 4.f);
  }
}

TEST(ConcatChannels, SingleInputIsIdentity) {
  auto x = cvar({1, 2, 1, 2}, {1, 2, 3, 4});
  EXPECT_EQ(concat_channels<float>({x}).value(), x.value());
}

TEST(ConcatChannels, ChannelCountsAdd) {
  auto make = [](const std::vector<int>& chans) {
    std::vector<Var> in;
    for (int c : chans) in.push_back(Var::constant(Tensor({1, c, 2, 2})));
    return concat_channels<float>(in).shape()[1];
  };
  EXPECT_EQ(make({96, 256, 384, 384, 256}), 1376);
  EXPECT_EQ(make({8, 16, 32}), 56);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> chans(1 + rng.index(6));
    int total = 0;
    for (auto& c : chans) total += (c = 1 + static_cast<int>(rng.index(9)));
    EXPECT_EQ(make(chans), total);
  }
}

TEST(ConcatChannels, OrderFollowsInputList) {
  auto y = concat_channels<float>({cvar({1, 1, 1, 1}, {1}), cvar({1, 2, 1, 1}, {2, 3})}).value();
  EXPECT_EQ(y, Tensor::from({1, 3, 1, 1}, {1, 2, 3}));
}

TEST(ConcatChannels, SpatialMismatchRejected) {
  EXPECT_THROW(concat_channels<float>({Var::constant(Tensor({1, 1, 2, 2})), Var::constant(Tensor({1, 1, 2, 3}))}),
               ShapeError);
}

TEST(Backward, SumGivesOnes) {
  auto w = Var::parameter(Tensor::from({3}, {4, -1, 2}));
  backward(sum(w));
  EXPECT_EQ(w.grad(), Tensor::from({3}, {1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  auto w = Var::parameter(Tensor::from({2}, {1, 2}));
  backward(sum(square(w)));
  EXPECT_EQ(w.grad(), Tensor::from({2}, {2, 4}));
  EXPECT_EQ(w.grad().shape(), w.value().shape());
}

TEST(Backward, NonScalarRootRejected) {
  auto w = Var::parameter(Tensor({2}));
  EXPECT_THROW(backward(relu(w)), ShapeError);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  auto w = Var::parameter(Tensor::from({1}, {3}));
  auto y = mul(w, w);
  backward(sum(add(y, y)));  // 2 w^2
  EXPECT_FLOAT_EQ(w.grad()[0], 12.f);
}

TEST(Backward, ConstantsBuildNoTape) {
  auto y = relu(conv2d(Var::constant(Tensor({1, 1, 3, 3}, 1.f)), Var::constant(Tensor({1, 1, 1, 1}, 1.f)),
                       Var::constant(Tensor({1})), 1, 0));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.record()->parents.empty());
}

// Every differentiable operation against central finite differences.
TEST(GradientCheck, EveryOperationMatchesFiniteDifferences) {
  std::uint64_t seed = 100;
  for (const auto& c : testing::gradient_cases()) {
    const auto r = testing::run_grad_case(c, 20, seed++);
    EXPECT_EQ(r.instances, 20) << c.name;
    EXPECT_LT(r.max_rel_error, 1e-3) << c.name;
  }
}

TEST(GradientCheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims x.
  testing::GradCase broken{"broken", [](Rng& rng) {
    auto x = testing::DVar::parameter(testing::random_tensor({4}, rng, 0.5, 1.0));
    return testing::GradInstance{{x}, [x] {
      auto xr = x.record();
      BasicTensor<double> y(x.shape());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.value()[i] * x.value()[i];
      auto out = make_op<double>("broken", y, {x}, [xr](const BasicTensor<double>& dy) {
        auto& d = xr->grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * xr->value[i];
      });
      return sum(out);
    }};
  }};
  EXPECT_GT(testing::run_grad_case(broken, 3, 1).max_rel_error, 0.1);
}

TEST(TensorIo, RoundTripIsExact) {
  Rng rng(9);
  Tensor t({2, 3, 4});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  std::stringstream ss;
  write_tensor(ss, t);
  EXPECT_EQ(read_tensor(ss), t);
}

TEST(TensorIo, LittleEndianLayout) {
  std::stringstream ss;
  write_tensor(ss, Tensor::from({1}, {1.0f}));
  const std::string b = ss.str();
  ASSERT_EQ(b.size(), 4u + 4u + 4u + 4u);
  EXPECT_EQ(b.substr(0, 4), "SCTN");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);  // rank
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1u);  // dim 0
  // 1.0f = 0x3F800000, least significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 0x00u);
  EXPECT_EQ(static_cast<unsigned char>(b[15]), 0x3Fu);
}

TEST(TensorIo, BadMagicAndTruncationRejected) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_tensor(bad), DataError);
  std::stringstream ss;
  write_tensor(ss, Tensor({4, 4}));
  std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 3));
  EXPECT_THROW(read_tensor(cut), DataError);
}

}  // namespace
}  // namespace semcorr
