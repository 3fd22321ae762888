#include <gtest/gtest.h>

#include <cmath>

#include "semcorr/semcorr.hpp"

namespace semcorr {
namespace {

using DT = BasicTensor<double>;
using DField = BasicDescriptorField<double>;

DT random_map(int c, int h, int w, Rng& rng) {
  DT t({1, c, h, w});
  for (auto& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

// Corner-aligned bilinear sample of channel c at output pixel (x, y).
double bilinear_oracle(const DT& m, int c, int out_h, int out_w, int x, int y) {
  const int h = m.dim(2), w = m.dim(3);
  const double sy = out_h > 1 ? y * double(h - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? x * double(w - 1) / (out_w - 1) : 0.0;
  const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1), x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * m.at(0, c, y0, x0) + fx * m.at(0, c, y0, x1)) +
         fy * ((1 - fx) * m.at(0, c, y1, x0) + fx * m.at(0, c, y1, x1));
}

TEST(Hypercolumn, ReferenceConfigGives1376Channels) {
  const auto net = Backbone::init(BackboneConfig::reference(), 2, 3);
  Rng rng(1);
  Tensor image({1, 3, 227, 227});
  for (auto& v : image.data()) v = static_cast<float>(rng.uniform());
  const auto field = extract_hypercolumns(net.forward(image), 227, 227);
  EXPECT_EQ(field.channels(), 1376);
  EXPECT_EQ(field.height(), 227);
  EXPECT_EQ(field.width(), 227);
}

TEST(Hypercolumn, DeskConfigGives56Channels) {
  const auto net = Backbone::init(BackboneConfig::desk(), 2, 3);
  const auto field = extract_hypercolumns(net.forward(Tensor({1, 3, 64, 64}, 0.3f)), 64, 64);
  EXPECT_EQ(field.channels(), 56);
  EXPECT_EQ(field.data.shape(), (Shape{1, 56, 64, 64}));
}

TEST(Hypercolumn, SingleLayerAtImageResolutionIsIdentity) {
  Rng rng(2);
  BasicFeatureStack<double> stack{{random_map(3, 5, 7, rng)}};
  const auto field = extract_hypercolumns(stack, 5, 7, HypercolumnOptions{false});
  EXPECT_EQ(field.data, stack.maps[0]);
  const auto corner = field.descriptor_at({6, 4});
  for (int c = 0; c < 3; ++c) EXPECT_EQ(corner[static_cast<std::size_t>(c)], stack.maps[0].at(0, c, 4, 6));
}

TEST(Hypercolumn, ConstantStackGivesIdenticalDescriptors) {
  BasicFeatureStack<double> stack{{DT({1, 2, 3, 3}, 1.5), DT({1, 1, 2, 2}, -0.25)}};
  const auto field = extract_hypercolumns(stack, 9, 6, HypercolumnOptions{false});
  const auto ref = field.descriptor_at({0, 0});
  EXPECT_EQ(ref, (std::vector<double>{1.5, 1.5, -0.25}));
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 6; ++x) {
      const auto d = field.descriptor_at({x, y});
      for (std::size_t c = 0; c < d.size(); ++c) EXPECT_NEAR(d[c], ref[c], 1e-12);
    }
  }
}

TEST(Hypercolumn, MatchesPointwiseBilinearOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int out_h = 4 + static_cast<int>(rng.index(20)), out_w = 4 + static_cast<int>(rng.index(20));
    BasicFeatureStack<double> stack;
    const int layers = 1 + static_cast<int>(rng.index(4));
    for (int l = 0; l < layers; ++l) {
      stack.maps.push_back(random_map(1 + static_cast<int>(rng.index(3)), 1 + static_cast<int>(rng.index(out_h)),
                                      1 + static_cast<int>(rng.index(out_w)), rng));
    }
    const auto field = extract_hypercolumns(stack, out_h, out_w, HypercolumnOptions{false});
    for (int probe = 0; probe < 10; ++probe) {
      const int x = static_cast<int>(rng.index(out_w)), y = static_cast<int>(rng.index(out_h));
      std::vector<double> expect;
      for (const auto& m : stack.maps) {
        for (int c = 0; c < m.dim(1); ++c) expect.push_back(bilinear_oracle(m, c, out_h, out_w, x, y));
      }
      const auto got = field.descriptor_at({x, y});
      ASSERT_EQ(got.size(), expect.size());
      for (std::size_t c = 0; c < got.size(); ++c) EXPECT_NEAR(got[c], expect[c], 1e-12);
    }
  }
}

TEST(Hypercolumn, ChannelCountIsSumOverRandomConfigs) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    BasicFeatureStack<double> stack;
    int total = 0;
    for (int l = 0, n = 1 + static_cast<int>(rng.index(5)); l < n; ++l) {
      const int c = 1 + static_cast<int>(rng.index(6));
      total += c;
      stack.maps.push_back(DT({1, c, 1 + static_cast<int>(rng.index(4)), 1 + static_cast<int>(rng.index(4))}));
    }
    EXPECT_EQ(extract_hypercolumns(stack, 6, 5).channels(), total);
  }
}

TEST(Hypercolumn, StandardizationGivesZeroMeanUnitVariance) {
  Rng rng(6);
  BasicFeatureStack<double> stack{{random_map(2, 4, 4, rng), DT({1, 1, 2, 2}, 3.0)}};
  const auto field = extract_hypercolumns(stack, 8, 8);
  for (int c = 0; c < 2; ++c) {
    double mean = 0, sq = 0;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        mean += field.at(c, y, x);
        sq += field.at(c, y, x) * field.at(c, y, x);
      }
    }
    EXPECT_NEAR(mean / 64, 0.0, 1e-12);
    EXPECT_NEAR(sq / 64, 1.0, 1e-9);
  }
  for (int y = 0; y < 8; ++y) EXPECT_EQ(field.at(2, y, 3), 0.0);  // constant channel
}

TEST(Hypercolumn, RejectsBadInput) {
  EXPECT_THROW(extract_hypercolumns(BasicFeatureStack<double>{}, 4, 4), UsageError);
  BasicFeatureStack<double> stack{{DT({1, 2, 3, 3})}};
  EXPECT_THROW(extract_hypercolumns(stack, 0, 4), UsageError);
  const auto field = extract_hypercolumns(stack, 4, 5, HypercolumnOptions{false});
  EXPECT_THROW(field.descriptor_at({5, 0}), ShapeError);
  EXPECT_THROW(field.descriptor_at({0, -1}), ShapeError);
  EXPECT_THROW(field.descriptor_at({0, 4}), ShapeError);
}

TEST(Fuse, ChannelsAddUpWithHypercolumnFirst) {
  Rng rng(10);
  const DField hc(random_map(56, 8, 8, rng)), emb(random_map(16, 8, 8, rng));
  const auto fused = fuse(hc, emb);
  EXPECT_EQ(fused.channels(), 72);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      auto expect = hc.descriptor_at({x, y});
      const auto e = emb.descriptor_at({x, y});
      expect.insert(expect.end(), e.begin(), e.end());
      ASSERT_EQ(fused.descriptor_at({x, y}), expect);
    }
  }
}

TEST(Fuse, DisabledEmbeddingLeavesHypercolumnUnchanged) {
  Rng rng(11);
  const DField hc(random_map(5, 4, 6, rng));
  EXPECT_EQ(fuse(hc, DField{}).data, hc.data);
}

TEST(Fuse, RejectsMismatch) {
  Rng rng(12);
  EXPECT_THROW(fuse(DField(random_map(2, 4, 4, rng)), DField(random_map(2, 4, 5, rng))), ShapeError);
  EXPECT_THROW(fuse(DField{}, DField(random_map(2, 4, 4, rng))), UsageError);
}

}  // namespace
}  // namespace semcorr
