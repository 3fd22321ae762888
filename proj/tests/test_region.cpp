#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "semcorr/semcorr.hpp"

namespace semcorr {
namespace {

ObjectMask random_mask(int w, int h, double density, Rng& rng) {
  ObjectMask m(w, h, "obj");
  for (auto& b : m.bits) b = rng.bernoulli(density) ? 1 : 0;
  return m;
}

// Brute-force Euclidean dilation.
ObjectMask dilate_oracle(const ObjectMask& m, int r) {
  ObjectMask out(m.width, m.height, m.label);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      for (int v = 0; v < m.height && !out.at(x, y); ++v) {
        for (int u = 0; u < m.width; ++u) {
          if (m.at(u, v) && (u - x) * (u - x) + (v - y) * (v - y) <= r * r) {
            out.set(x, y);
            break;
          }
        }
      }
    }
  }
  return out;
}

bool subset(const ObjectMask& a, const ObjectMask& b) {
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i] && !b.bits[i]) return false;
  }
  return true;
}

TEST(Dilate, RadiusZeroIsIdentity) {
  Rng rng(1);
  const auto m = random_mask(9, 7, 0.3, rng);
  EXPECT_EQ(dilate_mask(m, 0), m);
}

TEST(Dilate, CentrePixelRadiusOneIsPlusShape) {
  ObjectMask m(5, 5);
  m.set(2, 2);
  const auto d = dilate_mask(m, 1);
  EXPECT_EQ(d.area(), 5u);
  for (auto p : {Pixel{2, 2}, Pixel{1, 2}, Pixel{3, 2}, Pixel{2, 1}, Pixel{2, 3}}) EXPECT_TRUE(d.at(p));
  EXPECT_FALSE(d.at(Pixel{1, 1}));
}

TEST(Dilate, FullMaskSaturates) {
  ObjectMask m(6, 4);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  for (int r : {1, 2, 4}) EXPECT_EQ(dilate_mask(m, r), m);
}

TEST(Dilate, MatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 3 + static_cast<int>(rng.index(14)), h = 3 + static_cast<int>(rng.index(14));
    const auto m = random_mask(w, h, rng.uniform(0.0, 0.1), rng);
    const int r = static_cast<int>(rng.index(static_cast<std::size_t>(std::min(w, h)) + 1));
    ASSERT_EQ(dilate_mask(m, r), dilate_oracle(m, r)) << "w=" << w << " h=" << h << " r=" << r;
  }
}

TEST(Dilate, MonotoneInRadius) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_mask(20, 16, 0.03, rng);
    ObjectMask prev = m;
    for (int r = 0; r <= 16; ++r) {
      const auto d = dilate_mask(m, r);
      ASSERT_TRUE(subset(prev, d));
      prev = d;
    }
  }
}

TEST(Dilate, RejectsBadRadius) {
  ObjectMask m(8, 5);
  EXPECT_THROW(dilate_mask(m, 6), UsageError);
  EXPECT_THROW(dilate_mask(m, -1), UsageError);
  EXPECT_NO_THROW(dilate_mask(m, 5));
}

TEST(CandidateSet, FullMaskGivesAllPixels) {
  ObjectMask m(7, 5);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  EXPECT_EQ(candidate_set(m, 2).size(), 35u);
}

TEST(CandidateSet, SquareMaskAtRadiusZero) {
  ObjectMask m(10, 10);
  for (auto p : {Pixel{4, 4}, Pixel{5, 4}, Pixel{4, 5}, Pixel{5, 5}}) m.set(p.x, p.y);
  const auto set = candidate_set(m, 0);
  EXPECT_EQ(set.points, (std::vector<Pixel>{{4, 4}, {5, 4}, {4, 5}, {5, 5}}));
  EXPECT_EQ(set.radius, 0);
}

TEST(CandidateSet, SortedUniqueAndStrictlySmallerWithBackground) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 12, h = 10;
    auto m = random_mask(w, h, 0.05, rng);
    m.set(static_cast<int>(rng.index(w)), static_cast<int>(rng.index(h)));
    const int r = static_cast<int>(rng.index(4));
    const auto set = candidate_set(m, r);
    const auto dilated = dilate_oracle(m, r);
    ASSERT_TRUE(std::is_sorted(set.points.begin(), set.points.end()));
    ASSERT_EQ(std::adjacent_find(set.points.begin(), set.points.end()), set.points.end());
    ASSERT_EQ(set.size(), dilated.area());
    for (auto p : set.points) ASSERT_TRUE(dilated.at(p));
    if (dilated.area() < static_cast<std::size_t>(w * h)) {
      EXPECT_LT(set.size(), static_cast<std::size_t>(w * h));
    }
  }
}

TEST(CandidateSet, SizeNonDecreasingInRadius) {
  Rng rng(5);
  auto m = random_mask(16, 16, 0.02, rng);
  m.set(3, 3);
  std::size_t prev = 0;
  for (int r = 0; r <= 16; ++r) {
    const auto n = candidate_set(m, r).size();
    EXPECT_GE(n, prev);
    EXPECT_LE(n, 256u);
    prev = n;
  }
}

TEST(CandidateSet, EmptyMaskRejectedWithDiagnostic) {
  ObjectMask m(6, 6, "cat");
  try {
    candidate_set(m, 2);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'cat'"), std::string::npos);
  }
}

TEST(CandidateSet, ExcludeRadiusDropsNeighbourhood) {
  const auto set = exclude_radius(full_image_candidates(9, 9), {4, 4}, 2.0);
  EXPECT_EQ(set.size(), 81u - 13u);  // 13 lattice points within distance 2
  EXPECT_FALSE(set.contains({4, 6}));
  EXPECT_TRUE(set.contains({5, 6}));
  EXPECT_TRUE(std::is_sorted(set.points.begin(), set.points.end()));
}

TEST(CandidateSet, DefaultDilationRadius) {
  EXPECT_EQ(default_dilation_radius(64, 64), 4);
  EXPECT_EQ(default_dilation_radius(100, 20), 5);
  EXPECT_EQ(default_dilation_radius(227, 227), 12);
}

TEST(SelectTargetMask, LargestAreaWithMatchingLabel) {
  std::vector<ObjectMask> masks{ObjectMask(4, 4, "dog"), ObjectMask(4, 4, "cat"), ObjectMask(4, 4, "cat"),
                                ObjectMask(4, 4, "cat")};
  masks[0].set(0, 0);
  masks[0].set(1, 0);
  masks[0].set(2, 0);
  masks[1].set(0, 0);
  masks[2].set(0, 0);
  masks[2].set(1, 1);
  masks[3].set(3, 3);
  masks[3].set(2, 2);
  EXPECT_EQ(select_target_mask(masks, "cat"), std::optional<std::size_t>(2));  // first of the tied largest
  EXPECT_EQ(select_target_mask(masks, "dog"), std::optional<std::size_t>(0));
  EXPECT_FALSE(select_target_mask(masks, "bird").has_value());
}

TEST(MaskIo, NonzeroIsForegroundAndRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "semcorr_region_test";
  std::filesystem::create_directories(dir);
  const auto pgm = (dir / "m.pgm").string();
  {
    std::ofstream os(pgm, std::ios::binary);
    os << "P5\n3 2\n255\n";
    const unsigned char px[] = {0, 7, 255, 0, 0, 1};
    os.write(reinterpret_cast<const char*>(px), 6);
  }
  const auto m = load_mask(pgm, "x");
  EXPECT_EQ(m.source, MaskSource::kFile);
  EXPECT_EQ(m.bits, (std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1}));
  const auto png = (dir / "m.png").string();
  save_mask(png, m);
  EXPECT_EQ(load_mask(png), m);
  EXPECT_THROW(load_mask((dir / "missing.png").string()), DataError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace semcorr
