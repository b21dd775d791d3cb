#include <gtest/gtest.h>

#include <vector>

#include "geolab/errors.hpp"
#include "geolab/geometry.hpp"
#include "oracles.hpp"

using namespace geolab;

TEST(Direction, Examples) {
  EXPECT_EQ(direction({0, 0, 10, 10}, {20, 0, 30, 10}), Direction::Right);
  EXPECT_EQ(direction({0, 0, 10, 10}, {0, 0, 10, 10}), Direction::Overlap);
  EXPECT_EQ(direction({0, 0, 10, 10}, {40, 40, 50, 50}), Direction::BottomRight);
  EXPECT_EQ(direction({20, 0, 30, 10}, {0, 0, 10, 10}), Direction::Left);
  EXPECT_EQ(direction({0, 20, 10, 30}, {0, 0, 10, 10}), Direction::Top);
}

TEST(Direction, TouchingEdgesAreNotOverlap) {
  EXPECT_FALSE(overlaps({0, 0, 10, 10}, {10, 0, 20, 10}));
  EXPECT_EQ(direction({0, 0, 10, 10}, {10, 0, 20, 10}), Direction::Right);
  EXPECT_FALSE(overlaps({0, 0, 10, 10}, {10, 10, 20, 20}));
}

TEST(Direction, AntiphaseIsInvolution) {
  for (std::size_t k = 0; k < kNumDirections; ++k) {
    const auto d = static_cast<Direction>(k);
    EXPECT_EQ(antiphase(antiphase(d)), d);
  }
  EXPECT_EQ(antiphase(Direction::Right), Direction::Left);
  EXPECT_EQ(antiphase(Direction::TopRight), Direction::BottomLeft);
  EXPECT_EQ(antiphase(Direction::Overlap), Direction::Overlap);
}

TEST(Direction, MatchesSectorOracleAndSwapsToAntiphase) {
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const BBox a = oracle::random_box(rng), b = oracle::random_box(rng);
    const Direction d = direction(a, b);
    ASSERT_EQ(static_cast<int>(d), oracle::direction(a, b));
    ASSERT_EQ(direction(b, a), antiphase(d));
  }
}

TEST(MinDistance, Examples) {
  EXPECT_DOUBLE_EQ(min_distance({0, 0, 10, 10}, {20, 0, 30, 10}), 10.0);
  EXPECT_DOUBLE_EQ(min_distance({0, 0, 10, 10}, {5, 5, 15, 15}), 0.0);
  EXPECT_DOUBLE_EQ(min_distance({0, 0, 10, 10}, {13, 14, 20, 20}), 5.0);
}

TEST(MinDistance, MatchesBoundarySamplingOracle) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const BBox a = oracle::random_box(rng), b = oracle::random_box(rng);
    const double d = min_distance(a, b);
    ASSERT_NEAR(d, oracle::min_distance(a, b), 1e-3);
    ASSERT_DOUBLE_EQ(d, min_distance(b, a));
    ASSERT_GE(d, 0.0);
  }
}

TEST(MinDistance, TranslationInvariant) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const BBox a = oracle::random_box(rng), b = oracle::random_box(rng);
    EXPECT_NEAR(min_distance(a, b), min_distance(a.translated(7, 3), b.translated(7, 3)), 1e-9);
  }
}

TEST(Nearest, Examples) {
  const std::vector<BBox> boxes{{100, 100, 110, 110}, {125, 100, 135, 110}, {120, 100, 130, 110}};
  const NearestMap m = nearest_in_direction(0, boxes);
  ASSERT_TRUE(m[0].has_value());
  EXPECT_EQ(*m[0], 2u);
  EXPECT_FALSE(m[static_cast<int>(Direction::Top)].has_value());
  EXPECT_FALSE(m[static_cast<int>(Direction::Left)].has_value());

  const std::vector<BBox> tie{{100, 100, 110, 110}, {120, 100, 130, 110}, {120, 100, 130, 110}};
  EXPECT_EQ(*nearest_in_direction(0, tie)[0], 1u);
}

TEST(Nearest, AgreesWithBruteForce) {
  Rng rng(14);
  std::vector<BBox> boxes;
  for (int i = 0; i < 40; ++i) boxes.push_back(oracle::random_box(rng));
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    const NearestMap m = nearest_in_direction(a, boxes);
    for (int d = 0; d < 8; ++d) {
      std::optional<std::size_t> best;
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (j == a || oracle::direction(boxes[a], boxes[j]) != d) continue;
        if (!best || oracle::min_distance(boxes[a], boxes[j]) < oracle::min_distance(boxes[a], boxes[*best]) - 1e-6) best = j;
      }
      ASSERT_EQ(m[d], best) << "anchor " << a << " dir " << d;
    }
  }
}

TEST(Collinearity, Examples) {
  EXPECT_EQ(collinearity({0, 0, 10, 10}, {20, 0, 30, 10}, {40, 0, 50, 10}), CollinearClass::Horizontal);
  EXPECT_EQ(collinearity({0, 0, 10, 10}, {20, 20, 30, 30}, {40, 40, 50, 50}), CollinearClass::Backslash);
  EXPECT_EQ(collinearity({0, 40, 10, 50}, {20, 20, 30, 30}, {40, 0, 50, 10}), CollinearClass::ForwardSlash);
  EXPECT_EQ(collinearity({0, 0, 10, 10}, {0, 30, 14, 40}, {0, 60, 12, 70}), CollinearClass::Vertical);
  EXPECT_EQ(collinearity({0, 0, 10, 10}, {40, 0, 50, 10}, {40, 40, 50, 50}), CollinearClass::None);
  EXPECT_EQ(collinearity({0, 0, 10, 10}, {5, 5, 15, 15}, {40, 0, 50, 10}), CollinearClass::None);
}

TEST(Collinearity, MatchesOracleUnderPermutation) {
  Rng rng(15);
  for (int i = 0; i < 3000; ++i) {
    auto t = oracle::random_triplet(rng);
    const CollinearClass c = collinearity(t[0], t[1], t[2]);
    ASSERT_EQ(static_cast<int>(c), oracle::collinearity(t[0], t[1], t[2]));
    ASSERT_EQ(collinearity(t[2], t[0], t[1]), c);
    ASSERT_EQ(collinearity(t[1], t[0], t[2]), c);
  }
}

TEST(BBox, Validation) {
  EXPECT_NO_THROW(validate(BBox{0, 0, 1, 1}));
  EXPECT_THROW(validate(BBox{5, 0, 1, 1}), InvalidInputError);
  EXPECT_THROW(validate(BBox{0, 0, 0, 1}), InvalidInputError);
  EXPECT_THROW(validate(BBox{-1, 0, 1, 1}), InvalidInputError);
  EXPECT_THROW(validate(BBox{0, 0, 1, std::nan("")}), InvalidInputError);
  EXPECT_EQ(hull({0, 0, 1, 1}, {5, 5, 6, 7}), (BBox{0, 0, 6, 7}));
}
