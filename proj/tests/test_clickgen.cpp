#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "test_util.hpp"
#include "weclick/clickgen.hpp"
#include "weclick/rng.hpp"

using namespace weclick;

namespace {

LabelMap from_rows(const std::vector<std::vector<int>>& rows) {
  LabelMap m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
  return m;
}

ClickConfig semantic_only(std::size_t min_area, std::uint64_t seed = 0) {
  ClickConfig cfg;
  cfg.min_area = min_area;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Components, UniformMaskIsOneComponent) {
  const auto comps = connected_components(LabelMap(4, 6, 2), {0, 1, 2});
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].area, 24u);
  EXPECT_EQ(comps[0].class_id, 2);
}

TEST(Components, DiagonalContactJoins) {
  const LabelMap m = from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  const auto comps = connected_components(m, {1});
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].area, 8u);
}

TEST(Components, VoidValuesIgnored) {
  const LabelMap m = from_rows({{1, 9}, {9, 1}});
  const auto comps = connected_components(m, {1});
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].area, 2u);
}

TEST(Components, MatchUnionFindOracle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const LabelMap m = test::random_label_map(s);
    const auto got = connected_components(m, {0, 1, 2});
    const auto expected = oracle::components(m.values, 16, 16, {0, 1, 2});
    ASSERT_EQ(got.size(), expected.size()) << "seed " << s;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].pixels, expected[i].pixels) << "seed " << s << " component " << i;
      EXPECT_EQ(got[i].area, got[i].pixels.size());
      EXPECT_EQ(got[i].class_id, expected[i].label);
    }
  }
}

TEST(Clicks, SquareCentroid) {
  LabelMap m(5, 5, 0);
  for (std::size_t r = 1; r <= 3; ++r)
    for (std::size_t c = 1; c <= 3; ++c) m.at(r, c) = 1;
  // Background (16 pixels) falls under the threshold; the square is an instance.
  ClickConfig cfg = semantic_only(17);
  cfg.instance_classes = {1};
  const ClickMap clicks = generate_clicks(m, &m, cfg);
  EXPECT_EQ(clicks.count(), 1u);
  EXPECT_EQ(clicks.labels.at(2, 2), 1);
}

TEST(Clicks, HollowShapeFallsBackInside) {
  // U shape: the centroid lands in the opening.
  const LabelMap m = from_rows({{1, 0, 0, 0, 1},
                                {1, 0, 0, 0, 1},
                                {1, 0, 0, 0, 1},
                                {1, 1, 1, 1, 1}});
  ClickConfig cfg = semantic_only(100);
  cfg.instance_classes = {1};
  LabelMap inst = m;
  const ClickMap a = generate_clicks(m, &inst, cfg);
  const ClickMap b = generate_clicks(m, &inst, cfg);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.count(), 1u);
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (a.mask[i]) EXPECT_EQ(m.values[i], 1);
  }
}

TEST(Clicks, AreaThresholdDropsSmallRegions) {
  const LabelMap m = from_rows({{0, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  EXPECT_EQ(generate_clicks(m, nullptr, semantic_only(2)).count(), 1u);
  const ClickMap only_bg = generate_clicks(m, nullptr, semantic_only(2));
  EXPECT_EQ(only_bg.labels.at(1, 1), kNoClick);
  EXPECT_THROW(generate_clicks(m, nullptr, semantic_only(100)), std::invalid_argument);
}

TEST(Clicks, OnePerObjectInsideWithLabel) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const LabelMap m = test::random_label_map(s);
    const ClickConfig cfg = semantic_only(4, s);
    const auto objects = click_objects(m, nullptr, cfg);
    if (objects.empty()) continue;
    const ClickMap clicks = generate_clicks(m, nullptr, cfg);
    EXPECT_EQ(clicks.count(), objects.size());
    for (const auto& obj : objects) {
      std::size_t inside = 0;
      for (std::size_t p : obj.pixels) {
        if (!clicks.mask[p]) continue;
        ++inside;
        EXPECT_EQ(clicks.labels.values[p], obj.class_id);
        EXPECT_EQ(m.values[p], obj.class_id);
      }
      EXPECT_EQ(inside, 1u) << "seed " << s;
    }
    EXPECT_EQ(click_stats(clicks, m).label_mismatches, 0u);
  }
}

TEST(Clicks, InstancesBypassAreaThreshold) {
  LabelMap m(6, 6, 0), inst(6, 6, 0);
  m.at(1, 1) = 2;
  inst.at(1, 1) = 1;
  m.at(4, 4) = 2;
  inst.at(4, 4) = 2;
  ClickConfig cfg = semantic_only(100);
  cfg.instance_classes = {2};
  EXPECT_THROW(generate_clicks(m, nullptr, cfg), std::invalid_argument);
  const ClickMap clicks = generate_clicks(m, &inst, cfg);
  EXPECT_EQ(clicks.count(), 2u);
  EXPECT_EQ(clicks.labels.at(1, 1), 2);
  EXPECT_EQ(clicks.labels.at(4, 4), 2);
}

TEST(Clicks, DeterministicUnderSeed) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const LabelMap m = test::random_label_map(s + 100);
    if (click_objects(m, nullptr, semantic_only(3, 7)).empty()) continue;
    EXPECT_EQ(generate_clicks(m, nullptr, semantic_only(3, 7)), generate_clicks(m, nullptr, semantic_only(3, 7)));
  }
}

TEST(ClickStatsTest, SingleClickFraction) {
  ClickMap clicks(32, 32);
  clicks.set(5, 5, 1);
  LabelMap m(32, 32, 1);
  const ClickStats st = click_stats(clicks, m);
  EXPECT_DOUBLE_EQ(st.annotated_fraction, 1.0 / 1024.0);
  EXPECT_EQ(st.total_clicks, 1u);
  EXPECT_EQ(st.label_mismatches, 0u);
}

TEST(ClickStatsTest, CountsMatchScan) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const LabelMap m = test::random_label_map(s + 200);
    Rng rng(s);
    ClickMap clicks(16, 16);
    for (int i = 0; i < 12; ++i) clicks.set(rng.below(16), rng.below(16), static_cast<int>(rng.below(3)));
    std::map<std::int32_t, std::size_t> per_class;
    std::size_t total = 0, mismatch = 0;
    for (std::size_t p = 0; p < 256; ++p) {
      if (!clicks.mask[p]) continue;
      ++total;
      ++per_class[clicks.labels.values[p]];
      mismatch += clicks.labels.values[p] != m.values[p];
    }
    const ClickStats st = click_stats(clicks, m);
    EXPECT_EQ(st.total_clicks, total);
    EXPECT_EQ(st.clicks_per_class, per_class);
    EXPECT_EQ(st.label_mismatches, mismatch);
    for (int c : st.classes_without_clicks) {
      EXPECT_EQ(per_class.count(c), 0u);
      EXPECT_NE(std::find(m.values.begin(), m.values.end(), c), m.values.end());
    }
  }
}
