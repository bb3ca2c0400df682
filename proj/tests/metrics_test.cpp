#include <cmath>

#include <json.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "umcam/error.hpp"
#include "umcam/metrics.hpp"

using namespace umcam;
using namespace umcam::metrics;

TEST(Dsc, BasicCases) {
  const auto a = BinaryMask::from_rows({{1, 1, 0}});
  EXPECT_EQ(dsc(a, a), 1.0);
  EXPECT_EQ(dsc(a, BinaryMask::from_rows({{0, 0, 1}})), 0.0);
  EXPECT_EQ(dsc(a, BinaryMask::from_rows({{0, 1, 1}})), 0.5);
  EXPECT_EQ(dsc(BinaryMask(2, 2), BinaryMask(2, 2)), 1.0);
  EXPECT_EQ(dsc(a, BinaryMask(1, 3)), 0.0);
  EXPECT_THROW(dsc(a, BinaryMask(3, 1)), ContractError);
}

TEST(Dsc, MatchesCountingOracle) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 100; ++t) {
    const int h = 1 + t % 32, w = 1 + (t * 5) % 32;
    const auto a = oracle::random_mask(rng, h, w, 0.4), b = oracle::random_mask(rng, h, w, 0.4);
    ASSERT_EQ(dsc(a, b), oracle::dsc(a, b));
  }
}

TEST(Hd95, BasicCases) {
  BinaryMask a(1, 8), b(1, 8);
  a.set(0, 1, true);
  b.set(0, 4, true);
  EXPECT_EQ(*hd95(a, b), 3.0);
  EXPECT_EQ(*hd95(a, a), 0.0);
  EXPECT_FALSE(hd95(a, BinaryMask(1, 8)).has_value());
  EXPECT_FALSE(hd95(BinaryMask(1, 8), BinaryMask(1, 8)).has_value());
}

TEST(Hd95, AnisotropicSpacing) {
  BinaryMask a(8, 8), b(8, 8);
  a.set(1, 1, true);
  b.set(4, 1, true);
  EXPECT_NEAR(*hd95(a, b, {2.0, 1.0}), 6.0, 1e-12);
}

TEST(Hd95, MatchesBruteForceOracle) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 100; ++t) {
    const int h = 2 + t % 31, w = 2 + (t * 7) % 31;
    const auto a = t % 3 == 0 ? oracle::random_mask(rng, h, w, 0.3) : oracle::random_blob(rng, h, w);
    const auto b = t % 3 == 0 ? oracle::random_mask(rng, h, w, 0.3) : oracle::random_blob(rng, h, w);
    if (a.empty() || b.empty()) continue;
    const Spacing2D sp{1.0 + (t % 3) * 0.5, 1.0};
    ASSERT_NEAR(*hd95(a, b, sp), oracle::hd95(a, b, sp.row, sp.col), 1e-9) << "t=" << t;
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(percentile({3.0}, 95), 3.0);
  EXPECT_NEAR(percentile({0, 10}, 95), 9.5, 1e-12);
  EXPECT_NEAR(percentile({4, 1, 3, 2}, 50), 2.5, 1e-12);
  EXPECT_THROW(percentile({}, 95), ContractError);
}

TEST(Volume, DscMatchesVoxelCount) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 20; ++t) {
    std::vector<BinaryMask> p, q;
    long both = 0, np = 0, nq = 0;
    for (int s = 0; s < 5; ++s) {
      p.push_back(oracle::random_mask(rng, 9, 7, 0.3));
      q.push_back(oracle::random_mask(rng, 9, 7, 0.3));
      for (std::size_t i = 0; i < p.back().size(); ++i) {
        np += p.back().values()[i];
        nq += q.back().values()[i];
        both += p.back().values()[i] && q.back().values()[i];
      }
    }
    ASSERT_EQ(dsc(MaskVolume(p), MaskVolume(q)), 2.0 * both / static_cast<double>(np + nq));
  }
}

TEST(Volume, InconsistentShapesRejected) {
  std::vector<BinaryMask> s{BinaryMask(2, 2), BinaryMask(2, 3)};
  EXPECT_THROW(MaskVolume{s}, ContractError);
}

TEST(Volume, SliceSpacingScalesDistance) {
  std::vector<BinaryMask> p(3, BinaryMask(4, 4)), q(3, BinaryMask(4, 4));
  p[0].set(1, 1, true);
  q[2].set(1, 1, true);
  EXPECT_NEAR(*hd95(MaskVolume(p), MaskVolume(q)), 14.0, 1e-12);
  EXPECT_NEAR(*hd95(MaskVolume(p), MaskVolume(q), {1.0, 1.0, 1.0}), 2.0, 1e-12);
}

TEST(Volume, PerfectVolume) {
  std::mt19937_64 rng(44);
  std::vector<CohortItem> items;
  for (int s = 0; s < 4; ++s) {
    const auto m = oracle::random_blob(rng, 12, 12);
    items.push_back({"s" + std::to_string(s), "v0", m, m});
  }
  const auto r = evaluate_cohort(items, EvalMode::per_volume_3d);
  ASSERT_EQ(r.units.size(), 1u);
  EXPECT_EQ(r.units[0].unit_id, "v0");
  EXPECT_EQ(r.units[0].dsc, 1.0);
  EXPECT_EQ(*r.units[0].hd95, 0.0);
}

TEST(Cohort, AggregationIdentity) {
  EvalReport r;
  r.units = {{"a", 1.0, 2.0}, {"b", 0.0, std::nullopt}, {"c", 0.5, 4.0}};
  aggregate(r);
  EXPECT_NEAR(r.mean_dsc, 0.5, 1e-15);
  EXPECT_NEAR(r.std_dsc, std::sqrt((0.25 + 0.25 + 0.0) / 3.0), 1e-15);
  EXPECT_EQ(*r.mean_hd95, 3.0);
  EXPECT_EQ(*r.std_hd95, 1.0);

  r.units = {{"a", 1.0, std::nullopt}, {"b", 0.0, std::nullopt}};
  aggregate(r);
  EXPECT_EQ(r.mean_dsc, 0.5);
  EXPECT_FALSE(r.mean_hd95.has_value());
}

TEST(Cohort, VolumesGroupInFirstSeenOrder) {
  const auto on = BinaryMask::from_rows({{1, 0}}), off = BinaryMask(1, 2);
  std::vector<CohortItem> items{{"a", "v1", on, on}, {"b", "v0", off, on}, {"c", "v1", on, on}};
  const auto r = evaluate_cohort(items, EvalMode::per_volume_3d);
  ASSERT_EQ(r.units.size(), 2u);
  EXPECT_EQ(r.units[0].unit_id, "v1");
  EXPECT_EQ(r.units[1].unit_id, "v0");
  EXPECT_EQ(r.units[1].dsc, 0.0);
  EXPECT_FALSE(r.units[1].hd95.has_value());
  EXPECT_EQ(r.mean_dsc, 0.5);
  EXPECT_THROW(evaluate_cohort({}, EvalMode::per_slice_2d), ContractError);
}

TEST(Cohort, JsonAndTable) {
  EvalReport r;
  r.units = {{"a", 1.0, 2.0}, {"b", 0.0, std::nullopt}};
  aggregate(r);
  const auto doc = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(doc["per_unit"][1]["hd95"], "undefined");
  EXPECT_EQ(doc["per_unit"][0]["dsc"], 1.0);
  EXPECT_EQ(doc["mean_dsc"], 0.5);
  const auto table = report_to_table(r);
  EXPECT_NE(table.find("100.00"), std::string::npos);
  EXPECT_NE(table.find("50.00±50.00"), std::string::npos) << table;
}
