#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "umcam/cam_fusion.hpp"
#include "umcam/error.hpp"
#include "umcam/kernels.hpp"

using namespace umcam;
using cam::FusionMode;

namespace {

cam::FusionConfig cfg(int max_block, FusionMode mode) {
  cam::FusionConfig c;
  c.max_block = max_block;
  c.mode = mode;
  return c;
}

// Normalised random map: values in [0, 1] with maximum exactly 1.
ScalarMap random_cam(std::mt19937_64& rng, int h, int w) { return cam::normalize_max(oracle::random_map(rng, h, w)); }

}  // namespace

TEST(GradCam, UnitGradientPassesFeaturesThrough) {
  const FeatureBlockExport e(0, 1, 2, 2, {1, 2, 3, 4}, {1, 1, 1, 1});
  EXPECT_EQ(cam::grad_cam(e), ScalarMap::from_rows({{1, 2}, {3, 4}}));
}

TEST(GradCam, NegativeCombinationIsClamped) {
  const FeatureBlockExport e(0, 1, 2, 2, {1, 2, 3, 4}, {-1, -1, -1, -1});
  EXPECT_EQ(cam::grad_cam(e), ScalarMap(2, 2));
}

TEST(GradCam, MatchesLoopOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto e = oracle::random_export(rng, 2 + i % 3, 4 + i % 5, 4 + i % 7);
    const auto got = cam::grad_cam(e);
    const auto want = oracle::grad_cam(e);
    for (std::size_t j = 0; j < got.size(); ++j) ASSERT_NEAR(got.values()[j], want.values()[j], 1e-12);
  }
}

TEST(GradCam, ScalarAndSimdTablesAgree) {
  const auto* simd = kernels::kernels_for(kernels::Isa::avx2);
  if (simd == nullptr) GTEST_SKIP();
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto e = oracle::random_export(rng, 4, 9, 13);
    const auto a = cam::grad_cam(e, kernels::scalar_kernels());
    const auto b = cam::grad_cam(e, *simd);
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a.values()[j], b.values()[j], 1e-12);
  }
}

TEST(Upsample, SameSizeIsIdentity) {
  std::mt19937_64 rng(1);
  const auto m = oracle::random_map(rng, 5, 7);
  EXPECT_EQ(cam::upsample_bilinear(m, 5, 7), m);
}

TEST(Upsample, ConstantStaysConstant) {
  const auto out = cam::upsample_bilinear(ScalarMap(3, 2, 0.3), 17, 9);
  for (double v : out.values()) EXPECT_EQ(v, 0.3);
}

TEST(Upsample, TwoByTwoToTwoByFour) {
  // Source column for target c is (c + 0.5) * 2 / 4 - 0.5 = {-0.25, 0.25, 0.75, 1.25}, clamped to [0, 1].
  const auto out = cam::upsample_bilinear(ScalarMap::from_rows({{0, 1}, {0, 1}}), 2, 4);
  EXPECT_EQ(out, ScalarMap::from_rows({{0, 0.25, 0.75, 1}, {0, 0.25, 0.75, 1}}));
}

TEST(Upsample, PowerOfTwoMatchesFormula) {
  std::mt19937_64 rng(2);
  const auto src = oracle::random_map(rng, 4, 4);
  const auto out = cam::upsample_bilinear(src, 16, 16);
  auto coord = [](int t) { return std::clamp((t + 0.5) * 4.0 / 16.0 - 0.5, 0.0, 3.0); };
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const double y = coord(r), x = coord(c);
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, 3), x1 = std::min(x0 + 1, 3);
      const double fy = y - y0, fx = x - x0;
      const double top = src(y0, x0) * (1 - fx) + src(y0, x1) * fx;
      const double bot = src(y1, x0) * (1 - fx) + src(y1, x1) * fx;
      ASSERT_NEAR(out(r, c), top * (1 - fy) + bot * fy, 1e-12);
    }
  }
}

TEST(Upsample, StaysWithinSourceRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto src = oracle::random_map(rng, 1 + i % 4, 2 + i % 3);
    const auto out = cam::upsample_bilinear(src, 11, 13);
    EXPECT_GE(out.min(), src.min());
    EXPECT_LE(out.max(), src.max());
  }
}

TEST(NormalizeMax, DividesByMaximum) {
  EXPECT_EQ(cam::normalize_max(ScalarMap::from_rows({{0, 2}, {4, 8}})),
            ScalarMap::from_rows({{0, 0.25}, {0.5, 1.0}}));
  EXPECT_EQ(cam::normalize_max(ScalarMap(3, 3)), ScalarMap(3, 3));
  EXPECT_THROW(cam::normalize_max(ScalarMap(1, 1, -1.0)), ContractError);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(cam::normalize_max(oracle::random_map(rng, 5, 5, 0, 9)).max(), 1.0);
}

TEST(EntropyWeight, KnownValues) {
  const auto w = cam::entropy_weight(ScalarMap::from_rows({{0.5, 0.0, 1.0, 0.25}}));
  EXPECT_EQ(w(0, 0), 0.0);
  EXPECT_EQ(w(0, 1), 1.0);
  EXPECT_EQ(w(0, 2), 1.0);
  EXPECT_NEAR(w(0, 3), 0.18872187554086717, 1e-12);
}

TEST(EntropyWeight, SymmetricAndMatchesOracle) {
  std::vector<double> p;
  for (int i = 0; i <= 1000; ++i) p.push_back(i / 1000.0);
  std::vector<double> q(p.rbegin(), p.rend());
  const auto w = cam::entropy_weight(ScalarMap(1, 1001, p));
  const auto wq = cam::entropy_weight(ScalarMap(1, 1001, q));
  for (int i = 0; i <= 1000; ++i) {
    ASSERT_NEAR(w(0, i), wq(0, 1000 - i), 1e-12);
    ASSERT_NEAR(w(0, i), oracle::entropy_weight(p[i]), 1e-12);
    ASSERT_GE(w(0, i), 0.0);
    ASSERT_LE(w(0, i), 1.0);
  }
  EXPECT_THROW(cam::entropy_weight(ScalarMap(1, 1, 1.5)), ContractError);
}

TEST(CamStack, ValidatesMaps) {
  EXPECT_THROW(cam::CamStack({}), ContractError);
  EXPECT_THROW(cam::CamStack({ScalarMap(2, 2, 0.5)}), ContractError);
  EXPECT_THROW(cam::CamStack({ScalarMap(2, 2, 1.0), ScalarMap(3, 2, 1.0)}), ContractError);
  EXPECT_NO_THROW(cam::CamStack({ScalarMap(2, 2), ScalarMap(2, 2, 1.0)}));
}

TEST(CamStack, FromExportsOrdersAndUpsamples) {
  std::mt19937_64 rng(8);
  std::vector<FeatureBlockExport> exports;
  for (int m : {2, 0, 1}) {
    const auto e = oracle::random_export(rng, 3, 16 >> m, 16 >> m);
    exports.emplace_back(m, 3, 16 >> m, 16 >> m, std::vector<double>(e.features().begin(), e.features().end()),
                         std::vector<double>(e.gradients().begin(), e.gradients().end()));
  }
  const auto stack = cam::CamStack::from_exports(exports, 16, 16);
  ASSERT_EQ(stack.size(), 3u);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(stack[m].shape(), (Shape2D{16, 16}));
    const auto* src = &exports[0];
    for (const auto& e : exports) {
      if (e.block_index() == static_cast<int>(m)) src = &e;
    }
    const auto want = cam::normalize_max(cam::upsample_bilinear(cam::grad_cam(*src), 16, 16));
    EXPECT_EQ(stack[m], want);
  }
  std::vector<FeatureBlockExport> too_big{oracle::random_export(rng, 1, 32, 32)};
  EXPECT_THROW(cam::CamStack::from_exports(too_big, 16, 16), ContractError);
}

TEST(Fuse, CertainDisagreementAverages) {
  const cam::CamStack s({ScalarMap(1, 1, 1.0), ScalarMap(1, 1, 0.0)});
  EXPECT_EQ(cam::fuse(s, cfg(1, FusionMode::um_cam))(0, 0), 0.5);
}

TEST(Fuse, UncertainMapIsDiscounted) {
  // Maxima live in a second pixel so the maps stay normalised.
  const cam::CamStack s({ScalarMap::from_rows({{0.9, 1.0}}), ScalarMap::from_rows({{0.5, 1.0}})});
  EXPECT_NEAR(cam::fuse(s, cfg(1, FusionMode::um_cam))(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(cam::fuse(s, cfg(1, FusionMode::average_cam))(0, 0), 0.7, 1e-15);
  EXPECT_EQ(cam::fuse(s, cfg(1, FusionMode::last_layer_only))(0, 0), 0.5);
}

TEST(Fuse, AllUncertainFallsBackToMean) {
  const cam::CamStack s({ScalarMap::from_rows({{0.5, 1.0}}), ScalarMap::from_rows({{0.5, 1.0}})});
  EXPECT_EQ(cam::fuse(s, cfg(1, FusionMode::um_cam))(0, 0), 0.5);
}

TEST(Fuse, AgreementIsPreservedInEveryMode) {
  std::mt19937_64 rng(9);
  const auto m = random_cam(rng, 6, 6);
  const cam::CamStack s({m, m, m});
  for (auto mode : {FusionMode::um_cam, FusionMode::average_cam, FusionMode::last_layer_only}) {
    const auto f = cam::fuse(s, cfg(2, mode));
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(f.values()[i], m.values()[i], 1e-15);
  }
}

TEST(Fuse, SingleMapIdentityAcrossModes) {
  std::mt19937_64 rng(10);
  const auto m = random_cam(rng, 7, 5);
  const cam::CamStack s({m});
  EXPECT_EQ(cam::fuse(s, cfg(0, FusionMode::um_cam)), m);
  EXPECT_EQ(cam::fuse(s, cfg(0, FusionMode::average_cam)), m);
}

TEST(Fuse, BoundedByPerPixelRange) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 30; ++t) {
    std::vector<ScalarMap> maps;
    for (int m = 0; m < 5; ++m) maps.push_back(random_cam(rng, 8, 8));
    const cam::CamStack s(maps);
    const auto f = cam::fuse(s, cfg(4, FusionMode::um_cam));
    for (std::size_t i = 0; i < f.size(); ++i) {
      double lo = 1, hi = 0;
      for (const auto& m : maps) {
        lo = std::min(lo, m.values()[i]);
        hi = std::max(hi, m.values()[i]);
      }
      ASSERT_GE(f.values()[i], lo);
      ASSERT_LE(f.values()[i], hi);
    }
  }
}

TEST(Fuse, StackSizeMustMatchConfig) {
  const cam::CamStack s({ScalarMap(1, 1, 1.0), ScalarMap(1, 1, 1.0)});
  EXPECT_THROW(cam::fuse(s, cfg(4, FusionMode::um_cam)), ContractError);
  cam::FusionConfig bad;
  bad.max_block = -1;
  EXPECT_THROW(bad.validate(), ContractError);
  EXPECT_THROW(cam::parse_fusion_mode("nope"), ContractError);
  EXPECT_EQ(cam::parse_fusion_mode("average_cam"), FusionMode::average_cam);
  EXPECT_EQ(cam::to_string(FusionMode::last_layer_only), "last_layer_only");
}

TEST(Binarize, StrictThreshold) {
  const auto m = ScalarMap::from_rows({{0, 0.5}});
  EXPECT_EQ(cam::binarize(m, 0.0), BinaryMask::from_rows({{0, 1}}));
  EXPECT_EQ(cam::binarize(ScalarMap(2, 2, 1.0), 1.0), BinaryMask(2, 2));
  EXPECT_EQ(cam::binarize(ScalarMap::from_rows({{0.4, 0.6}}), 0.5), BinaryMask::from_rows({{0, 1}}));
}

TEST(GridSearch, GridHasOneHundredSteps) {
  const auto g = cam::threshold_grid();
  ASSERT_EQ(g.size(), 100u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g[20], 0.2);
  EXPECT_EQ(g.back(), 0.99);
}

TEST(GridSearch, SmallestThresholdWinsTies) {
  const auto truth = BinaryMask::from_rows({{0, 1}, {1, 0}});
  const auto map = ScalarMap::from_rows({{0.2, 0.8}, {0.8, 0.2}});
  const auto choice = cam::grid_search_threshold(std::vector<ScalarMap>{map}, std::vector<BinaryMask>{truth});
  EXPECT_EQ(choice.threshold, 0.20);
  EXPECT_EQ(choice.mean_dsc, 1.0);
}

TEST(GridSearch, PerfectMapScoresOne) {
  const auto truth = BinaryMask::from_rows({{0, 1, 1}, {1, 0, 0}});
  const auto choice =
      cam::grid_search_threshold(std::vector<ScalarMap>{truth.to_map()}, std::vector<BinaryMask>{truth});
  EXPECT_EQ(choice.mean_dsc, 1.0);
  EXPECT_EQ(choice.threshold, 0.0);
}

TEST(GridSearch, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    std::vector<ScalarMap> maps;
    std::vector<BinaryMask> truths;
    for (int i = 0; i < 4; ++i) {
      maps.push_back(oracle::random_map(rng, 9, 9));
      truths.push_back(oracle::random_mask(rng, 9, 9, 0.3));
    }
    double best = -1, best_t = 0;
    for (int k = 0; k < 100; ++k) {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += oracle::dsc(cam::binarize(maps[i], k / 100.0), truths[i]);
      if (s / 4 > best) {
        best = s / 4;
        best_t = k / 100.0;
      }
    }
    const auto choice = cam::grid_search_threshold(maps, truths);
    EXPECT_NEAR(choice.mean_dsc, best, 1e-12);
    EXPECT_EQ(choice.threshold, best_t);
  }
}
