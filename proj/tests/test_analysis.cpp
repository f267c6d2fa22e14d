#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ildls/analysis.hpp"
#include "test_support.hpp"

using namespace ildls;
using namespace ildls::analysis;
using ildls::testing::rect_mask;

namespace {

ilt::KernelsByDefocus pw_kernels() {
  lithosim::OpticsParams o;
  o.kernel_size = 21;
  o.pixel_size = 8.0;
  ilt::KernelsByDefocus out;
  for (double h : {-80.0, 0.0, 80.0}) out.emplace(h, lithosim::generate_kernels(o, 8, h));
  return out;
}

}  // namespace

TEST(Ede, IdenticalIsZero) {
  const ScalarField t = rect_mask(32, 32, 4, 4, 10, 12);
  EXPECT_EQ(ede(t, t, 1.0), 0.0);
}

TEST(Ede, NotchHandCount) {
  const ScalarField target = rect_mask(128, 128, 14, 14, 100, 100);
  EXPECT_EQ(perimeter_edges(target), 400u);
  ScalarField wafer = target;
  for (int y = 14; y < 16; ++y)
    for (int x = 50; x < 60; ++x) wafer(x, y) = 0.0;
  EXPECT_EQ(ede(wafer, target, 1.0), 0.05);
}

TEST(Ede, SymmetricDifferenceAndScale) {
  const ScalarField target = rect_mask(64, 64, 10, 10, 30, 20);
  ScalarField grow = target, shrink = target;
  for (int x = 10; x < 40; ++x) grow(x, 9) = 1.0;    // 30 extra pixels
  for (int x = 10; x < 40; ++x) shrink(x, 10) = 0.0;  // 30 missing pixels
  EXPECT_EQ(ede(grow, target, 1.0), ede(shrink, target, 1.0));
  EXPECT_DOUBLE_EQ(ede(grow, target, 2.0), 2.0 * ede(grow, target, 1.0));
}

TEST(Ede, PerimeterCountsOnlyInGridEdges) {
  // A feature touching the clip border has no edge along that border.
  const ScalarField t = rect_mask(16, 16, 0, 0, 4, 3);
  EXPECT_EQ(perimeter_edges(t), 7u);
}

TEST(Ede, Errors) {
  const ScalarField empty(16, 16, 1.0);
  EXPECT_THROW(ede(empty, empty, 1.0), std::invalid_argument);
  const ScalarField t = rect_mask(16, 16, 2, 2, 5, 5);
  ScalarField grey = t;
  grey(0, 0) = 0.5;
  EXPECT_THROW(ede(grey, t, 1.0), std::invalid_argument);
  EXPECT_THROW(ede(t, rect_mask(17, 16, 2, 2, 5, 5), 1.0), std::invalid_argument);
}

TEST(EdeReport, MeanAndSpread) {
  const ScalarField target = rect_mask(128, 128, 14, 14, 100, 100);
  ScalarField one = target, three = target;
  // 400 and 1200 extra pixels over a 400-edge perimeter.
  for (int y = 0; y < 4; ++y)
    for (int x = 14; x < 114; ++x) one(x, y + 120) = 1.0;
  for (int y = 0; y < 12; ++y)
    for (int x = 14; x < 114; ++x) three(x, y + 115) = 1.0;
  const EdeReport r = ede_report({{one, target}, {three, target}}, 1.0);
  ASSERT_EQ(r.per_clip_ede.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_clip_ede[0], 1.0);
  EXPECT_DOUBLE_EQ(r.per_clip_ede[1], 3.0);
  EXPECT_DOUBLE_EQ(r.aede, 2.0);
  EXPECT_DOUBLE_EQ(r.max_min_spread, 2.0);

  const EdeReport same = ede_report({{target, target}}, 1.0);
  EXPECT_EQ(same.aede, 0.0);
  EXPECT_EQ(same.max_min_spread, 0.0);
  EXPECT_THROW(ede_report({}, 1.0), std::invalid_argument);
}

TEST(WorstIls, UniformIsZero) {
  const ScalarField t = rect_mask(32, 32, 8, 8, 10, 10, 4.0);
  EXPECT_EQ(worst_ils(ScalarField(32, 32, 4.0, 0.4), t, 4.0), 0.0);
}

TEST(WorstIls, ExponentialProfile) {
  const double pixel = 4.0, slope = 37.5;  // 1/um
  const ScalarField t = rect_mask(40, 40, 0, 0, 18, 40, pixel);
  ScalarField intensity(40, 40, pixel);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) intensity(x, y) = std::exp(slope * x * pixel / 1000.0);
  EXPECT_NEAR(worst_ils(intensity, t, pixel), slope, 1e-6);
}

TEST(WorstIls, ScaleInvariant) {
  const double pixel = 8.0;
  const ScalarField t = rect_mask(48, 48, 16, 14, 12, 20, pixel);
  lithosim::OpticsParams o;
  o.kernel_size = 21;
  const ScalarField intensity = lithosim::aerial_image(t, lithosim::generate_kernels(o, 6, 0.0));
  const double base = worst_ils(intensity, t, pixel);
  EXPECT_GT(base, 0.0);
  for (double c : {0.01, 0.37, 2.5, 1000.0}) {
    ScalarField scaled = intensity;
    for (double& v : scaled.values()) v *= c;
    EXPECT_NEAR(worst_ils(scaled, t, pixel), base, 1e-12 * base);
  }
}

TEST(WorstIls, ZeroIntensityAtEdgeIsAnError) {
  const ScalarField t = rect_mask(32, 32, 8, 8, 10, 10);
  ScalarField intensity(32, 32, 1.0, 0.5);
  intensity(7, 12) = 0.0;  // outside pixel next to the left edge
  EXPECT_THROW(worst_ils(intensity, t, 1.0), std::invalid_argument);
}

TEST(PwCurve, MatchesExhaustiveGridOracle) {
  const auto kernels = pw_kernels();
  const ScalarField target = rect_mask(64, 64, 20, 18, 22, 26, 8.0);
  const std::vector<double> doses{-0.1, -0.05, 0.0, 0.05, 0.1};
  const ilt::IltConfig cfg;

  std::vector<std::vector<double>> oracle_ede;
  std::vector<double> all;
  for (const auto& [h, ks] : kernels) {
    std::vector<double> row;
    const ScalarField intensity = lithosim::aerial_image(target, ks);
    for (double t : doses) {
      const ScalarField wafer = lithosim::resist_step(intensity, {cfg.i_th, cfg.theta_z, t});
      row.push_back(ede(wafer, target, 8.0));
      all.push_back(row.back());
    }
    oracle_ede.push_back(row);
  }
  std::sort(all.begin(), all.end());
  const double pass_nm = all[all.size() / 2];

  const PwCurve curve = pw_curve(target, target, kernels, doses, pass_nm, cfg);
  ASSERT_EQ(curve.pass.size(), 3u);
  int passes = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(curve.pass[i].size(), doses.size());
    for (std::size_t j = 0; j < doses.size(); ++j) {
      EXPECT_EQ(curve.pass[i][j], oracle_ede[i][j] <= pass_nm) << "defocus " << curve.defocus[i] << " dose " << doses[j];
      passes += curve.pass[i][j];
    }
  }
  EXPECT_GT(passes, 0);
  EXPECT_LT(passes, 15);
  for (std::size_t i = 1; i < curve.samples.size(); ++i) EXPECT_LT(curve.samples[i - 1].first, curve.samples[i].first);
  for (const auto& [dof, el] : curve.samples) EXPECT_GE(el, 0.0);
}

TEST(PwCurve, FailingNominalGivesZeroWindow) {
  const auto kernels = pw_kernels();
  const ScalarField target = rect_mask(64, 64, 20, 18, 22, 26, 8.0);
  ScalarField wrong(64, 64, 8.0);
  for (int y = 4; y < 10; ++y)
    for (int x = 4; x < 60; ++x) wrong(x, y) = 1.0;
  const PwCurve curve = pw_curve(wrong, target, kernels, {-0.1, 0.0, 0.1}, 8.0, ilt::IltConfig{});
  for (const auto& [dof, el] : curve.samples) EXPECT_EQ(el, 0.0);
  for (double el : curve.el_by_defocus) EXPECT_EQ(el, 0.0);
  EXPECT_EQ(curve.area, 0.0);
}

TEST(PwCurve, LooserPassCriterionNeverShrinksWindow) {
  const auto kernels = pw_kernels();
  const ScalarField target = rect_mask(64, 64, 20, 18, 22, 26, 8.0);
  const std::vector<double> doses{-0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15};
  PwCurve prev = pw_curve(target, target, kernels, doses, 0.5, ilt::IltConfig{});
  for (double pass_nm : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const PwCurve next = pw_curve(target, target, kernels, doses, pass_nm, ilt::IltConfig{});
    for (std::size_t i = 0; i < next.el_by_defocus.size(); ++i)
      EXPECT_GE(next.el_by_defocus[i], prev.el_by_defocus[i]);
    for (std::size_t i = 0; i < next.samples.size(); ++i) EXPECT_GE(next.samples[i].second, prev.samples[i].second);
    EXPECT_GE(next.area, prev.area);
    prev = next;
  }
  EXPECT_GT(prev.area, 0.0);
}

TEST(PwCurve, WindowIsContiguousThroughNominalDose) {
  // Passing at +-0.1 but failing at +-0.05 leaves only the nominal point.
  EXPECT_DOUBLE_EQ(analysis::detail::window_width({-0.1, -0.05, 0.0, 0.05, 0.1}, {true, false, true, false, true}),
                   0.0);
  EXPECT_DOUBLE_EQ(analysis::detail::window_width({-0.1, -0.05, 0.0, 0.05, 0.1}, {false, true, true, true, true}),
                   0.15);
}

TEST(PwCurve, ReadOffs) {
  PwCurve c;
  c.samples = {{0.0, 20.0}, {80.0, 10.0}, {160.0, 0.0}};
  EXPECT_DOUBLE_EQ(c.el_at_dof(0.0), 20.0);
  EXPECT_DOUBLE_EQ(c.el_at_dof(40.0), 15.0);
  EXPECT_DOUBLE_EQ(c.el_at_dof(200.0), 0.0);
  EXPECT_DOUBLE_EQ(c.dof_at_el(5.0), 120.0);
  EXPECT_DOUBLE_EQ(c.dof_at_el(20.0), 0.0);
  EXPECT_DOUBLE_EQ(c.dof_at_el(25.0), 0.0);
}

TEST(PwCurve, Errors) {
  const auto kernels = pw_kernels();
  const ScalarField target = rect_mask(64, 64, 20, 18, 22, 26, 8.0);
  EXPECT_THROW(pw_curve(target, target, kernels, {-0.1, 0.05}, 8.0, {}), std::invalid_argument);
  EXPECT_THROW(pw_curve(target, target, kernels, {-0.1, 0.1}, 8.0, {}), std::invalid_argument);
  EXPECT_THROW(pw_curve(target, target, {}, {0.0}, 8.0, {}), std::invalid_argument);
}
