#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "ildls/lithosim.hpp"
#include "test_support.hpp"

using namespace ildls;
using namespace ildls::lithosim;

namespace {

OpticsParams small_optics(int kernel_size = 15) {
  OpticsParams o;
  o.kernel_size = kernel_size;
  o.pixel_size = 8.0;
  return o;
}

ScalarField random_binary(std::mt19937_64& rng, int w, int h, double pixel) {
  ScalarField m(w, h, pixel);
  std::bernoulli_distribution b(0.4);
  for (double& v : m.values()) v = b(rng) ? 1.0 : 0.0;
  return m;
}

}  // namespace

TEST(GenerateKernels, CoherentLimitIsRankOne) {
  OpticsParams o = small_optics();
  o.partial_coherence_sigma = 0.0;
  const FrequencyLattice lat = make_lattice(o);
  const Eigen::MatrixXcd tcc = build_tcc(o, lat, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(tcc, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  int significant = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-10 * top) ++significant;
  EXPECT_EQ(significant, 1);

  const KernelSet ks = generate_kernels(o, 24, 0.0);
  EXPECT_EQ(ks.count(), 1);
  EXPECT_EQ(ks.missing, 23);
}

TEST(GenerateKernels, DefaultProducesTwentyFour) {
  const KernelSet ks = generate_kernels(OpticsParams{}, 24, 0.0);
  ASSERT_EQ(ks.count(), 24);
  EXPECT_EQ(ks.missing, 0);
  EXPECT_EQ(ks.kernel_size, 35);
  EXPECT_NO_THROW(ks.validate());
  for (int k = 1; k < ks.count(); ++k) EXPECT_LE(ks.weights[k], ks.weights[k - 1]);
  EXPECT_GE(ks.weights.back(), 0.0);
}

TEST(GenerateKernels, TraceIdentity) {
  for (double defocus : {0.0, 80.0}) {
    const OpticsParams o = small_optics(21);
    const FrequencyLattice lat = make_lattice(o);
    const Eigen::MatrixXcd tcc = build_tcc(o, lat, defocus);
    const KernelSet ks = generate_kernels(o, 400, defocus);
    double lhs = 0.0;
    for (int k = 0; k < ks.count(); ++k) {
      double e = 0.0;
      for (const auto& z : ks.kernels[k]) e += std::norm(z);
      lhs += ks.weights[k] * e;
    }
    const double rhs = ks.tcc_scale * tcc.trace().real();
    EXPECT_NEAR(lhs / rhs, 1.0, 1e-8) << "defocus " << defocus;
  }
}

TEST(GenerateKernels, TccIsHermitian) {
  const OpticsParams o = small_optics();
  const FrequencyLattice lat = make_lattice(o);
  for (double defocus : {0.0, -80.0, 80.0}) {
    const Eigen::MatrixXcd tcc = build_tcc(o, lat, defocus);
    EXPECT_LE((tcc - tcc.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GenerateKernels, OpenFrameIsNormalized) {
  const KernelSet ks = generate_kernels(small_optics(), 8, 40.0);
  ScalarField open(64, 64, 8.0, 1.0);
  const ScalarField i = aerial_image(open, ks);
  EXPECT_NEAR(i(32, 32), 1.0, 1e-12);
}

TEST(GenerateKernels, RejectsBadParams) {
  OpticsParams o;
  o.kernel_size = 34;
  EXPECT_THROW(generate_kernels(o, 4, 0.0), std::invalid_argument);
  o = OpticsParams{};
  o.numerical_aperture = 1.6;
  EXPECT_THROW(generate_kernels(o, 4, 0.0), std::invalid_argument);
  EXPECT_THROW(generate_kernels(OpticsParams{}, 0, 0.0), std::invalid_argument);
}

TEST(AerialImage, ZeroMaskGivesZero) {
  const KernelSet ks = generate_kernels(small_optics(), 4, 0.0);
  const ScalarField i = aerial_image(ScalarField(40, 32, 8.0), ks);
  EXPECT_EQ(i.max_abs(), 0.0);
}

TEST(AerialImage, SinglePixelReproducesKernelMagnitudes) {
  const KernelSet ks = generate_kernels(small_optics(9), 5, 0.0);
  const int n = 32, cx = 16, cy = 15, c = 4, s = 9;
  ScalarField m(n, n, 8.0);
  m(cx, cy) = 1.0;
  const ScalarField i = aerial_image(m, ks);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int u = x - cx, v = y - cy;
      double expect = 0.0;
      if (std::abs(u) <= c && std::abs(v) <= c)
        for (int k = 0; k < ks.count(); ++k)
          expect += ks.weights[k] * std::norm(ks.kernels[k][static_cast<std::size_t>((v + c) * s + (u + c))]);
      EXPECT_NEAR(i(x, y), expect, 1e-14);
    }
}

TEST(AerialImage, MatchesDirectConvolution) {
  std::mt19937_64 rng(3);
  const KernelSet ks = generate_kernels(OpticsParams{}, 3, 0.0);
  const ScalarField m = random_binary(rng, 64, 64, 8.0);
  const ScalarField fft_image = aerial_image(m, ks);
  ScalarField oracle(64, 64, 8.0);
  for (int k = 0; k < ks.count(); ++k) {
    const auto a = ildls::testing::direct_convolution(m, ks.kernels[k], ks.kernel_size);
    for (std::size_t p = 0; p < a.size(); ++p) oracle[p] += ks.weights[k] * std::norm(a[p]);
  }
  double err = 0.0;
  for (std::size_t p = 0; p < m.size(); ++p) err = std::max(err, std::abs(fft_image[p] - oracle[p]));
  EXPECT_LE(err / oracle.max_abs(), 1e-10);
}

TEST(AerialImage, NonNegativeAndQuadratic) {
  std::mt19937_64 rng(9);
  const KernelSet ks = generate_kernels(small_optics(), 6, 80.0);
  for (int t = 0; t < 5; ++t) {
    ScalarField m(32, 32, 8.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : m.values()) v = u(rng);
    const ScalarField i = aerial_image(m, ks);
    for (double v : i.values()) EXPECT_GE(v, 0.0);
    const double beta = u(rng);
    ScalarField scaled = m;
    for (double& v : scaled.values()) v *= beta;
    const ScalarField is = aerial_image(scaled, ks);
    for (std::size_t p = 0; p < i.size(); ++p)
      EXPECT_NEAR(is[p], beta * beta * i[p], 1e-10 * i.max_abs());
  }
}

TEST(AerialImage, TranslationEquivariantAwayFromBorder) {
  std::mt19937_64 rng(21);
  const KernelSet ks = generate_kernels(small_optics(11), 4, 0.0);
  const int n = 48, sx = 3, sy = -2, margin = 11;
  ScalarField m(n, n, 8.0);
  for (int y = margin; y < n - margin; ++y)
    for (int x = margin; x < n - margin; ++x) m(x, y) = (rng() % 3 == 0) ? 1.0 : 0.0;
  ScalarField shifted(n, n, 8.0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (m.in_bounds(x - sx, y - sy)) shifted(x, y) = m(x - sx, y - sy);
  const ScalarField a = aerial_image(m, ks), b = aerial_image(shifted, ks);
  for (int y = margin; y < n - margin; ++y)
    for (int x = margin; x < n - margin; ++x) EXPECT_NEAR(b(x + sx, y + sy), a(x, y), 1e-12);
}

TEST(AerialImage, Errors) {
  const KernelSet ks = generate_kernels(small_optics(), 2, 0.0);
  EXPECT_THROW(aerial_image(ScalarField(16, 16, 4.0), ks), std::invalid_argument);
  EXPECT_THROW(aerial_image(ScalarField(16, 16, 8.0, 1.5), ks), std::invalid_argument);
}

TEST(Imager, AdjointMatchesInnerProduct) {
  // <g, dI[dm]> = <adjoint(g), dm> for a small mask perturbation direction
  std::mt19937_64 rng(17);
  const KernelSet ks = generate_kernels(small_optics(9), 3, 40.0);
  const Imager im(ks, 24, 20);
  ScalarField m(24, 20, 8.0), g(24, 20, 8.0), dm(24, 20, 8.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = 0.5 + 0.4 * u(rng);
    g[i] = u(rng);
    dm[i] = u(rng);
  }
  const auto f = im.forward(m);
  const ScalarField adj = im.adjoint(f, g);
  const double h = 1e-6;
  ScalarField mp = m, mm = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    mp[i] += h * dm[i];
    mm[i] -= h * dm[i];
  }
  const ScalarField ip = im.intensity(mp), imn = im.intensity(mm);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    lhs += g[i] * (ip[i] - imn[i]) / (2 * h);
    rhs += adj[i] * dm[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-7 * std::abs(rhs));
}

TEST(ResistStep, Examples) {
  ResistParams r;
  EXPECT_EQ(count_ones(resist_step(ScalarField(8, 8, 1.0, 0.0), r)), 0u);
  EXPECT_EQ(count_ones(resist_step(ScalarField(8, 8, 1.0, 0.225), r)), 64u);
  r.dose_latitude = 0.1;
  EXPECT_NEAR(r.effective_threshold(), 0.2045454545, 1e-9);
  EXPECT_EQ(count_ones(resist_step(ScalarField(8, 8, 1.0, 0.30), r)), 64u);
  r.dose_latitude = -1.0;
  EXPECT_THROW(resist_step(ScalarField(8, 8, 1.0), r), std::invalid_argument);
}

TEST(ResistSigmoid, Examples) {
  ResistParams r;
  r.dose_latitude = 0.05;
  EXPECT_DOUBLE_EQ(resist_sigmoid(ScalarField(8, 8, 1.0, 0.225 / 1.05), r)[0], 0.5);
  r.dose_latitude = 0.0;
  EXPECT_NEAR(resist_sigmoid(ScalarField(8, 8, 1.0, 0.245), r)[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(resist_sigmoid(ScalarField(8, 8, 1.0, 0.245), r)[0], 0.73106, 1e-5);
}

TEST(ResistSigmoid, SteepLimitApproachesStep) {
  ResistParams r;
  r.steepness = 5000.0;
  ScalarField i(64, 64, 1.0);
  for (std::size_t p = 0; p < i.size(); ++p) i[p] = 0.5 * double(p) / i.size();
  const ScalarField zs = resist_sigmoid(i, r), zb = resist_step(i, r);
  int checked = 0;
  for (std::size_t p = 0; p < i.size(); ++p) {
    if (std::abs(i[p] - r.effective_threshold()) <= 0.002) continue;
    EXPECT_LE(std::abs(zs[p] - zb[p]), 0.01);
    ++checked;
  }
  EXPECT_GT(checked, 4000);
}

TEST(ResistSigmoid, MonotoneInIntensityAndDose) {
  ScalarField i(32, 8, 1.0);
  for (std::size_t p = 0; p < i.size(); ++p) i[p] = 0.6 * double(p) / i.size();
  double prev_dose_value = -1.0;
  for (double t : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
    ResistParams r;
    r.dose_latitude = t;
    const ScalarField z = resist_sigmoid(i, r);
    for (std::size_t p = 1; p < z.size(); ++p) EXPECT_GE(z[p], z[p - 1]);
    // higher t_q lowers the threshold, so Z grows with t_q at fixed I
    EXPECT_GE(z[100], prev_dose_value);
    prev_dose_value = z[100];
    for (double v : z.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}
