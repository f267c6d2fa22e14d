#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ildls/fft.hpp"
#include "ildls/field.hpp"

namespace ildls::lithosim {

using complex = std::complex<double>;

struct OpticsParams {
  double wavelength = 193.0;  // nm
  double numerical_aperture = 1.35;
  double partial_coherence_sigma = 0.3;
  int kernel_size = 35;    // px, odd
  double pixel_size = 8.0;  // nm

  void validate() const {
    if (!(wavelength > 0.0)) throw std::invalid_argument("optics.wavelength must be positive");
    if (!(numerical_aperture > 0.0 && numerical_aperture < 1.5))
      throw std::invalid_argument("optics.na must lie in (0, 1.5)");
    if (!(partial_coherence_sigma >= 0.0 && partial_coherence_sigma <= 1.0))
      throw std::invalid_argument("optics.sigma must lie in [0, 1]");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw std::invalid_argument("optics.kernel_size must be a positive odd number");
    if (!(pixel_size > 0.0)) throw std::invalid_argument("grid.pixel_size must be positive");
  }
};

/// Coherent decomposition of one defocus condition.
///
/// kernels[k] is a kernel_size^2 row-major array; element (u, v) with offsets
/// in [-c, c], c = (kernel_size - 1) / 2, lives at (v + c) * S + (u + c).
/// Kernels have unit energy on their support; weights carry the scaled TCC
/// eigenvalues, so sum_k w_k |sum h_k|^2 = 1 (open-frame intensity).
struct KernelSet {
  double defocus = 0.0;  // nm
  int kernel_size = 0;
  double pixel_size = 0.0;
  std::vector<double> weights;
  std::vector<std::vector<complex>> kernels;
  /// Factor applied to raw TCC eigenvalues; 0 when unknown (loaded from file).
  double tcc_scale = 0.0;
  /// Requested kernels that were not returned because the TCC rank ran out.
  int missing = 0;

  int count() const noexcept { return static_cast<int>(weights.size()); }

  void validate() const {
    if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("KernelSet: kernel_size must be odd");
    if (!(pixel_size > 0.0)) throw std::invalid_argument("KernelSet: pixel_size must be positive");
    if (weights.size() != kernels.size() || weights.empty())
      throw std::invalid_argument("KernelSet: need one weight per kernel and at least one kernel");
    if (weights.size() > static_cast<std::size_t>(kernel_size) * kernel_size)
      throw std::invalid_argument("KernelSet: more kernels than kernel_size^2");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!(weights[k] >= 0.0)) throw std::invalid_argument("KernelSet: weights must be non-negative");
      if (k > 0 && weights[k] > weights[k - 1]) throw std::invalid_argument("KernelSet: weights must be descending");
      if (kernels[k].size() != static_cast<std::size_t>(kernel_size) * kernel_size)
        throw std::invalid_argument("KernelSet: kernel payload has the wrong size");
    }
  }

  friend bool operator==(const KernelSet& a, const KernelSet& b) {
    return a.defocus == b.defocus && a.kernel_size == b.kernel_size && a.pixel_size == b.pixel_size &&
           a.weights == b.weights && a.kernels == b.kernels;
  }
};

struct ResistParams {
  double threshold = 0.225;   // I_th
  double steepness = 50.0;    // theta_Z
  double dose_latitude = 0.0;  // t_q

  double effective_threshold() const noexcept { return threshold / (1.0 + dose_latitude); }

  void validate() const {
    if (!(threshold > 0.0)) throw std::invalid_argument("resist.threshold must be positive");
    if (!(steepness > 0.0)) throw std::invalid_argument("resist.steepness must be positive");
    if (!(dose_latitude > -1.0)) throw std::invalid_argument("resist.dose must exceed -1");
  }
};

// ---------------------------------------------------------------------------
// Hopkins TCC on an integer frequency lattice.

/// Frequency lattice of the TCC: f = step * (mx, my) cycles/nm.
struct FrequencyLattice {
  double step = 0.0;
  int pupil_radius = 0;  // NA/lambda in lattice units
  std::vector<std::pair<int, int>> support;  // TCC row/column order
  std::vector<std::pair<int, int>> source;
};

namespace detail {

// Lattice spacing so the pupil spans at least 16 samples in radius and the
// kernel support fits inside one spatial period.
inline int pupil_samples(const OpticsParams& o) {
  const double min_r = o.kernel_size * o.pixel_size * o.numerical_aperture / o.wavelength;
  return std::max(16, static_cast<int>(std::ceil(min_r)) + 1);
}

inline complex pupil(const OpticsParams& o, int radius, double step, double defocus, int mx, int my) {
  if (mx * mx + my * my > radius * radius) return complex(0.0, 0.0);
  const double f2 = step * step * (double(mx) * mx + double(my) * my);
  const double phase = std::numbers::pi * o.wavelength * defocus * f2;
  return std::polar(1.0, phase);
}

}  // namespace detail

inline FrequencyLattice make_lattice(const OpticsParams& optics) {
  optics.validate();
  FrequencyLattice lat;
  lat.pupil_radius = detail::pupil_samples(optics);
  lat.step = optics.numerical_aperture / optics.wavelength / lat.pupil_radius;
  const double src_r = optics.partial_coherence_sigma * lat.pupil_radius;
  const int src_i = static_cast<int>(std::floor(src_r));
  for (int my = -src_i; my <= src_i; ++my)
    for (int mx = -src_i; mx <= src_i; ++mx)
      if (double(mx) * mx + double(my) * my <= src_r * src_r + 1e-9) lat.source.emplace_back(mx, my);
  const int r = lat.pupil_radius;
  const int reach = r + src_i;
  for (int my = -reach; my <= reach; ++my)
    for (int mx = -reach; mx <= reach; ++mx) {
      bool hit = false;
      for (auto [sx, sy] : lat.source) {
        const int px = mx + sx, py = my + sy;
        if (px * px + py * py <= r * r) {
          hit = true;
          break;
        }
      }
      if (hit) lat.support.emplace_back(mx, my);
    }
  return lat;
}

/// Q with TCC = Q Q^H: Q(f, s) = P(f + s) sqrt(J(s) / sum J) for a uniform
/// circular source.
inline Eigen::MatrixXcd pupil_source_matrix(const OpticsParams& optics, const FrequencyLattice& lat, double defocus) {
  const auto n = static_cast<Eigen::Index>(lat.support.size());
  const auto m = static_cast<Eigen::Index>(lat.source.size());
  Eigen::MatrixXcd q(n, m);
  const double w = 1.0 / std::sqrt(static_cast<double>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [fx, fy] = lat.support[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto [sx, sy] = lat.source[static_cast<std::size_t>(j)];
      q(i, j) = w * detail::pupil(optics, lat.pupil_radius, lat.step, defocus, fx + sx, fy + sy);
    }
  }
  return q;
}

/// Explicit Hermitian transmission cross coefficient matrix over lat.support.
inline Eigen::MatrixXcd build_tcc(const OpticsParams& optics, const FrequencyLattice& lat, double defocus) {
  const Eigen::MatrixXcd q = pupil_source_matrix(optics, lat, defocus);
  return q * q.adjoint();
}

inline constexpr double kRankTolerance = 1e-10;

/// Leading coherent kernels of the defocused Hopkins TCC.
///
/// The TCC factor Q is decomposed by SVD (left singular vectors are TCC
/// eigenvectors, squared singular values its eigenvalues). Each eigenvector
/// is evaluated as a spatial kernel on the kernel_size^2 pixel window,
/// normalized to unit energy, and the eigenvalues are scaled so a large
/// clear mask images to intensity 1. Returns fewer than k_count kernels
/// (and sets `missing`) when the numerical rank is smaller.
inline KernelSet generate_kernels(const OpticsParams& optics, int k_count, double defocus) {
  optics.validate();
  if (k_count < 1) throw std::invalid_argument("generate_kernels: k_count must be >= 1");
  const FrequencyLattice lat = make_lattice(optics);
  const Eigen::MatrixXcd q = pupil_source_matrix(optics, lat, defocus);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(q, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::MatrixXcd& u = svd.matrixU();

  const int s = optics.kernel_size;
  const int c = (s - 1) / 2;
  const double lead = sv.size() > 0 ? sv(0) * sv(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) * sv(i) > kRankTolerance * lead) ++rank;
  const int keep = std::min({k_count, rank, s * s});

  // exp(2 pi i step p m u) tables, separable in x and y
  const double arg = 2.0 * std::numbers::pi * lat.step * optics.pixel_size;
  int mmax = 0;
  for (auto [mx, my] : lat.support) mmax = std::max({mmax, std::abs(mx), std::abs(my)});
  const int span = 2 * mmax + 1;
  std::vector<complex> table(static_cast<std::size_t>(span) * s);
  for (int m = -mmax; m <= mmax; ++m)
    for (int t = -c; t <= c; ++t)
      table[static_cast<std::size_t>(m + mmax) * s + (t + c)] = std::polar(1.0, arg * m * t);

  KernelSet ks;
  ks.defocus = defocus;
  ks.kernel_size = s;
  ks.pixel_size = optics.pixel_size;
  ks.missing = k_count - keep;
  std::vector<double> eig;
  for (int k = 0; k < keep; ++k) {
    std::vector<complex> h(static_cast<std::size_t>(s) * s, complex(0.0, 0.0));
    for (std::size_t j = 0; j < lat.support.size(); ++j) {
      const complex coef = u(static_cast<Eigen::Index>(j), k);
      const auto [mx, my] = lat.support[j];
      const complex* tx = &table[static_cast<std::size_t>(mx + mmax) * s];
      const complex* ty = &table[static_cast<std::size_t>(my + mmax) * s];
      for (int v = 0; v < s; ++v) {
        const complex cy = coef * ty[v];
        complex* row = &h[static_cast<std::size_t>(v) * s];
        for (int t = 0; t < s; ++t) row[t] += cy * tx[t];
      }
    }
    double energy = 0.0;
    for (const complex& z : h) energy += std::norm(z);
    const double inv = 1.0 / std::sqrt(energy);
    for (complex& z : h) z *= inv;
    ks.kernels.push_back(std::move(h));
    eig.push_back(sv(k) * sv(k));
  }

  double open_frame = 0.0;
  for (int k = 0; k < keep; ++k) {
    complex dc = 0.0;
    for (const complex& z : ks.kernels[static_cast<std::size_t>(k)]) dc += z;
    open_frame += eig[static_cast<std::size_t>(k)] * std::norm(dc);
  }
  if (!(open_frame > 0.0)) throw std::runtime_error("generate_kernels: kernels pass no DC light");
  ks.tcc_scale = 1.0 / open_frame;
  for (double e : eig) ks.weights.push_back(e * ks.tcc_scale);
  return ks;
}

// ---------------------------------------------------------------------------
// Imaging

/// Per-grid imaging engine for one KernelSet: caches padded kernel spectra
/// and FFT plans. Immutable after construction; safe to share across threads.
///
/// Convolutions are linear ("same" size, zero outside the grid) on an FFT
/// grid of at least extent + (S - 1) / 2 per axis.
class Imager {
public:
  /// Forward products kept for the adjoint: intensity plus every coherent
  /// field M (x) h_k on the mask grid.
  struct Fields {
    ScalarField intensity;
    std::vector<std::vector<complex>> amplitudes;
  };

  Imager(const KernelSet& kernels, int width, int height)
      : width_(width), height_(height), pixel_size_(kernels.pixel_size), weights_(kernels.weights) {
    kernels.validate();
    const int c = (kernels.kernel_size - 1) / 2;
    rows_ = fft::good_size(height + c);
    cols_ = fft::good_size(width + c);
    plan_ = std::make_shared<fft::Plan2d>(rows_, cols_);
    const double norm = 1.0 / static_cast<double>(plan_->size());
    const int s = kernels.kernel_size;
    for (const auto& h : kernels.kernels) {
      fft::Buffer b(plan_->size());
      for (int v = -c; v <= c; ++v)
        for (int u = -c; u <= c; ++u) {
          const int r = (v + rows_) % rows_, q = (u + cols_) % cols_;
          b[static_cast<std::size_t>(r) * cols_ + q] = h[static_cast<std::size_t>((v + c) * s + (u + c))] * norm;
        }
      plan_->forward(b);
      spectra_.push_back(std::move(b));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double pixel_size() const noexcept { return pixel_size_; }
  int count() const noexcept { return static_cast<int>(weights_.size()); }

  Fields forward(const ScalarField& mask, bool keep_amplitudes = true) const {
    check(mask);
    fft::Buffer spec = padded(mask.values());
    plan_->forward(spec);
    Fields out{ScalarField(width_, height_, pixel_size_), {}};
    fft::Buffer work(plan_->size());
    for (std::size_t k = 0; k < spectra_.size(); ++k) {
      const fft::Buffer& hk = spectra_[k];
      for (std::size_t i = 0; i < work.size(); ++i) work[i] = spec[i] * hk[i];
      plan_->inverse(work);
      std::vector<complex> amp;
      if (keep_amplitudes) amp.resize(mask.size());
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
          const complex a = work[static_cast<std::size_t>(y) * cols_ + x];
          out.intensity(x, y) += weights_[k] * std::norm(a);
          if (keep_amplitudes) amp[mask.index(x, y)] = a;
        }
      if (keep_amplitudes) out.amplitudes.push_back(std::move(amp));
    }
    for (double& v : out.intensity.values()) v = std::max(v, 0.0);
    return out;
  }

  ScalarField intensity(const ScalarField& mask) const { return forward(mask, false).intensity; }

  /// Adjoint of the intensity map at the forward point:
  /// out(p) = sum_x g(x) dI(x)/dM(p) = sum_k 2 w_k Re[(h_k^flip (x) (g . conj(A_k)))(p)].
  ScalarField adjoint(const Fields& fields, const ScalarField& g) const {
    if (fields.amplitudes.size() != spectra_.size())
      throw std::invalid_argument("Imager::adjoint: forward fields were computed without amplitudes");
    check(g);
    fft::Buffer acc(plan_->size()), work(plan_->size());
    for (std::size_t k = 0; k < spectra_.size(); ++k) {
      work.zero();
      const auto& amp = fields.amplitudes[k];
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
          const std::size_t i = g.index(x, y);
          work[static_cast<std::size_t>(y) * cols_ + x] = g[i] * std::conj(amp[i]);
        }
      plan_->forward(work);
      const fft::Buffer& hk = spectra_[k];
      const double wk = weights_[k];
      for (int r = 0; r < rows_; ++r) {
        const int nr = (rows_ - r) % rows_;
        for (int q = 0; q < cols_; ++q) {
          const int nq = (cols_ - q) % cols_;
          const std::size_t i = static_cast<std::size_t>(r) * cols_ + q;
          acc[i] += wk * work[i] * hk[static_cast<std::size_t>(nr) * cols_ + nq];
        }
      }
    }
    plan_->inverse(acc);
    ScalarField out(width_, height_, pixel_size_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) out(x, y) = 2.0 * acc[static_cast<std::size_t>(y) * cols_ + x].real();
    return out;
  }

private:
  void check(const ScalarField& f) const {
    if (f.width() != width_ || f.height() != height_)
      throw std::invalid_argument("Imager: field shape does not match the imager grid");
    if (std::abs(f.pixel_size() - pixel_size_) > 1e-9 * pixel_size_)
      throw std::invalid_argument("Imager: pixel_size mismatch between field and kernels");
  }

  fft::Buffer padded(std::span<const double> values) const {
    fft::Buffer b(plan_->size());
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        b[static_cast<std::size_t>(y) * cols_ + x] = values[static_cast<std::size_t>(y) * width_ + x];
    return b;
  }

  int width_;
  int height_;
  double pixel_size_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> weights_;
  std::shared_ptr<const fft::Plan2d> plan_;
  std::vector<fft::Buffer> spectra_;
};

/// I = sum_k w_k |M (x) h_k|^2.
inline ScalarField aerial_image(const ScalarField& mask, const KernelSet& kernels) {
  for (double v : mask.values())
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("aerial_image: mask values must lie in [0, 1]");
  if (std::abs(mask.pixel_size() - kernels.pixel_size) > 1e-9 * kernels.pixel_size)
    throw std::invalid_argument("aerial_image: pixel_size mismatch between mask and kernels");
  return Imager(kernels, mask.width(), mask.height()).intensity(mask);
}

/// Binary print: 1 where I >= I_th / (1 + t_q).
inline ScalarField resist_step(const ScalarField& intensity, const ResistParams& resist) {
  resist.validate();
  const double thr = resist.effective_threshold();
  ScalarField z(intensity.width(), intensity.height(), intensity.pixel_size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = intensity[i] >= thr ? 1.0 : 0.0;
  return z;
}

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

/// Relaxed print: 1 / (1 + exp(-theta (I - I_th / (1 + t_q)))).
inline ScalarField resist_sigmoid(const ScalarField& intensity, const ResistParams& resist) {
  resist.validate();
  const double thr = resist.effective_threshold();
  ScalarField z(intensity.width(), intensity.height(), intensity.pixel_size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = sigmoid(resist.steepness * (intensity[i] - thr));
  return z;
}

}  // namespace ildls::lithosim
