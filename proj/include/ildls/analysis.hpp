#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ildls/field.hpp"
#include "ildls/ilt.hpp"
#include "ildls/lithosim.hpp"

namespace ildls::analysis {

struct EdeReport {
  std::vector<double> per_clip_ede;  // nm
  double aede = 0.0;
  double max_min_spread = 0.0;
};

/// Exposure latitude versus depth of focus for a focus window centered at
/// best focus. samples[i] = (dof nm, max EL %), dof ascending.
struct PwCurve {
  std::vector<std::pair<double, double>> samples;
  double area = 0.0;  // trapezoidal, nm * %
  std::vector<double> defocus;     // simulated focus values, ascending
  std::vector<double> dose;        // dose grid, ascending
  std::vector<std::vector<bool>> pass;  // pass[defocus][dose]
  std::vector<double> el_by_defocus;    // % at each simulated focus alone

  /// EL (%) available over a focus range of width dof, linear between samples.
  double el_at_dof(double dof) const {
    if (samples.empty() || dof < samples.front().first) return samples.empty() ? 0.0 : samples.front().second;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const auto [d0, e0] = samples[i - 1];
      const auto [d1, e1] = samples[i];
      if (dof <= d1) return d1 == d0 ? e1 : e0 + (e1 - e0) * (dof - d0) / (d1 - d0);
    }
    return 0.0;
  }

  /// Largest DOF (nm) holding at least `el` percent, linear between samples.
  double dof_at_el(double el) const {
    if (samples.empty() || samples.front().second < el) return 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const auto [d0, e0] = samples[i - 1];
      const auto [d1, e1] = samples[i];
      if (e1 < el) return e0 == e1 ? d0 : d0 + (d1 - d0) * (e0 - el) / (e0 - e1);
    }
    return samples.back().first;
  }
};

/// Count of 4-neighbour inside/outside pixel pairs within the grid.
inline std::size_t perimeter_edges(const ScalarField& pattern) {
  std::size_t n = 0;
  for (int y = 0; y < pattern.height(); ++y)
    for (int x = 0; x < pattern.width(); ++x) {
      if (x + 1 < pattern.width() && pattern(x, y) != pattern(x + 1, y)) ++n;
      if (y + 1 < pattern.height() && pattern(x, y) != pattern(x, y + 1)) ++n;
    }
  return n;
}

/// Edge distance error: differing area over target perimeter, in nm.
inline double ede(const ScalarField& wafer, const ScalarField& target, double pixel_size) {
  require_same_shape(wafer, target, "ede");
  if (!is_binary(wafer) || !is_binary(target)) throw std::invalid_argument("ede: patterns must be binary");
  if (!(pixel_size > 0.0)) throw std::invalid_argument("ede: pixel_size must be positive");
  const std::size_t edges = perimeter_edges(target);
  if (edges == 0) throw std::invalid_argument("ede: target has zero perimeter");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < wafer.size(); ++i)
    if (wafer[i] != target[i]) ++diff;
  const double area = static_cast<double>(diff) * pixel_size * pixel_size;
  return area / (static_cast<double>(edges) * pixel_size);
}

inline EdeReport ede_report(const std::vector<std::pair<ScalarField, ScalarField>>& pairs, double pixel_size) {
  if (pairs.empty()) throw std::invalid_argument("ede_report: empty list");
  EdeReport r;
  for (const auto& [wafer, target] : pairs) r.per_clip_ede.push_back(ede(wafer, target, pixel_size));
  r.aede = std::accumulate(r.per_clip_ede.begin(), r.per_clip_ede.end(), 0.0) / r.per_clip_ede.size();
  const auto [lo, hi] = std::minmax_element(r.per_clip_ede.begin(), r.per_clip_ede.end());
  r.max_min_spread = *hi - *lo;
  return r;
}

namespace detail {

// Width (in dose units) of the contiguous passing run that contains dose 0.
inline double window_width(const std::vector<double>& dose, const std::vector<bool>& ok) {
  std::size_t zero = dose.size();
  for (std::size_t i = 0; i < dose.size(); ++i)
    if (dose[i] == 0.0) zero = i;
  if (zero == dose.size() || !ok[zero]) return 0.0;
  std::size_t lo = zero, hi = zero;
  while (lo > 0 && ok[lo - 1]) --lo;
  while (hi + 1 < dose.size() && ok[hi + 1]) ++hi;
  return dose[hi] - dose[lo];
}

}  // namespace detail

/// Process-window curve of a mask.
///
/// Every (defocus, dose) grid point passes iff the binary-resist print is
/// within pass_ede_nm of the target (EDE). For each focus half-range a, the
/// doses passing at every sampled focus with |h| <= a are intersected and
/// the contiguous run through dose 0 gives the EL at DOF = 2a.
inline PwCurve pw_curve(const ScalarField& mask, const ScalarField& target, const ilt::KernelsByDefocus& kernels,
                        std::vector<double> dose_grid, double pass_ede_nm, const ilt::IltConfig& cfg) {
  require_same_shape(mask, target, "pw_curve");
  if (kernels.empty()) throw std::invalid_argument("pw_curve: no kernel sets");
  if (!ilt::find_kernels(kernels, 0.0)) throw std::invalid_argument("pw_curve: best-focus (0 nm) kernels required");
  std::sort(dose_grid.begin(), dose_grid.end());
  if (std::find(dose_grid.begin(), dose_grid.end(), 0.0) == dose_grid.end())
    throw std::invalid_argument("pw_curve: dose grid must contain 0");
  for (std::size_t i = 0; i < dose_grid.size(); ++i)
    if (std::abs(dose_grid[i] + dose_grid[dose_grid.size() - 1 - i]) > 1e-12)
      throw std::invalid_argument("pw_curve: dose grid must be symmetric about 0");

  PwCurve curve;
  curve.dose = dose_grid;
  for (const auto& [h, ks] : kernels) {
    curve.defocus.push_back(h);
    const lithosim::Imager imager(ks, mask.width(), mask.height());
    const ScalarField intensity = imager.intensity(mask);
    std::vector<bool> row;
    for (double t : dose_grid) {
      const ScalarField wafer = lithosim::resist_step(intensity, lithosim::ResistParams{cfg.i_th, cfg.theta_z, t});
      row.push_back(ede(wafer, target, mask.pixel_size()) <= pass_ede_nm);
    }
    curve.el_by_defocus.push_back(100.0 * detail::window_width(dose_grid, row));
    curve.pass.push_back(std::move(row));
  }

  std::vector<double> half_ranges;
  for (double h : curve.defocus) half_ranges.push_back(std::abs(h));
  std::sort(half_ranges.begin(), half_ranges.end());
  half_ranges.erase(std::unique(half_ranges.begin(), half_ranges.end()), half_ranges.end());
  for (double a : half_ranges) {
    std::vector<bool> ok(dose_grid.size(), true);
    for (std::size_t i = 0; i < curve.defocus.size(); ++i) {
      if (std::abs(curve.defocus[i]) > a) continue;
      for (std::size_t j = 0; j < ok.size(); ++j) ok[j] = ok[j] && curve.pass[i][j];
    }
    curve.samples.emplace_back(2.0 * a, 100.0 * detail::window_width(dose_grid, ok));
  }
  for (std::size_t i = 1; i < curve.samples.size(); ++i) {
    const auto [d0, e0] = curve.samples[i - 1];
    const auto [d1, e1] = curve.samples[i];
    curve.area += 0.5 * (e0 + e1) * (d1 - d0);
  }
  return curve;
}

/// Target boundary pixels: outside pixels 4-adjacent to an inside pixel.
inline std::vector<std::pair<int, int>> boundary_pixels(const ScalarField& target) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (target(x, y) != 0.0) continue;
      const bool edge = (x > 0 && target(x - 1, y) == 1.0) || (x + 1 < target.width() && target(x + 1, y) == 1.0) ||
                        (y > 0 && target(x, y - 1) == 1.0) || (y + 1 < target.height() && target(x, y + 1) == 1.0);
      if (edge) out.emplace_back(x, y);
    }
  return out;
}

/// Minimum image log slope |grad ln I| over target boundary pixels, in 1/um.
inline double worst_ils(const ScalarField& intensity, const ScalarField& target, double pixel_size) {
  require_same_shape(intensity, target, "worst_ils");
  if (!(pixel_size > 0.0)) throw std::invalid_argument("worst_ils: pixel_size must be positive");
  const auto edge = boundary_pixels(target);
  if (edge.empty()) throw std::invalid_argument("worst_ils: target has no boundary");
  auto log_at = [&](int x, int y) {
    const double v = intensity(x, y);
    if (!(v > 0.0)) throw std::invalid_argument("worst_ils: zero intensity at an edge pixel, log slope undefined");
    return std::log(v);
  };
  const double per_um = 1000.0 / pixel_size;
  double worst = std::numeric_limits<double>::infinity();
  for (auto [x, y] : edge) {
    const int w = intensity.width(), h = intensity.height();
    double dx, dy;
    if (x == 0) dx = log_at(1, y) - log_at(0, y);
    else if (x == w - 1) dx = log_at(w - 1, y) - log_at(w - 2, y);
    else dx = 0.5 * (log_at(x + 1, y) - log_at(x - 1, y));
    if (y == 0) dy = log_at(x, 1) - log_at(x, 0);
    else if (y == h - 1) dy = log_at(x, h - 1) - log_at(x, h - 2);
    else dy = 0.5 * (log_at(x, y + 1) - log_at(x, y - 1));
    log_at(x, y);
    worst = std::min(worst, std::hypot(dx, dy) * per_um);
  }
  return worst;
}

}  // namespace ildls::analysis
