#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ildls/field.hpp"

namespace ildls::levelset {

/// Implicit mask boundary. Convention: psi <= 0 is inside (mask = 1).
class LevelSet {
public:
  LevelSet() = default;

  explicit LevelSet(ScalarField field) : field_(std::move(field)) {
    if (!field_.all_finite()) {
      throw std::invalid_argument("LevelSet: values must be finite");
    }
  }

  const ScalarField& field() const noexcept { return field_; }
  int width() const noexcept { return field_.width(); }
  int height() const noexcept { return field_.height(); }
  double pixel_size() const noexcept { return field_.pixel_size(); }
  double operator()(int x, int y) const noexcept { return field_(x, y); }

  bool has_interface() const noexcept {
    bool neg = false, pos = false;
    for (double v : field_.values()) {
      if (v <= 0.0) neg = true; else pos = true;
      if (neg && pos) return true;
    }
    return false;
  }

private:
  ScalarField field_;
};

namespace detail {

inline constexpr double kFar = 1e20;

// Exact 1D squared distance transform (lower envelope of parabolas).
// f holds 0 at feature samples and kFar elsewhere; d receives the result.
inline void distance_transform_1d(const double* f, double* d, int n, std::vector<int>& v,
                                  std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

// Squared Euclidean distance (pixel centers) from every pixel to the nearest
// pixel whose mask value equals `feature`.
inline std::vector<double> squared_distance_to(const ScalarField& mask, double feature) {
  const int w = mask.width(), h = mask.height();
  std::vector<double> g(mask.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask[i] == feature ? 0.0 : kFar;

  const int n = std::max(w, h);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v;
  std::vector<double> z;

  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = g[mask.index(x, y)];
    distance_transform_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) g[mask.index(x, y)] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = g[mask.index(x, y)];
    distance_transform_1d(f.data(), d.data(), w, v, z);
    for (int x = 0; x < w; ++x) g[mask.index(x, y)] = d[static_cast<std::size_t>(x)];
  }
  return g;
}

inline int clamp_index(int i, int n) noexcept { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

struct Derivatives {
  double dx, dy;
};

// Central differences inside, one-sided at the domain border.
inline Derivatives first_derivatives(const ScalarField& f, int x, int y) noexcept {
  const int w = f.width(), h = f.height();
  double dx, dy;
  if (x == 0) dx = f(1, y) - f(0, y);
  else if (x == w - 1) dx = f(w - 1, y) - f(w - 2, y);
  else dx = 0.5 * (f(x + 1, y) - f(x - 1, y));
  if (y == 0) dy = f(x, 1) - f(x, 0);
  else if (y == h - 1) dy = f(x, h - 1) - f(x, h - 2);
  else dy = 0.5 * (f(x, y + 1) - f(x, y - 1));
  return {dx, dy};
}

}  // namespace detail

/// Signed Euclidean distance of a binary mask, in pixels.
///
/// Each pixel gets the center-to-center distance d to the nearest pixel of
/// the opposite phase, mapped to -(d - 0.5) inside and +(d - 0.5) outside so
/// the zero level sits on the pixel boundary. Uses an exact separable
/// distance transform. Throws when the mask has no 0/1 interface.
inline LevelSet signed_distance(const ScalarField& mask) {
  if (!is_binary(mask)) {
    throw std::invalid_argument("signed_distance: mask must be binary");
  }
  const std::size_t ones = count_ones(mask);
  if (ones == 0 || ones == mask.size()) {
    throw std::invalid_argument("no interface: signed distance of a uniform mask is undefined");
  }
  const std::vector<double> to_outside = detail::squared_distance_to(mask, 0.0);
  const std::vector<double> to_inside = detail::squared_distance_to(mask, 1.0);

  ScalarField psi(mask.width(), mask.height(), mask.pixel_size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    psi[i] = mask[i] == 1.0 ? -(std::sqrt(to_outside[i]) - 0.5) : std::sqrt(to_inside[i]) - 0.5;
  }
  return LevelSet(std::move(psi));
}

/// Binary mask: 1 where psi <= 0.
inline ScalarField mask_from_levelset(const LevelSet& psi) {
  ScalarField mask(psi.width(), psi.height(), psi.pixel_size());
  const ScalarField& f = psi.field();
  for (std::size_t i = 0; i < f.size(); ++i) mask[i] = f[i] <= 0.0 ? 1.0 : 0.0;
  return mask;
}

inline ScalarField grad_magnitude(const LevelSet& psi) {
  const ScalarField& f = psi.field();
  ScalarField out(f.width(), f.height(), f.pixel_size());
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const auto d = detail::first_derivatives(f, x, y);
      out(x, y) = std::hypot(d.dx, d.dy);
    }
  }
  return out;
}

inline constexpr double kCurvatureEps = 1e-8;

/// Mean curvature div(grad psi / |grad psi|), per pixel.
///
/// Expanded form (psi_xx psi_y^2 - 2 psi_x psi_y psi_xy + psi_yy psi_x^2) /
/// |grad psi|^3 with |grad psi| floored at eps. Second differences use
/// replicated edge samples at the border.
inline ScalarField curvature(const LevelSet& psi, double eps = kCurvatureEps) {
  if (!(eps > 0.0)) throw std::invalid_argument("curvature: eps must be positive");
  const ScalarField& f = psi.field();
  const int w = f.width(), h = f.height();
  ScalarField out(w, h, f.pixel_size());
  using detail::clamp_index;
  for (int y = 0; y < h; ++y) {
    const int ym = clamp_index(y - 1, h), yp = clamp_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = clamp_index(x - 1, w), xp = clamp_index(x + 1, w);
      const auto d = detail::first_derivatives(f, x, y);
      const double c = f(x, y);
      const double dxx = f(xp, y) - 2.0 * c + f(xm, y);
      const double dyy = f(x, yp) - 2.0 * c + f(x, ym);
      const double dxy = 0.25 * (f(xp, yp) - f(xp, ym) - f(xm, yp) + f(xm, ym));
      const double g = std::max(std::hypot(d.dx, d.dy), eps);
      out(x, y) = (dxx * d.dy * d.dy - 2.0 * d.dx * d.dy * dxy + dyy * d.dx * d.dx) / (g * g * g);
    }
  }
  return out;
}

/// psi + dt * dpsi_dt.
inline LevelSet evolve_step(const LevelSet& psi, const ScalarField& dpsi_dt, double dt) {
  require_same_shape(psi.field(), dpsi_dt, "evolve_step");
  if (!(dt > 0.0)) throw std::invalid_argument("evolve_step: dt must be positive");
  ScalarField next = psi.field();
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += dt * dpsi_dt[i];
  return LevelSet(std::move(next));
}

/// Restore the signed-distance property without moving the mask.
inline LevelSet reinitialize(const LevelSet& psi) {
  if (!psi.has_interface()) {
    throw std::invalid_argument("no interface: level set has a uniform sign");
  }
  return signed_distance(mask_from_levelset(psi));
}

}  // namespace ildls::levelset
