#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ildls/field.hpp"

namespace ildls::layout {

/// Axis-aligned rectangle in nm; covers [x, x + w) x [y, y + h).
struct Rect {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct LayoutSpec {
  std::vector<Rect> rects;
  double min_cd = 80.0;  // nm
  friend bool operator==(const LayoutSpec&, const LayoutSpec&) = default;
};

struct Layout {
  LayoutSpec spec;
  ScalarField target;
};

/// 1 where the pixel center lies inside any rectangle.
inline ScalarField rasterize(const LayoutSpec& spec, int width, int height, double pixel_size) {
  ScalarField out(width, height, pixel_size);
  const double ew = width * pixel_size, eh = height * pixel_size;
  for (const Rect& r : spec.rects) {
    if (!(r.w > 0.0 && r.h > 0.0)) throw std::invalid_argument("rasterize: rectangle with non-positive size");
    if (r.x < 0.0 || r.y < 0.0 || r.right() > ew || r.bottom() > eh)
      throw std::invalid_argument("rasterize: rectangle outside the grid extent");
    // centers (i + 0.5) p in [x, x + w)
    const int x0 = std::max(0, static_cast<int>(std::ceil(r.x / pixel_size - 0.5)));
    const int x1 = std::min(width, static_cast<int>(std::ceil(r.right() / pixel_size - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(r.y / pixel_size - 0.5)));
    const int y1 = std::min(height, static_cast<int>(std::ceil(r.bottom() / pixel_size - 0.5)));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) out(x, y) = 1.0;
  }
  return out;
}

/// Shortest run of 1s, and of 0s bounded by 1s on both sides, over all rows
/// and columns, in pixels. A grid with no such run reports INT_MAX for it.
struct RunLengths {
  int min_feature = INT32_MAX;
  int min_space = INT32_MAX;
};

inline RunLengths run_lengths(const ScalarField& f) {
  RunLengths out;
  auto scan = [&](int n, auto at) {
    int i = 0;
    while (i < n) {
      int j = i;
      while (j < n && at(j) == at(i)) ++j;
      if (at(i) == 1.0)
        out.min_feature = std::min(out.min_feature, j - i);
      else if (i > 0 && j < n)
        out.min_space = std::min(out.min_space, j - i);
      i = j;
    }
  };
  for (int y = 0; y < f.height(); ++y) scan(f.width(), [&](int x) { return f(x, y); });
  for (int x = 0; x < f.width(); ++x) scan(f.height(), [&](int y) { return f(x, y); });
  return out;
}

struct GeneratorParams {
  int width = 512;
  int height = 512;
  double pixel_size = 8.0;
  double min_cd = 80.0;
  int min_rects = 2;
  int max_rects = 8;
  double min_area_fraction = 0.02;
  double max_area_fraction = 0.60;
};

namespace detail {

// Rectangles either join along a contact at least min_cd wide, or keep a
// Euclidean gap of at least min_cd.
inline bool compatible(const Rect& a, const Rect& b, double min_cd) {
  const double gx = std::max(0.0, std::max(a.x, b.x) - std::min(a.right(), b.right()));
  const double gy = std::max(0.0, std::max(a.y, b.y) - std::min(a.bottom(), b.bottom()));
  if (gx > 0.0 || gy > 0.0) return std::hypot(gx, gy) >= min_cd;
  const double ox = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double oy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return std::max(ox, oy) >= min_cd;
}

inline int draw(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace detail

/// Random Manhattan wire layouts with min-CD width and spacing.
///
/// Rectangles are wire segments on the pixel grid: width in [min_cd,
/// 2 min_cd], length up to half the clip, one min_cd clear of the clip
/// border. A candidate is kept only if it is compatible with every placed
/// rectangle and the raster still has no run of 1s, or of enclosed 0s,
/// shorter than min_cd. Layouts whose area fraction falls outside the limits
/// are redrawn.
inline std::vector<Layout> gen_layouts(int count, const GeneratorParams& p, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("gen_layouts: count must be >= 1");
  if (!(p.pixel_size > 0.0) || !(p.min_cd > 0.0)) throw std::invalid_argument("gen_layouts: sizes must be positive");
  if (p.min_rects < 1 || p.max_rects < p.min_rects) throw std::invalid_argument("gen_layouts: bad rectangle count range");
  const int cd = static_cast<int>(std::ceil(p.min_cd / p.pixel_size - 1e-9));  // px
  const int margin = cd;
  const int span_x = p.width - 2 * margin, span_y = p.height - 2 * margin;
  if (span_x < cd || span_y < cd)
    throw std::invalid_argument("gen_layouts: grid too small for one min-CD feature inside the border margin");
  const double total = static_cast<double>(p.width) * p.height;
  if (static_cast<double>(cd) * cd > p.max_area_fraction * total)
    throw std::invalid_argument("gen_layouts: one min-CD square already exceeds the area limit");

  std::mt19937_64 rng(seed);
  std::vector<Layout> out;
  constexpr int kLayoutAttempts = 500;
  constexpr int kRectAttempts = 200;
  for (int n = 0; n < count; ++n) {
    bool done = false;
    for (int attempt = 0; attempt < kLayoutAttempts && !done; ++attempt) {
      const int want = detail::draw(rng, p.min_rects, p.max_rects);
      LayoutSpec spec;
      spec.min_cd = p.min_cd;
      for (int tries = 0; tries < kRectAttempts && static_cast<int>(spec.rects.size()) < want; ++tries) {
        const bool horizontal = detail::draw(rng, 0, 1) == 1;
        const int along = horizontal ? span_x : span_y;
        const int across = horizontal ? span_y : span_x;
        const int thick = detail::draw(rng, cd, std::min(2 * cd, across));
        const int len = detail::draw(rng, std::min(cd, along), std::max(cd, std::min(along, std::max(p.width, p.height) / 2)));
        if (len > along) continue;
        const int pa = margin + detail::draw(rng, 0, along - len);
        const int pc = margin + detail::draw(rng, 0, across - thick);
        Rect r = horizontal ? Rect{double(pa), double(pc), double(len), double(thick)}
                            : Rect{double(pc), double(pa), double(thick), double(len)};
        r.x *= p.pixel_size;
        r.y *= p.pixel_size;
        r.w *= p.pixel_size;
        r.h *= p.pixel_size;
        if (!std::all_of(spec.rects.begin(), spec.rects.end(),
                         [&](const Rect& o) { return detail::compatible(o, r, p.min_cd); }))
          continue;
        spec.rects.push_back(r);
        const RunLengths runs = run_lengths(rasterize(spec, p.width, p.height, p.pixel_size));
        if (runs.min_feature < cd || runs.min_space < cd) spec.rects.pop_back();
      }
      if (static_cast<int>(spec.rects.size()) < p.min_rects) continue;
      ScalarField target = rasterize(spec, p.width, p.height, p.pixel_size);
      const double frac = static_cast<double>(count_ones(target)) / total;
      if (frac < p.min_area_fraction || frac > p.max_area_fraction) continue;
      out.push_back({std::move(spec), std::move(target)});
      done = true;
    }
    if (!done)
      throw std::runtime_error("gen_layouts: could not satisfy the min-CD and area constraints on this grid");
  }
  return out;
}

}  // namespace ildls::layout
