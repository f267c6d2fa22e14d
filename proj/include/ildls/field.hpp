#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ildls {

/// Dense row-major 2D grid of reals with a physical pixel pitch in nm.
///
/// One type carries every image-like quantity of the engine: masks, aerial
/// images, resist patterns and level-set values. Element (x, y) is column x,
/// row y.
class ScalarField {
public:
  static constexpr int kMinExtent = 8;

  ScalarField() = default;

  ScalarField(int width, int height, double pixel_size, double fill = 0.0)
      : width_(width), height_(height), pixel_size_(pixel_size) {
    if (width < kMinExtent || height < kMinExtent) {
      throw std::invalid_argument("ScalarField: extent must be at least 8x8, got " +
                                  std::to_string(width) + "x" + std::to_string(height));
    }
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
      throw std::invalid_argument("ScalarField: pixel_size must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  ScalarField(int width, int height, double pixel_size, std::vector<double> values)
      : ScalarField(width, height, pixel_size) {
    if (values.size() != data_.size()) {
      throw std::invalid_argument("ScalarField: data length does not match width*height");
    }
    data_ = std::move(values);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double pixel_size() const noexcept { return pixel_size_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  double operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& vector() const noexcept { return data_; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  bool same_shape(const ScalarField& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const ScalarField& a, const ScalarField& b) noexcept {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.pixel_size_ == b.pixel_size_ &&
           a.data_ == b.data_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  double pixel_size_ = 1.0;
  std::vector<double> data_;
};

inline void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) +
                                "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                "x" + std::to_string(b.height()) + ")");
  }
}

inline bool is_binary(const ScalarField& f) noexcept {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return v == 0.0 || v == 1.0; });
}

inline std::size_t count_ones(const ScalarField& f) noexcept {
  return static_cast<std::size_t>(std::count(f.values().begin(), f.values().end(), 1.0));
}

}  // namespace ildls
