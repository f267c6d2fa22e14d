#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <stdexcept>

namespace ildls::fft {

using complex = std::complex<double>;

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
inline int good_size(int n) {
  if (n < 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// FFTW's planner is not thread-safe; execution of an existing plan is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// SIMD-aligned complex buffer from fftw_malloc.
class Buffer {
public:
  Buffer() = default;
  explicit Buffer(std::size_t n) : size_(n) {
    if (n == 0) return;
    data_.reset(static_cast<complex*>(fftw_malloc(sizeof(complex) * n)));
    if (!data_) throw std::bad_alloc();
    zero();
  }
  Buffer(const Buffer& o) : Buffer(o.size_) {
    for (std::size_t i = 0; i < size_; ++i) data_[i] = o.data_[i];
  }
  Buffer(Buffer&&) noexcept = default;
  Buffer& operator=(Buffer&&) noexcept = default;
  Buffer& operator=(const Buffer& o) {
    if (this != &o) *this = Buffer(o);
    return *this;
  }

  complex* data() noexcept { return data_.get(); }
  const complex* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  complex& operator[](std::size_t i) noexcept { return data_[i]; }
  const complex& operator[](std::size_t i) const noexcept { return data_[i]; }
  void zero() noexcept {
    for (std::size_t i = 0; i < size_; ++i) data_[i] = complex(0.0, 0.0);
  }

private:
  struct Free {
    void operator()(complex* p) const noexcept { fftw_free(p); }
  };
  std::unique_ptr<complex[], Free> data_;
  std::size_t size_ = 0;
};

/// In-place 2D complex DFT pair for a fixed rows x cols shape. Unnormalized.
///
/// Plans are made with FFTW_ESTIMATE so the chosen algorithm, and therefore
/// every output bit, does not depend on timing.
class Plan2d {
public:
  Plan2d(int rows, int cols) : rows_(rows), cols_(cols) {
    Buffer scratch(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward_ = fftw_plan_dft_2d(rows, cols, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_2d(rows, cols, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward_ || !inverse_) throw std::runtime_error("fftw: plan creation failed");
  }
  Plan2d(const Plan2d&) = delete;
  Plan2d& operator=(const Plan2d&) = delete;
  ~Plan2d() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_); }

  void forward(Buffer& b) const { execute(forward_, b); }
  void inverse(Buffer& b) const { execute(inverse_, b); }

private:
  void execute(fftw_plan plan, Buffer& b) const {
    if (b.size() != size()) throw std::invalid_argument("fftw: buffer size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(b.data());
    fftw_execute_dft(plan, p, p);
  }

  int rows_;
  int cols_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace ildls::fft
