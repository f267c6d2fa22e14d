#pragma once

// On-disk formats. All binary formats are little-endian.
//   PGM (P5, maxval 255) for binary patterns: 255 = feature, 0 = background.
//   F64 raw dump: width u32, height u32, pixel_size f64, then width*height
//     f64 row-major.
//   LKRN kernel file: "LKRN", version u32 = 1, K u32, kernel_size u32,
//     pixel_size f64, defocus f64, K weights f64, then K*S*S (re, im) f64.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ildls/field.hpp"
#include "ildls/lithosim.hpp"

namespace ildls::io {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Writes through a sibling temp file and renames it over `path`, so readers
/// never see a half-written artifact.
inline void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
public:
  Reader(std::string_view data, std::string tag) : data_(data), tag_(std::move(tag)) {}

  template <class T>
  T get() {
    if (data_.size() - pos_ < sizeof(T)) throw FormatError(tag_ + ": unexpected end of file");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError(tag_ + ": unexpected end of file");
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  bool done() const noexcept { return pos_ == data_.size(); }

private:
  std::string_view data_;
  std::string tag_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM

inline std::string encode_pgm(const ScalarField& pattern) {
  std::string out = "P5\n" + std::to_string(pattern.width()) + " " + std::to_string(pattern.height()) + "\n255\n";
  out.reserve(out.size() + pattern.size());
  for (double v : pattern.values()) out.push_back(static_cast<char>(v >= 0.5 ? 255 : 0));
  return out;
}

/// Pixels >= 128 read as 1. Accepts '#' comments in the header.
inline ScalarField decode_pgm(std::string_view data, double pixel_size) {
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw FormatError("PGM: truncated header");
    return std::string(data.substr(start, pos - start));
  };
  if (token() != "P5") throw FormatError("PGM: only binary P5 files are supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw FormatError("PGM: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError("PGM: unsupported dimensions or maxval");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() < pos || data.size() - pos < n) throw FormatError("PGM: unexpected end of file");
  ScalarField f(w, h, pixel_size);
  const int cut = (maxval + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) f[i] = static_cast<unsigned char>(data[pos + i]) >= cut ? 1.0 : 0.0;
  return f;
}

inline void write_pgm(const std::filesystem::path& path, const ScalarField& pattern) {
  atomic_write(path, encode_pgm(pattern));
}

inline ScalarField read_pgm(const std::filesystem::path& path, double pixel_size) {
  return decode_pgm(read_file(path), pixel_size);
}

// ---------------------------------------------------------------------------
// Raw f64 field dump

inline std::string encode_f64(const ScalarField& f) {
  std::string out;
  out.reserve(16 + 8 * f.size());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.width()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.height()));
  detail::put<double>(out, f.pixel_size());
  out.append(reinterpret_cast<const char*>(f.values().data()), 8 * f.size());
  return out;
}

inline ScalarField decode_f64(std::string_view data) {
  detail::Reader r(data, "F64");
  const auto w = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  const auto pixel = r.get<double>();
  if (w > (1u << 16) || h > (1u << 16)) throw FormatError("F64: implausible dimensions");
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  const auto raw = r.bytes(8 * v.size());
  std::memcpy(v.data(), raw.data(), raw.size());
  if (!r.done()) throw FormatError("F64: trailing bytes");
  try {
    return ScalarField(static_cast<int>(w), static_cast<int>(h), pixel, std::move(v));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("F64: ") + e.what());
  }
}

inline void write_f64(const std::filesystem::path& path, const ScalarField& f) { atomic_write(path, encode_f64(f)); }

inline ScalarField read_f64(const std::filesystem::path& path) { return decode_f64(read_file(path)); }

// ---------------------------------------------------------------------------
// LKRN kernel sets

inline constexpr std::uint32_t kLkrnVersion = 1;

inline std::string encode_lkrn(const lithosim::KernelSet& ks) {
  ks.validate();
  std::string out = "LKRN";
  detail::put<std::uint32_t>(out, kLkrnVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ks.count()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ks.kernel_size));
  detail::put<double>(out, ks.pixel_size);
  detail::put<double>(out, ks.defocus);
  for (double w : ks.weights) detail::put<double>(out, w);
  for (const auto& k : ks.kernels)
    for (const auto& z : k) {
      detail::put<double>(out, z.real());
      detail::put<double>(out, z.imag());
    }
  return out;
}

inline lithosim::KernelSet decode_lkrn(std::string_view data) {
  detail::Reader r(data, "LKRN");
  if (r.bytes(4) != "LKRN") throw FormatError("LKRN: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kLkrnVersion) throw FormatError("LKRN: unsupported version " + std::to_string(version));
  const auto k = r.get<std::uint32_t>();
  const auto s = r.get<std::uint32_t>();
  if (s == 0 || s > 4095 || k == 0 || k > s * s) throw FormatError("LKRN: implausible kernel count or size");
  lithosim::KernelSet ks;
  ks.kernel_size = static_cast<int>(s);
  ks.pixel_size = r.get<double>();
  ks.defocus = r.get<double>();
  for (std::uint32_t i = 0; i < k; ++i) ks.weights.push_back(r.get<double>());
  ks.kernels.assign(k, std::vector<lithosim::complex>(static_cast<std::size_t>(s) * s));
  for (auto& kernel : ks.kernels)
    for (auto& z : kernel) {
      const double re = r.get<double>();
      const double im = r.get<double>();
      z = {re, im};
    }
  if (!r.done()) throw FormatError("LKRN: trailing bytes");
  try {
    ks.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("LKRN: ") + e.what());
  }
  return ks;
}

inline void write_lkrn(const std::filesystem::path& path, const lithosim::KernelSet& ks) {
  atomic_write(path, encode_lkrn(ks));
}

inline lithosim::KernelSet read_lkrn(const std::filesystem::path& path) { return decode_lkrn(read_file(path)); }

/// kernels_defocus_<h>.lkrn with h printed as a signed integer when whole.
inline std::string kernel_file_name(double defocus) {
  char buf[64];
  if (defocus == static_cast<double>(static_cast<long long>(defocus)))
    std::snprintf(buf, sizeof buf, "kernels_defocus_%lld.lkrn", static_cast<long long>(defocus));
  else
    std::snprintf(buf, sizeof buf, "kernels_defocus_%g.lkrn", defocus);
  return buf;
}

// ---------------------------------------------------------------------------
// Text outputs

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string encode_loss_csv(std::span<const double> trace) {
  std::string out = "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i) + "," + format_double(trace[i]) + "\n";
  return out;
}

}  // namespace ildls::io
