#pragma once

// Run configuration: a flat key = value text file with dotted keys, '#'
// comments, and comma-separated lists. Every key has a default; unknown keys
// and unparsable values are rejected with the key named in the message.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ildls/ilt.hpp"
#include "ildls/lithosim.hpp"

namespace ildls::config {

struct ConfigError : std::invalid_argument {
  ConfigError(const std::string& key, const std::string& what) : std::invalid_argument(what), key(key) {}
  std::string key;
};

struct RunConfig {
  int width = 512;
  int height = 512;
  double pixel_size = 8.0;  // nm
  std::uint64_t seed = 42;

  lithosim::OpticsParams optics;
  int kernel_count = 24;
  lithosim::ResistParams resist;

  ilt::IltConfig ilt;
  bool process_variation = false;
  double pv_defocus = 80.0;
  double pv_dose = 0.1;

  std::vector<double> pw_defocus{-120.0, -80.0, -40.0, 0.0, 40.0, 80.0, 120.0};
  double pw_dose_max = 0.2;
  double pw_dose_step = 0.01;
  double pw_pass_ede = 8.0;

  int layout_count = 20;
  double min_cd = 80.0;
  int min_rects = 2;
  int max_rects = 8;

  /// Optimizer settings with the resist parameters and condition grid applied.
  ilt::IltConfig ilt_config() const {
    ilt::IltConfig c = ilt;
    c.i_th = resist.threshold;
    c.theta_z = resist.steepness;
    if (process_variation)
      c.use_grid({-pv_defocus, 0.0, pv_defocus}, {-pv_dose, 0.0, pv_dose});
    else
      c.conditions = {ilt::ProcessCondition{}};
    return c;
  }

  lithosim::OpticsParams optics_params() const {
    lithosim::OpticsParams o = optics;
    o.pixel_size = pixel_size;
    return o;
  }

  std::vector<double> pw_doses() const {
    const int n = static_cast<int>(std::floor(pw_dose_max / pw_dose_step + 1e-9));
    std::vector<double> out;
    for (int i = -n; i <= n; ++i) out.push_back(i * pw_dose_step);
    return out;
  }

  /// Every defocus any subcommand may need kernels for, ascending.
  std::vector<double> all_defocus() const {
    std::set<double> s(pw_defocus.begin(), pw_defocus.end());
    s.insert(0.0);
    if (process_variation) {
      s.insert(-pv_defocus);
      s.insert(pv_defocus);
    }
    return {s.begin(), s.end()};
  }

  void validate() const {
    if (width < 8 || height < 8) throw ConfigError("grid.width", "grid must be at least 8 x 8");
    if (!(pixel_size > 0.0)) throw ConfigError("grid.pixel_size", "grid.pixel_size must be positive");
    if (kernel_count < 1) throw ConfigError("optics.kernel_count", "optics.kernel_count must be >= 1");
    if (!(pw_dose_step > 0.0) || !(pw_dose_max >= 0.0))
      throw ConfigError("pw.dose_step", "pw.dose_step must be positive and pw.dose_max non-negative");
    if (layout_count < 1) throw ConfigError("layout.count", "layout.count must be >= 1");
    if (min_rects < 1 || max_rects < min_rects)
      throw ConfigError("layout.max_rects", "need 1 <= layout.min_rects <= layout.max_rects");
    try {
      optics_params().validate();
      resist.validate();
      ilt_config().validate();
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      throw ConfigError(what.substr(0, what.find(' ')), what);
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, std::string_view text) {
  text = trim(text);
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw ConfigError(key, "invalid value for '" + key + "': '" + std::string(text) + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ConfigError(key, "invalid value for '" + key + "': must be finite");
  return v;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "invalid value for '" + key + "': expected true or false");
}

inline std::vector<double> parse_list(const std::string& key, std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<double>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError(key, "invalid value for '" + key + "': empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::string_view)>;

template <class T, class F>
Setter number(F field) {
  return [field](RunConfig& c, const std::string& k, std::string_view v) { field(c) = parse_number<T>(k, v); };
}

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"grid.width", number<int>([](RunConfig& c) -> int& { return c.width; })},
      {"grid.height", number<int>([](RunConfig& c) -> int& { return c.height; })},
      {"grid.pixel_size", number<double>([](RunConfig& c) -> double& { return c.pixel_size; })},
      {"seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; })},
      {"optics.wavelength", number<double>([](RunConfig& c) -> double& { return c.optics.wavelength; })},
      {"optics.na", number<double>([](RunConfig& c) -> double& { return c.optics.numerical_aperture; })},
      {"optics.sigma", number<double>([](RunConfig& c) -> double& { return c.optics.partial_coherence_sigma; })},
      {"optics.kernel_size", number<int>([](RunConfig& c) -> int& { return c.optics.kernel_size; })},
      {"optics.kernel_count", number<int>([](RunConfig& c) -> int& { return c.kernel_count; })},
      {"resist.threshold", number<double>([](RunConfig& c) -> double& { return c.resist.threshold; })},
      {"resist.steepness", number<double>([](RunConfig& c) -> double& { return c.resist.steepness; })},
      {"resist.dose", number<double>([](RunConfig& c) -> double& { return c.resist.dose_latitude; })},
      {"ilt.gamma", number<double>([](RunConfig& c) -> double& { return c.ilt.gamma; })},
      {"ilt.lambda", number<double>([](RunConfig& c) -> double& { return c.ilt.lambda_tv; })},
      {"ilt.alpha", number<double>([](RunConfig& c) -> double& { return c.ilt.alpha; })},
      {"ilt.dt", number<double>([](RunConfig& c) -> double& { return c.ilt.dt; })},
      {"ilt.max_iters", number<int>([](RunConfig& c) -> int& { return c.ilt.max_iters; })},
      {"ilt.reinit_every", number<int>([](RunConfig& c) -> int& { return c.ilt.reinit_every; })},
      {"ilt.sigma_h", number<double>([](RunConfig& c) -> double& { return c.ilt.sigma_h; })},
      {"ilt.sigma_q", number<double>([](RunConfig& c) -> double& { return c.ilt.sigma_q; })},
      {"ilt.stop_tolerance", number<double>([](RunConfig& c) -> double& { return c.ilt.stop_tolerance; })},
      {"ilt.stop_window", number<int>([](RunConfig& c) -> int& { return c.ilt.stop_window; })},
      {"ilt.process_variation",
       [](RunConfig& c, const std::string& k, std::string_view v) { c.process_variation = parse_bool(k, v); }},
      {"ilt.pv_defocus", number<double>([](RunConfig& c) -> double& { return c.pv_defocus; })},
      {"ilt.pv_dose", number<double>([](RunConfig& c) -> double& { return c.pv_dose; })},
      {"pw.defocus", [](RunConfig& c, const std::string& k, std::string_view v) { c.pw_defocus = parse_list(k, v); }},
      {"pw.dose_max", number<double>([](RunConfig& c) -> double& { return c.pw_dose_max; })},
      {"pw.dose_step", number<double>([](RunConfig& c) -> double& { return c.pw_dose_step; })},
      {"pw.pass_ede", number<double>([](RunConfig& c) -> double& { return c.pw_pass_ede; })},
      {"layout.count", number<int>([](RunConfig& c) -> int& { return c.layout_count; })},
      {"layout.min_cd", number<double>([](RunConfig& c) -> double& { return c.min_cd; })},
      {"layout.min_rects", number<int>([](RunConfig& c) -> int& { return c.min_rects; })},
      {"layout.max_rects", number<int>([](RunConfig& c) -> int& { return c.max_rects; })},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::setters()) out.push_back(k);
  return out;
}

/// Applies one key = value assignment.
inline void set(RunConfig& cfg, const std::string& key, std::string_view value) {
  const auto it = detail::setters().find(key);
  if (it == detail::setters().end()) throw ConfigError(key, "unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

/// Applies "key=value" (as given to --set).
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(std::string(detail::trim(assignment)), "override '" + std::string(assignment) + "' is not key=value");
  set(cfg, std::string(detail::trim(assignment.substr(0, eq))), assignment.substr(eq + 1));
}

inline void apply_text(RunConfig& cfg, std::string_view text) {
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      const std::string key(line);
      throw ConfigError(key, "line " + std::to_string(line_no) + ": expected key = value, got '" + key + "'");
    }
    set(cfg, std::string(detail::trim(line.substr(0, eq))), line.substr(eq + 1));
  }
}

inline RunConfig parse(std::string_view text) {
  RunConfig cfg;
  apply_text(cfg, text);
  cfg.validate();
  return cfg;
}

/// Canonical text form; parse(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto list = [](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  os << "grid.width = " << c.width << "\ngrid.height = " << c.height << "\ngrid.pixel_size = " << c.pixel_size
     << "\nseed = " << c.seed << "\noptics.wavelength = " << c.optics.wavelength
     << "\noptics.na = " << c.optics.numerical_aperture << "\noptics.sigma = " << c.optics.partial_coherence_sigma
     << "\noptics.kernel_size = " << c.optics.kernel_size << "\noptics.kernel_count = " << c.kernel_count
     << "\nresist.threshold = " << c.resist.threshold << "\nresist.steepness = " << c.resist.steepness
     << "\nresist.dose = " << c.resist.dose_latitude << "\nilt.gamma = " << c.ilt.gamma
     << "\nilt.lambda = " << c.ilt.lambda_tv << "\nilt.alpha = " << c.ilt.alpha << "\nilt.dt = " << c.ilt.dt
     << "\nilt.max_iters = " << c.ilt.max_iters << "\nilt.reinit_every = " << c.ilt.reinit_every
     << "\nilt.sigma_h = " << c.ilt.sigma_h << "\nilt.sigma_q = " << c.ilt.sigma_q
     << "\nilt.stop_tolerance = " << c.ilt.stop_tolerance << "\nilt.stop_window = " << c.ilt.stop_window
     << "\nilt.process_variation = " << (c.process_variation ? "true" : "false")
     << "\nilt.pv_defocus = " << c.pv_defocus << "\nilt.pv_dose = " << c.pv_dose
     << "\npw.defocus = " << list(c.pw_defocus) << "\npw.dose_max = " << c.pw_dose_max
     << "\npw.dose_step = " << c.pw_dose_step << "\npw.pass_ede = " << c.pw_pass_ede
     << "\nlayout.count = " << c.layout_count << "\nlayout.min_cd = " << c.min_cd
     << "\nlayout.min_rects = " << c.min_rects << "\nlayout.max_rects = " << c.max_rects << "\n";
  return os.str();
}

}  // namespace ildls::config
