#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ildls/field.hpp"
#include "ildls/levelset.hpp"
#include "ildls/lithosim.hpp"

namespace ildls::ilt {

using levelset::LevelSet;
using lithosim::Imager;
using lithosim::KernelSet;

/// Kernel sets keyed by defocus in nm.
using KernelsByDefocus = std::map<double, KernelSet>;

inline constexpr double kDefocusMatchTolerance = 1e-9;

inline const KernelSet* find_kernels(const KernelsByDefocus& kernels, double defocus) {
  for (const auto& [h, ks] : kernels)
    if (std::abs(h - defocus) <= kDefocusMatchTolerance) return &ks;
  return nullptr;
}

/// One sampled (defocus, dose) corner with its Gaussian weight xi * zeta.
struct ProcessCondition {
  double defocus = 0.0;  // nm
  double dose = 0.0;     // fractional exposure latitude t_q
  double weight = 1.0;

  static ProcessCondition make(double defocus, double dose, double sigma_h, double sigma_q) {
    const double xi = std::exp(-defocus * defocus / (2.0 * sigma_h * sigma_h));
    const double zeta = std::exp(-dose * dose / (2.0 * sigma_q * sigma_q));
    return {defocus, dose, xi * zeta};
  }

  bool is_nominal() const noexcept { return defocus == 0.0 && dose == 0.0; }
};

struct IltConfig {
  double gamma = 2.0;
  double theta_z = 50.0;
  double i_th = 0.225;
  double lambda_tv = 0.01;
  double alpha = 0.008;  // physics-loss weight, used by the trainer only
  double dt = 0.5;       // px per step on the max-normalized direction
  int max_iters = 100;
  int reinit_every = 20;
  double sigma_h = 80.0;  // nm
  double sigma_q = 0.1;
  double stop_tolerance = 1e-5;
  int stop_window = 10;
  std::vector<ProcessCondition> conditions{ProcessCondition{}};

  static IltConfig nominal() { return IltConfig{}; }

  /// 3 x 3 grid over (-defocus, 0, defocus) x (-dose, 0, dose).
  static IltConfig process_variation(double defocus = 80.0, double dose = 0.1) {
    IltConfig cfg;
    cfg.use_grid({-defocus, 0.0, defocus}, {-dose, 0.0, dose});
    return cfg;
  }

  void use_grid(const std::vector<double>& defocus, const std::vector<double>& doses) {
    conditions.clear();
    for (double h : defocus)
      for (double t : doses) conditions.push_back(ProcessCondition::make(h, t, sigma_h, sigma_q));
  }

  void refresh_weights() {
    for (auto& c : conditions) c = ProcessCondition::make(c.defocus, c.dose, sigma_h, sigma_q);
  }

  bool is_process_variation() const noexcept { return conditions.size() > 1; }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("ilt.dt must be positive");
    if (!(gamma >= 1.0)) throw std::invalid_argument("ilt.gamma must be >= 1");
    if (!(theta_z > 0.0)) throw std::invalid_argument("ilt.theta_z must be positive");
    if (!(i_th > 0.0)) throw std::invalid_argument("ilt.i_th must be positive");
    if (!(lambda_tv >= 0.0)) throw std::invalid_argument("ilt.lambda_tv must be non-negative");
    if (!(sigma_h > 0.0) || !(sigma_q > 0.0)) throw std::invalid_argument("ilt.sigma_h and ilt.sigma_q must be positive");
    if (max_iters < 1) throw std::invalid_argument("ilt.max_iters must be >= 1");
    if (reinit_every < 0) throw std::invalid_argument("ilt.reinit_every must be >= 0");
    if (conditions.empty()) throw std::invalid_argument("ilt: conditions must be non-empty");
    bool nominal = false;
    for (const auto& c : conditions) {
      if (!(c.weight > 0.0 && c.weight <= 1.0)) throw std::invalid_argument("ilt: condition weight outside (0, 1]");
      if (!(c.dose > -1.0)) throw std::invalid_argument("ilt: condition dose must exceed -1");
      if (c.is_nominal()) {
        nominal = true;
        if (c.weight != 1.0) throw std::invalid_argument("ilt: nominal condition must have weight 1");
      }
    }
    if (!nominal) throw std::invalid_argument("ilt: the nominal (0 nm, 0) condition must be present");
  }
};

struct OptResult {
  LevelSet final_psi;
  ScalarField final_mask;
  std::vector<double> loss_trace;
  int iterations_run = 0;
  int best_iteration = 0;
};

namespace detail {

// Sign-preserving power so odd exponents keep the sign of the residual.
inline double signed_pow(double d, double e) {
  if (e == 1.0) return d;
  return std::copysign(std::pow(std::abs(d), e), d);
}

inline double loss_term(double d, double gamma) {
  return gamma == 2.0 ? d * d : std::pow(std::abs(d), gamma);
}

// out += w * gamma (Z - Z_t)^(gamma-1) * theta Z (1 - Z), with Z the relaxed print.
inline void accumulate_residual(const ScalarField& intensity, const ScalarField& target, const IltConfig& cfg,
                                double dose, double weight, ScalarField& out) {
  const ScalarField z = lithosim::resist_sigmoid(intensity, lithosim::ResistParams{cfg.i_th, cfg.theta_z, dose});
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - target[i];
    out[i] += weight * (cfg.gamma * signed_pow(d, cfg.gamma - 1.0) * cfg.theta_z * z[i] * (1.0 - z[i]));
  }
}

}  // namespace detail

/// Sum over pixels of |Z - Z_t|^gamma.
inline double pattern_error(std::span<const double> z, std::span<const double> z_target, double gamma) {
  if (z.size() != z_target.size()) throw std::invalid_argument("pattern_error: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += detail::loss_term(z[i] - z_target[i], gamma);
  return sum;
}

inline double pattern_error(const ScalarField& z, const ScalarField& z_target, double gamma) {
  require_same_shape(z, z_target, "pattern_error");
  return pattern_error(z.values(), z_target.values(), gamma);
}

/// Process-weighted pattern error and its mask / level-set gradients for one
/// target. Holds one Imager per distinct defocus; immutable after
/// construction.
class LossModel {
public:
  struct MaskEvaluation {
    double loss = 0.0;
    ScalarField velocity;  // sum_conditions w * dL_aerial/dM
  };

  struct LevelSetEvaluation {
    double loss = 0.0;
    ScalarField gradient;  // dL/dpsi
  };

  LossModel(const ScalarField& target, const KernelsByDefocus& kernels, IltConfig cfg)
      : target_(target), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!is_binary(target_)) throw std::invalid_argument("ilt: target must be binary");
    for (const auto& c : cfg_.conditions) {
      const KernelSet* ks = find_kernels(kernels, c.defocus);
      if (!ks) {
        std::ostringstream os;
        os << "ilt: no kernel set for defocus " << c.defocus << " nm";
        throw std::invalid_argument(os.str());
      }
      if (std::abs(ks->pixel_size - target_.pixel_size()) > 1e-9 * target_.pixel_size())
        throw std::invalid_argument("ilt: kernel pixel_size does not match the target grid");
      bool seen = false;
      for (const auto& g : groups_)
        if (g.defocus == ks->defocus) seen = true;
      if (!seen) groups_.push_back(Group{ks->defocus, std::make_shared<Imager>(*ks, target_.width(), target_.height()), {}});
    }
    std::sort(groups_.begin(), groups_.end(), [](const Group& a, const Group& b) { return a.defocus < b.defocus; });
    for (const auto& c : cfg_.conditions)
      for (auto& g : groups_)
        if (std::abs(g.defocus - c.defocus) <= kDefocusMatchTolerance) g.conditions.push_back(c);
  }

  const IltConfig& config() const noexcept { return cfg_; }
  const ScalarField& target() const noexcept { return target_; }

  double loss(const ScalarField& mask) const {
    require_same_shape(mask, target_, "ilt loss");
    double total = 0.0;
    for (const auto& g : groups_) {
      const ScalarField intensity = g.imager->intensity(mask);
      for (const auto& c : g.conditions) total += c.weight * condition_loss(intensity, c.dose);
    }
    return total;
  }

  MaskEvaluation evaluate(const ScalarField& mask) const {
    require_same_shape(mask, target_, "ilt evaluate");
    MaskEvaluation out{0.0, ScalarField(mask.width(), mask.height(), mask.pixel_size())};
    for (const auto& g : groups_) {
      const Imager::Fields fields = g.imager->forward(mask);
      ScalarField weighted(mask.width(), mask.height(), mask.pixel_size());
      for (const auto& c : g.conditions) {
        out.loss += c.weight * condition_loss(fields.intensity, c.dose);
        detail::accumulate_residual(fields.intensity, target_, cfg_, c.dose, c.weight, weighted);
      }
      const ScalarField v = g.imager->adjoint(fields, weighted);
      for (std::size_t i = 0; i < v.size(); ++i) out.velocity[i] += v[i];
    }
    return out;
  }

  /// dL/dpsi = -(v + lambda * kappa) |grad psi|, with v evaluated on the
  /// binary mask of psi. The negated bracket is the outward-normal descent
  /// velocity of the level-set evolution.
  LevelSetEvaluation evaluate(const LevelSet& psi) const {
    require_same_shape(psi.field(), target_, "ilt levelset gradient");
    const MaskEvaluation m = evaluate(levelset::mask_from_levelset(psi));
    const ScalarField kappa = levelset::curvature(psi);
    const ScalarField norm = levelset::grad_magnitude(psi);
    LevelSetEvaluation out{m.loss, ScalarField(psi.width(), psi.height(), psi.pixel_size())};
    for (std::size_t i = 0; i < norm.size(); ++i)
      out.gradient[i] = -(m.velocity[i] + cfg_.lambda_tv * kappa[i]) * norm[i];
    return out;
  }

private:
  struct Group {
    double defocus;
    std::shared_ptr<const Imager> imager;
    std::vector<ProcessCondition> conditions;
  };

  double condition_loss(const ScalarField& intensity, double dose) const {
    lithosim::ResistParams r{cfg_.i_th, cfg_.theta_z, dose};
    return pattern_error(lithosim::resist_sigmoid(intensity, r), target_, cfg_.gamma);
  }

  ScalarField target_;
  IltConfig cfg_;
  std::vector<Group> groups_;
};

/// L_LS over every configured condition.
inline double total_error(const ScalarField& mask, const ScalarField& z_target, const KernelsByDefocus& kernels,
                          const IltConfig& cfg) {
  return LossModel(z_target, kernels, cfg).loss(mask);
}

/// dL_aerial/dM for a single kernel set and dose (the adjoint-form mask
/// gradient summed over the kernels of the set).
inline ScalarField grad_wrt_mask(const ScalarField& mask, const ScalarField& z_target, const KernelSet& kernels,
                                 double dose, const IltConfig& cfg) {
  require_same_shape(mask, z_target, "grad_wrt_mask");
  const Imager imager(kernels, mask.width(), mask.height());
  const Imager::Fields fields = imager.forward(mask);
  ScalarField g(mask.width(), mask.height(), mask.pixel_size());
  detail::accumulate_residual(fields.intensity, z_target, cfg, dose, 1.0, g);
  return imager.adjoint(fields, g);
}

/// v = sum_conditions w * dL_aerial/dM.
inline ScalarField velocity(const ScalarField& mask, const ScalarField& z_target, const KernelsByDefocus& kernels,
                            const IltConfig& cfg) {
  return LossModel(z_target, kernels, cfg).evaluate(mask).velocity;
}

inline ScalarField levelset_gradient(const LevelSet& psi, const ScalarField& z_target,
                                     const KernelsByDefocus& kernels, const IltConfig& cfg) {
  return LossModel(z_target, kernels, cfg).evaluate(psi).gradient;
}

/// Per-iteration observer: (iteration, loss).
using Progress = std::function<void(int, double)>;

/// Polak-Ribiere conjugate-gradient descent on the level set.
///
/// Each step moves psi by dt pixels at the largest-magnitude entry of the
/// search direction. psi is reinitialized to a signed distance every
/// reinit_every steps, which also restarts CG. Stops at max_iters or when
/// the best loss improves by less than stop_tolerance (relative) over
/// stop_window iterations. Returns the best evaluated iterate.
inline OptResult optimize(const ScalarField& z_target, const KernelsByDefocus& kernels, const IltConfig& cfg,
                          const std::optional<LevelSet>& initial_psi = std::nullopt,
                          const Progress& progress = {}) {
  const LossModel model(z_target, kernels, cfg);
  LevelSet psi = initial_psi ? *initial_psi : levelset::signed_distance(z_target);
  require_same_shape(psi.field(), z_target, "optimize");

  OptResult result;
  double best = std::numeric_limits<double>::infinity();
  LevelSet best_psi = psi;
  std::vector<double> best_history;
  ScalarField prev_grad, direction;
  bool have_prev = false;

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (it > 0 && cfg.reinit_every > 0 && it % cfg.reinit_every == 0 && psi.has_interface()) {
      psi = levelset::reinitialize(psi);
      have_prev = false;
    }
    LossModel::LevelSetEvaluation ev = model.evaluate(psi);
    if (!std::isfinite(ev.loss)) {
      std::ostringstream os;
      os << "optimize: non-finite loss at iteration " << it << " (loss = " << ev.loss << ")";
      throw std::runtime_error(os.str());
    }
    result.loss_trace.push_back(ev.loss);
    if (progress) progress(it, ev.loss);
    if (ev.loss < best) {
      best = ev.loss;
      best_psi = psi;
      result.best_iteration = it;
    }
    best_history.push_back(best);
    if (it >= cfg.stop_window) {
      const double before = best_history[static_cast<std::size_t>(it - cfg.stop_window)];
      if (before - best < cfg.stop_tolerance * before) break;
    }

    const ScalarField& g = ev.gradient;
    if (have_prev) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        num += g[i] * (g[i] - prev_grad[i]);
        den += prev_grad[i] * prev_grad[i];
      }
      const double beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
      double slope = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        direction[i] = -g[i] + beta * direction[i];
        slope += direction[i] * g[i];
      }
      if (!(slope < 0.0))
        for (std::size_t i = 0; i < g.size(); ++i) direction[i] = -g[i];
    } else {
      direction = g;
      for (double& v : direction.values()) v = -v;
    }
    const double scale = direction.max_abs();
    if (!(scale > 0.0)) break;
    psi = levelset::evolve_step(psi, direction, cfg.dt / scale);
    prev_grad = std::move(ev.gradient);
    have_prev = true;
  }

  result.iterations_run = static_cast<int>(result.loss_trace.size());
  result.final_mask = levelset::mask_from_levelset(best_psi);
  result.final_psi = std::move(best_psi);
  return result;
}

}  // namespace ildls::ilt
