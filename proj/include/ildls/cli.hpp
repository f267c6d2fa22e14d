#pragma once

// Subcommands of the ildls tool. run_command never throws; it maps errors to
// exit codes (0 ok, 1 usage or config error, 2 runtime failure).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ildls/analysis.hpp"
#include "ildls/config.hpp"
#include "ildls/ilt.hpp"
#include "ildls/io.hpp"
#include "ildls/layout.hpp"
#include "ildls/levelset.hpp"
#include "ildls/lithosim.hpp"

namespace ildls::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

namespace detail {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool verbose = false;
};

inline config::RunConfig load_config(const Common& c) {
  config::RunConfig cfg;
  if (!c.config_path.empty()) config::apply_text(cfg, io::read_file(c.config_path));
  for (const auto& o : c.overrides) config::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

/// Kernel sets for the requested focus values, read from dir when given and
/// generated from the configured optics otherwise.
inline ilt::KernelsByDefocus load_kernels(const config::RunConfig& cfg, const std::string& dir,
                                          const std::vector<double>& defocus) {
  ilt::KernelsByDefocus out;
  for (double h : defocus) {
    if (out.count(h)) continue;
    lithosim::KernelSet ks = dir.empty() ? lithosim::generate_kernels(cfg.optics_params(), cfg.kernel_count, h)
                                         : io::read_lkrn(fs::path(dir) / io::kernel_file_name(h));
    if (std::abs(ks.defocus - h) > ilt::kDefocusMatchTolerance)
      throw std::runtime_error("kernel file for defocus " + std::to_string(h) + " nm holds defocus " +
                               std::to_string(ks.defocus));
    if (std::abs(ks.pixel_size - cfg.pixel_size) > 1e-9 * cfg.pixel_size)
      throw std::runtime_error("kernel pixel_size " + io::format_double(ks.pixel_size) +
                               " nm does not match grid.pixel_size " + io::format_double(cfg.pixel_size));
    out.emplace(h, std::move(ks));
  }
  return out;
}

inline std::vector<double> condition_defocus(const ilt::IltConfig& c) {
  std::vector<double> out;
  for (const auto& pc : c.conditions) out.push_back(pc.defocus);
  return out;
}

inline ScalarField nominal_print(const ScalarField& mask, const lithosim::KernelSet& ks, const config::RunConfig& cfg) {
  return lithosim::resist_step(lithosim::aerial_image(mask, ks), {cfg.resist.threshold, cfg.resist.steepness, 0.0});
}

inline void write_json(const fs::path& path, const json& j) { io::atomic_write(path, j.dump(2) + "\n"); }

inline json rects_json(const layout::LayoutSpec& s) {
  json rects = json::array();
  for (const auto& r : s.rects) rects.push_back({r.x, r.y, r.w, r.h});
  return rects;
}

}  // namespace detail

inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Level-set inverse lithography engine", "ildls"};
  app.require_subcommand(1);
  detail::Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", common.overrides, "override one key, e.g. --set ilt.max_iters=50");
    sub->add_flag("-v,--verbose", common.verbose, "progress on stderr");
  };

  std::string out_dir, kernels_dir, target_path, mask_path, psi_path, init_psi_path, out_path;
  std::vector<std::string> targets, masks;
  std::optional<double> defocus;

  auto* gen_kernels = app.add_subcommand("gen-kernels", "write one LKRN kernel file per focus value");
  add_common(gen_kernels);
  gen_kernels->add_option("-o,--out", out_dir, "output directory")->required();

  auto* gen_layouts = app.add_subcommand("gen-layouts", "synthesize min-CD layouts and their target rasters");
  add_common(gen_layouts);
  gen_layouts->add_option("-o,--out", out_dir, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "aerial image and resist print of a mask");
  add_common(simulate);
  simulate->add_option("-k,--kernels", kernels_dir, "directory of LKRN files (default: generate)");
  simulate->add_option("-m,--mask", mask_path, "mask PGM")->required()->check(CLI::ExistingFile);
  simulate->add_option("--defocus", defocus, "focus value in nm (default 0)");
  simulate->add_option("-o,--out", out_dir, "output directory")->required();

  auto* ilt_cmd = app.add_subcommand("ilt", "optimize a mask for a target");
  add_common(ilt_cmd);
  ilt_cmd->add_option("-k,--kernels", kernels_dir, "directory of LKRN files (default: generate)");
  ilt_cmd->add_option("-t,--target", target_path, "target PGM")->required()->check(CLI::ExistingFile);
  ilt_cmd->add_option("--init-psi", init_psi_path, "initial level set (F64)")->check(CLI::ExistingFile);
  ilt_cmd->add_option("-o,--out", out_dir, "output directory")->required();

  auto* metrics = app.add_subcommand("metrics", "EDE report of masks against their targets");
  add_common(metrics);
  metrics->add_option("-k,--kernels", kernels_dir, "directory of LKRN files (default: generate)");
  metrics->add_option("-t,--target", targets, "target PGM (repeat, paired with --mask)")->required();
  metrics->add_option("-m,--mask", masks, "mask PGM (repeat)")->required();
  metrics->add_option("-o,--out", out_path, "report JSON")->required();

  auto* pw = app.add_subcommand("pw", "process-window curve of a mask");
  add_common(pw);
  pw->add_option("-k,--kernels", kernels_dir, "directory of LKRN files (default: generate)");
  pw->add_option("-t,--target", target_path, "target PGM")->required()->check(CLI::ExistingFile);
  pw->add_option("-m,--mask", mask_path, "mask PGM")->required()->check(CLI::ExistingFile);
  pw->add_option("-o,--out", out_path, "curve JSON")->required();

  auto* export_grad = app.add_subcommand("export-grad", "loss and level-set gradient for a given psi");
  add_common(export_grad);
  export_grad->add_option("-k,--kernels", kernels_dir, "directory of LKRN files (default: generate)");
  export_grad->add_option("-t,--target", target_path, "target PGM")->required()->check(CLI::ExistingFile);
  export_grad->add_option("-p,--psi", psi_path, "level set (F64)")->required()->check(CLI::ExistingFile);
  export_grad->add_option("-o,--out", out_path, "gradient (F64)")->required();

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
      known = known || sub->get_name() == argv[1];
    if (!known) {
      err << "ildls: unknown subcommand '" << argv[1] << "' (run ildls --help)\n";
      return kUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ildls: " << e.what() << "\n";
    return kUsage;
  }

  config::RunConfig cfg;
  try {
    cfg = detail::load_config(common);
  } catch (const config::ConfigError& e) {
    err << "ildls: config error in '" << e.key << "': " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "ildls: " << e.what() << "\n";
    return kUsage;
  }

  try {
    auto log = [&](const std::string& msg) {
      if (common.verbose) err << msg << "\n";
    };

    if (*gen_kernels) {
      for (double h : cfg.all_defocus()) {
        const auto ks = lithosim::generate_kernels(cfg.optics_params(), cfg.kernel_count, h);
        if (ks.missing > 0)
          err << "ildls: warning: defocus " << h << " nm: TCC rank gives only " << ks.count() << " of "
              << cfg.kernel_count << " kernels\n";
        io::write_lkrn(fs::path(out_dir) / io::kernel_file_name(h), ks);
        log("wrote " + io::kernel_file_name(h));
      }
    } else if (*gen_layouts) {
      layout::GeneratorParams gp;
      gp.width = cfg.width;
      gp.height = cfg.height;
      gp.pixel_size = cfg.pixel_size;
      gp.min_cd = cfg.min_cd;
      gp.min_rects = cfg.min_rects;
      gp.max_rects = cfg.max_rects;
      const auto layouts = layout::gen_layouts(cfg.layout_count, gp, cfg.seed);
      for (std::size_t i = 0; i < layouts.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "layout_%04zu", i);
        io::write_pgm(fs::path(out_dir) / (std::string(stem) + ".pgm"), layouts[i].target);
        detail::write_json(fs::path(out_dir) / (std::string(stem) + ".json"),
                           {{"width", cfg.width},
                            {"height", cfg.height},
                            {"pixel_size", cfg.pixel_size},
                            {"min_cd", layouts[i].spec.min_cd},
                            {"seed", cfg.seed},
                            {"index", i},
                            {"rects", detail::rects_json(layouts[i].spec)}});
      }
    } else if (*simulate) {
      const double h = defocus.value_or(0.0);
      const ScalarField mask = io::read_pgm(mask_path, cfg.pixel_size);
      const auto kernels = detail::load_kernels(cfg, kernels_dir, {h});
      const ScalarField intensity = lithosim::aerial_image(mask, kernels.at(h));
      io::write_f64(fs::path(out_dir) / "aerial.f64", intensity);
      io::write_pgm(fs::path(out_dir) / "resist.pgm", lithosim::resist_step(intensity, cfg.resist));
    } else if (*ilt_cmd) {
      const ilt::IltConfig icfg = cfg.ilt_config();
      const ScalarField target = io::read_pgm(target_path, cfg.pixel_size);
      const auto kernels = detail::load_kernels(cfg, kernels_dir, detail::condition_defocus(icfg));
      std::optional<levelset::LevelSet> init;
      if (!init_psi_path.empty()) init = levelset::LevelSet(io::read_f64(init_psi_path));
      const ilt::OptResult r = ilt::optimize(target, kernels, icfg, init, [&](int it, double loss) {
        if (common.verbose) err << "iter " << it << " loss " << io::format_double(loss) << "\n";
      });
      const fs::path dir(out_dir);
      io::write_pgm(dir / "mask.pgm", r.final_mask);
      io::write_f64(dir / "psi.f64", r.final_psi.field());
      io::atomic_write(dir / "loss.csv", io::encode_loss_csv(r.loss_trace));
      const auto& nominal = kernels.at(0.0);
      detail::write_json(dir / "summary.json",
                         {{"iterations_run", r.iterations_run},
                          {"best_iteration", r.best_iteration},
                          {"initial_loss", r.loss_trace.front()},
                          {"best_loss", r.loss_trace[static_cast<std::size_t>(r.best_iteration)]},
                          {"process_variation", cfg.process_variation},
                          {"ede_target_as_mask", analysis::ede(detail::nominal_print(target, nominal, cfg), target,
                                                               cfg.pixel_size)},
                          {"ede_optimized", analysis::ede(detail::nominal_print(r.final_mask, nominal, cfg), target,
                                                          cfg.pixel_size)}});
    } else if (*metrics) {
      if (targets.size() != masks.size())
        throw std::invalid_argument("metrics: give one --mask per --target");
      const auto kernels = detail::load_kernels(cfg, kernels_dir, {0.0});
      std::vector<std::pair<ScalarField, ScalarField>> pairs;
      json clips = json::array();
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const ScalarField target = io::read_pgm(targets[i], cfg.pixel_size);
        const ScalarField mask = io::read_pgm(masks[i], cfg.pixel_size);
        require_same_shape(mask, target, "metrics");
        const ScalarField intensity = lithosim::aerial_image(mask, kernels.at(0.0));
        pairs.emplace_back(lithosim::resist_step(intensity, {cfg.resist.threshold, cfg.resist.steepness, 0.0}),
                           target);
        clips.push_back({{"target", targets[i]},
                         {"mask", masks[i]},
                         {"worst_ils", analysis::worst_ils(intensity, target, cfg.pixel_size)}});
      }
      const analysis::EdeReport rep = analysis::ede_report(pairs, cfg.pixel_size);
      for (std::size_t i = 0; i < clips.size(); ++i) clips[i]["ede"] = rep.per_clip_ede[i];
      detail::write_json(out_path, {{"pixel_size", cfg.pixel_size},
                                    {"per_clip_ede", rep.per_clip_ede},
                                    {"aede", rep.aede},
                                    {"max_min_spread", rep.max_min_spread},
                                    {"clips", clips}});
    } else if (*pw) {
      const ScalarField target = io::read_pgm(target_path, cfg.pixel_size);
      const ScalarField mask = io::read_pgm(mask_path, cfg.pixel_size);
      const auto kernels = detail::load_kernels(cfg, kernels_dir, cfg.pw_defocus);
      const analysis::PwCurve c =
          analysis::pw_curve(mask, target, kernels, cfg.pw_doses(), cfg.pw_pass_ede, cfg.ilt_config());
      json samples = json::array();
      for (const auto& [dof, el] : c.samples) samples.push_back({{"dof", dof}, {"max_el", el}});
      json pass = json::array();
      for (const auto& row : c.pass) pass.push_back(row);
      const ScalarField intensity = lithosim::aerial_image(mask, kernels.at(0.0));
      detail::write_json(out_path, {{"samples", samples},
                                    {"area", c.area},
                                    {"defocus", c.defocus},
                                    {"dose", c.dose},
                                    {"el_by_defocus", c.el_by_defocus},
                                    {"pass", pass},
                                    {"pass_ede", cfg.pw_pass_ede},
                                    {"el_at_dof_0", c.el_at_dof(0.0)},
                                    {"dof_at_el_5", c.dof_at_el(5.0)},
                                    {"worst_ils", analysis::worst_ils(intensity, target, cfg.pixel_size)}});
    } else if (*export_grad) {
      const ilt::IltConfig icfg = cfg.ilt_config();
      const ScalarField target = io::read_pgm(target_path, cfg.pixel_size);
      const auto kernels = detail::load_kernels(cfg, kernels_dir, detail::condition_defocus(icfg));
      const levelset::LevelSet psi(io::read_f64(psi_path));
      const auto ev = ilt::LossModel(target, kernels, icfg).evaluate(psi);
      io::write_f64(out_path, ev.gradient);
      out << io::format_double(ev.loss) << "\n";
    }
  } catch (const std::exception& e) {
    err << "ildls: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace ildls::cli
