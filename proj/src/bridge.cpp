#include "ildls/bridge.h"

#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "ildls/config.hpp"
#include "ildls/ilt.hpp"
#include "ildls/io.hpp"

struct ildls_session {
  std::unique_ptr<const ildls::ilt::LossModel> model;
  int width = 0;
  int height = 0;
  double pixel_size = 0.0;

  mutable std::mutex error_mutex;
  mutable std::map<std::thread::id, std::string> errors;

  void fail(const std::string& msg) const {
    std::lock_guard lock(error_mutex);
    errors[std::this_thread::get_id()] = msg;
  }
};

namespace {

thread_local std::string create_error;
thread_local std::string error_copy;

}  // namespace

extern "C" {

ildls_session* ildls_session_create(const char* config_text, const char* const* kernel_paths, size_t n_kernel_paths,
                                    const char* target_pgm_path) {
  create_error.clear();
  if (!config_text || !target_pgm_path || (n_kernel_paths > 0 && !kernel_paths)) {
    create_error = "ildls_session_create: null argument";
    return nullptr;
  }
  try {
    const ildls::config::RunConfig cfg = ildls::config::parse(config_text);
    ildls::ilt::KernelsByDefocus kernels;
    for (size_t i = 0; i < n_kernel_paths; ++i) {
      if (!kernel_paths[i]) throw std::invalid_argument("kernel path " + std::to_string(i) + " is null");
      ildls::lithosim::KernelSet ks = ildls::io::read_lkrn(kernel_paths[i]);
      const double h = ks.defocus;
      if (!kernels.emplace(h, std::move(ks)).second)
        throw std::invalid_argument("two kernel files for defocus " + ildls::io::format_double(h) + " nm");
    }
    const ildls::ScalarField target = ildls::io::read_pgm(target_pgm_path, cfg.pixel_size);
    auto s = std::make_unique<ildls_session>();
    s->model = std::make_unique<const ildls::ilt::LossModel>(target, kernels, cfg.ilt_config());
    s->width = target.width();
    s->height = target.height();
    s->pixel_size = target.pixel_size();
    return s.release();
  } catch (const ildls::config::ConfigError& e) {
    create_error = "config error in '" + e.key + "': " + e.what();
  } catch (const std::exception& e) {
    create_error = e.what();
  }
  return nullptr;
}

void ildls_session_destroy(ildls_session* session) { delete session; }

int ildls_session_dims(const ildls_session* session, int* width, int* height) {
  if (!session || !width || !height) return ILDLS_EINVAL;
  *width = session->width;
  *height = session->height;
  return ILDLS_OK;
}

int ildls_eval_loss_and_grad(const ildls_session* session, const double* psi, size_t n, double* loss, double* grad) {
  if (!session) return ILDLS_EINVAL;
  if (!psi || !loss || !grad) {
    session->fail("ildls_eval_loss_and_grad: null buffer");
    return ILDLS_EINVAL;
  }
  const size_t expect = static_cast<size_t>(session->width) * static_cast<size_t>(session->height);
  if (n != expect) {
    session->fail("ildls_eval_loss_and_grad: psi has " + std::to_string(n) + " values, expected " +
                  std::to_string(expect));
    return ILDLS_EINVAL;
  }
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(psi[i])) {
      session->fail("ildls_eval_loss_and_grad: non-finite psi at index " + std::to_string(i));
      return ILDLS_EINVAL;
    }
  try {
    const ildls::levelset::LevelSet ls(
        ildls::ScalarField(session->width, session->height, session->pixel_size, std::vector<double>(psi, psi + n)));
    const auto ev = session->model->evaluate(ls);
    if (!std::isfinite(ev.loss)) {
      session->fail("ildls_eval_loss_and_grad: non-finite loss");
      return ILDLS_ERUNTIME;
    }
    std::memcpy(grad, ev.gradient.values().data(), n * sizeof(double));
    *loss = ev.loss;
    return ILDLS_OK;
  } catch (const std::exception& e) {
    session->fail(e.what());
    return ILDLS_ERUNTIME;
  }
}

const char* ildls_last_error(const ildls_session* session) {
  if (!session) return create_error.c_str();
  std::lock_guard lock(session->error_mutex);
  const auto it = session->errors.find(std::this_thread::get_id());
  error_copy = it == session->errors.end() ? std::string() : it->second;
  return error_copy.c_str();
}

}  // extern "C"
