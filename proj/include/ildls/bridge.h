/* C interface for external training runtimes: one session holds a target,
 * its kernel sets and the ILT configuration, and returns the level-set loss
 * and dL/dpsi for a caller-owned psi buffer (row-major, width * height).
 *
 * Sessions are immutable after creation; ildls_eval_loss_and_grad may be
 * called concurrently on the same session. */
#ifndef ILDLS_BRIDGE_H
#define ILDLS_BRIDGE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ILDLS_API __declspec(dllexport)
#else
#define ILDLS_API __attribute__((visibility("default")))
#endif

typedef struct ildls_session ildls_session;

enum {
  ILDLS_OK = 0,
  ILDLS_EINVAL = 1,   /* bad argument: null pointer, size mismatch, non-finite psi */
  ILDLS_ERUNTIME = 2  /* evaluation failed */
};

/* config_text: key = value configuration (same keys as the CLI). Process
 * variation mode is fixed here by ilt.process_variation. kernel_paths: LKRN
 * files covering every focus value the mode needs. Returns NULL on failure;
 * ildls_last_error(NULL) then describes it. */
ILDLS_API ildls_session* ildls_session_create(const char* config_text, const char* const* kernel_paths,
                                              size_t n_kernel_paths, const char* target_pgm_path);

ILDLS_API void ildls_session_destroy(ildls_session* session);

ILDLS_API int ildls_session_dims(const ildls_session* session, int* width, int* height);

/* n must equal width * height. On success writes *loss and n gradient
 * values; on failure writes nothing. */
ILDLS_API int ildls_eval_loss_and_grad(const ildls_session* session, const double* psi, size_t n, double* loss,
                                       double* grad);

/* Message of the last failure on this thread for the session, or of the
 * last failed ildls_session_create when session is NULL. Empty if none.
 * Valid until the next bridge call on this thread. */
ILDLS_API const char* ildls_last_error(const ildls_session* session);

#ifdef __cplusplus
}
#endif

#endif
