#include <atomic>
#include <cstdlib>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dfkd/kernels.hpp"

namespace dfkd::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};

int resolve_threads() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("DFKD_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

std::once_flag g_init_once;
int g_threads = 1;
}  // namespace

int effective_threads() {
  std::call_once(g_init_once, [] {
    g_threads = resolve_threads();
#ifdef _OPENMP
    omp_set_num_threads(g_threads);
#endif
  });
  return g_threads;
}

Backend backend() {
  effective_threads();  // apply the thread cap before any parallel region
  return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

}  // namespace dfkd::kernels
