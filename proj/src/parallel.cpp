#include "cocoedit/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cocoedit {

namespace {
std::atomic<bool> g_deterministic{false};
std::atomic<int> g_thread_cap{0};  // 0 = runtime default
}  // namespace

void set_deterministic(bool on) { g_deterministic = on; }
bool deterministic() { return g_deterministic; }

void configure_threads_from_env() {
  if (const char* env = std::getenv("COCOEDIT_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) g_thread_cap = n;
    } catch (...) {
      // ignored: malformed value keeps the runtime default
    }
  }
#ifdef _OPENMP
  if (g_thread_cap > 0) omp_set_num_threads(g_thread_cap);
#endif
}

int thread_count() {
  if (g_deterministic) return 1;
#ifdef _OPENMP
  int n = omp_get_max_threads();
  if (g_thread_cap > 0 && g_thread_cap < n) n = g_thread_cap;
  return n < 1 ? 1 : n;
#else
  return 1;
#endif
}

}  // namespace cocoedit
