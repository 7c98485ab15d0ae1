#pragma once

namespace cocoedit {

/// Number of worker threads kernels may use. Honours COCOEDIT_THREADS and the
/// process-wide determinism switch (which forces 1).
int thread_count();

/// Forces every parallel region to run serially in fixed order.
void set_deterministic(bool on);
bool deterministic();

/// Re-reads COCOEDIT_THREADS and applies it to the OpenMP runtime.
void configure_threads_from_env();

}  // namespace cocoedit
