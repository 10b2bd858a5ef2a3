#pragma once

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hambvp {

/// Execution policy for the data-parallel kernels (multistart sweeps, grid
/// scans, per-parameter solves). The serial path is the reference
/// implementation; tests assert that both paths produce bit-identical
/// results, and the bench target compares their wall time.
enum class Exec { serial, parallel };

inline int hardware_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

/// Runs f(0), ..., f(n-1). Under Exec::parallel the iterations are spread
/// over an OpenMP pool; the first exception is captured and rethrown after
/// the loop so callers see the same behaviour as the serial path.
template <class F>
void for_each_index(Exec exec, int n, F&& f) {
  if (exec == Exec::serial) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr first;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(hambvp_for_each_index)
#endif
      {
        if (!first) first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace hambvp
