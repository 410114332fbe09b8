#include "slt/parallel.hpp"

namespace slt {

namespace {
int g_jobs = 0;
#ifdef _OPENMP
thread_local bool g_inside = false;
#endif
}  // namespace

void set_jobs(int j) { g_jobs = j < 0 ? 0 : j; }
int jobs() { return g_jobs; }

void parallel_for_serial(std::size_t count,
                         const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < count; ++i) fn(i);
}

#ifdef _OPENMP
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& fn) {
  // Nested regions run serially: a replicate loop already inside a parallel
  // region executes its chain loop inline, keeping thread counts bounded and
  // schedules irrelevant to the output.
  if (g_inside || g_jobs == 1 || count <= 1) {
    parallel_for_serial(count, fn);
    return;
  }
  const long n = static_cast<long>(count);
  if (g_jobs > 1) {
#pragma omp parallel num_threads(g_jobs)
    {
      g_inside = true;
#pragma omp for schedule(dynamic)
      for (long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
      g_inside = false;
    }
  } else {
#pragma omp parallel
    {
      g_inside = true;
#pragma omp for schedule(dynamic)
      for (long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
      g_inside = false;
    }
  }
}
#else
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& fn) {
  parallel_for_serial(count, fn);
}
#endif

}  // namespace slt
