#pragma once

#include <cstddef>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace slt {

// Number of worker threads used by parallel_for.  0 means "library default"
// (whatever OpenMP picks).  Set from the CLI --jobs flag.
void set_jobs(int jobs);
int jobs();

// Runs fn(i) for i in [0, count).  Each index must be an independent unit of
// work writing only to its own output slot; merges happen in index order on
// the caller side, so results are identical whether the loop runs serially
// or under OpenMP with any thread count.
//
// The serial path is kept as a reference implementation: parallel_for_serial
// is the exact loop without OpenMP, used by the determinism tests and the
// benchmark tool.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);
void parallel_for_serial(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace slt
