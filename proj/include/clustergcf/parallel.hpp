#pragma once

#include "clustergcf/types.hpp"

namespace cgcf {

// Overrides the CGCF_THREADS/hardware cap for this process. Forked sweep
// workers set it to 1: libgomp is not fork-safe once the parent has spawned
// a team, and the count-1 path below never enters the OpenMP runtime.
void set_thread_count(int n);

// Static partition over rows; each row is computed by exactly one worker,
// so results are bit-identical for any thread count.
template <typename F>
void parallel_rows(Index n, F&& body) {
    if (thread_count() > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
        for (Index r = 0; r < n; ++r) body(r);
    } else {
        for (Index r = 0; r < n; ++r) body(r);
    }
}

}  // namespace cgcf
