#pragma once

#include <cstddef>
#include <functional>

namespace pairsr {

/// Worker count used by the parallel stages. Defaults to the PAIRSR_THREADS
/// environment variable, or the hardware concurrency when unset.
int thread_count();
void set_thread_count(int threads);

/// Runs fn(i) for every i in [begin, end) using up to thread_count() workers.
/// Indices are split into contiguous static chunks; fn must only write state
/// owned by its own index so results do not depend on the worker count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

}  // namespace pairsr
