#pragma once

#include <cstddef>
#include <functional>

namespace iaa {

// Worker count: explicit request, bounded by the IAA_WORKERS environment
// variable when set, else the hardware concurrency.
std::size_t resolve_workers(std::size_t requested = 0);

// Runs fn(i) for i in [0, count) on a small thread pool. Each index is
// processed exactly once; callers write results into per-index slots so
// output does not depend on scheduling. Exceptions are rethrown on the
// calling thread.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace iaa
