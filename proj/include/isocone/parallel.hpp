#pragma once

#include <cstddef>
#include <functional>

namespace isocone {

/// Worker count: hardware concurrency, capped by ISOCONE_THREADS when set.
unsigned worker_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index must write
/// only its own output slot; reductions happen afterwards in index order, so
/// results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace isocone
