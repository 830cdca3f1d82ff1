#pragma once

#include <cstddef>
#include <functional>

namespace ciplan {

/// Worker count: CIPLAN_THREADS if set and positive, otherwise hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks; the
/// exception thrown for the smallest index (if any) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace ciplan
