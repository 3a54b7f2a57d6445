#pragma once

#include <functional>

namespace kinv {

/// Current worker cap. Defaults to the hardware concurrency; the CLI
/// --threads flag overrides it. Always >= 1.
int max_threads();

/// Set the worker cap. n <= 0 restores the hardware default.
void set_max_threads(int n);

/// Run fn(begin, end) over a partition of [0, n) into contiguous chunks.
/// Every index is handed out exactly once and chunks never overlap, so
/// results are independent of the thread count as long as fn writes only
/// to slots owned by its indices. Reductions stay with the caller.
///
/// grain is the minimum work per chunk; below it the loop runs inline.
void parallel_for(int n, const std::function<void(int, int)>& fn, int grain = 1);

} // namespace kinv
