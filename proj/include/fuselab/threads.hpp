#pragma once

#include <cstdint>
#include <functional>

namespace fuselab {

/// Resolves a thread-count request. requested > 0 wins; otherwise the
/// FUSELAB_THREADS environment variable (0 = auto); otherwise hardware
/// concurrency.
int resolve_threads(int requested);

/// Runs fn over [0, n) split into one contiguous chunk per thread and
/// joins. With threads <= 1 the call runs inline.
void parallel_chunks(std::int64_t n, int threads,
                     const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace fuselab
