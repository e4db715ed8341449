#pragma once

#include <cstddef>
#include <functional>

namespace skipclip {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled by exactly one worker; callers write results into per-index slots
/// and reduce them in index order afterwards. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace skipclip
