#pragma once

#include <cstddef>
#include <functional>

namespace tnfeat {

/// Resolves a requested worker count; 0 means "all hardware threads".
std::size_t resolve_workers(std::size_t requested) noexcept;

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items are
/// claimed dynamically, so callers must write results by index. The first
/// exception thrown by any item is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace tnfeat
