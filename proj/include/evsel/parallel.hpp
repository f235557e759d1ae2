#pragma once

#include <cstddef>
#include <functional>

namespace evsel {

/// Runs body(0..n-1) on up to `workers` threads. The first exception thrown
/// by any task is rethrown after all workers stop; remaining tasks are
/// skipped once one fails.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace evsel
