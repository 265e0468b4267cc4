#pragma once

#include <cstddef>
#include <functional>

namespace ssmkit {

/// Caps the number of worker threads used by library loops; 0 means hardware concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs body(k) for k in [0, n) on up to max_threads() threads. The first exception
/// thrown by any task is rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ssmkit
