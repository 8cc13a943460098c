#pragma once

#include <cstddef>
#include <functional>

namespace fockchaos {

// 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n); indices are handed out dynamically.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace fockchaos
