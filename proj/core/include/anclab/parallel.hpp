#pragma once

#include <cstddef>
#include <functional>

namespace anclab {

// Worker cap used by parallel_for. Defaults to ANCLAB_THREADS when set,
// otherwise std::thread::hardware_concurrency().
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker
// and callers must only write to index-owned outputs, so results never
// depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace anclab
