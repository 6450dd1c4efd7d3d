#pragma once

#include <cstddef>
#include <functional>

namespace hyposcreen {

// Worker-pool size. Defaults to HYPOSCREEN_THREADS when set, else 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs body(i) for i in [0, n). Each index must write only its own output
// slot; results are then independent of scheduling. Calls made from inside a
// worker run serially so nested parallel regions never oversubscribe.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hyposcreen
