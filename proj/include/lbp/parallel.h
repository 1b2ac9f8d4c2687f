#pragma once

#include <cstddef>
#include <functional>

namespace lbp {

// Process-wide cap on worker threads; 0 restores the hardware default.
void set_max_threads(unsigned n);
auto max_threads() -> unsigned;

// Calls body(i) for every i in [0, n). Iterations may run concurrently and in
// any order, so body must only write to storage owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lbp
