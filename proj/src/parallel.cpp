#include "lbp/parallel.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lbp {

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads = n; }

auto max_threads() -> unsigned {
  auto cap = g_max_threads.load();
  if (cap != 0) return cap;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  auto workers = static_cast<std::size_t>(std::min<std::size_t>(max_threads(), n));
  if (workers <= 1) {
    for (auto i = std::size_t{0}; i < n; ++i) body(i);
    return;
  }
  auto next = std::atomic<std::size_t>{0};
  auto first_error = std::exception_ptr{};
  auto error_mutex = std::mutex{};
  auto work = [&] {
    for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        auto lock = std::scoped_lock{error_mutex};
        if (!first_error) first_error = std::current_exception();
        next = n;
      }
    }
  };
  auto threads = std::vector<std::thread>{};
  for (auto t = std::size_t{1}; t < workers; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lbp
