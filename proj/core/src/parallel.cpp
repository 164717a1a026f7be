#include "maculab/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace maculab {

int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (n_threads <= 0) n_threads = hardware_threads();
  n_threads = std::min(n_threads, n);
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_threads));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(n_threads));
  const int chunk = (n + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t]() {
      const int lo = t * chunk;
      const int hi = std::min(n, lo + chunk);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace maculab
