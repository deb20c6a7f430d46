#include "skde/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace skde {

namespace {
std::atomic<int> g_thread_budget{1};
}

int thread_budget() { return g_thread_budget.load(std::memory_order_relaxed); }

void set_thread_budget(int threads) {
  if (threads < 1) throw ArgumentError("thread budget must be >= 1");
  g_thread_budget.store(threads, std::memory_order_relaxed);
}

int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

Scalar pairwise_sum(std::span<const Scalar> xs) {
  if (xs.size() <= 8) {
    Scalar acc = 0.0;
    for (const Scalar x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace skde
