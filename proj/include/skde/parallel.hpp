#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "skde/types.hpp"

namespace skde {

/// Worker-thread budget shared by all bulk loops.  Set once from the CLI;
/// results never depend on it, only wall time does.
int thread_budget();
void set_thread_budget(int threads);
int hardware_threads();

// Fixed chunk length for all deterministic reductions.  Partial sums are formed
// per chunk in index order and combined pairwise in chunk order, so the result
// is a pure function of the term sequence, independent of the thread count.
inline constexpr Index kSumChunk = 4096;

/// Pairwise reduction in the given order.
Scalar pairwise_sum(std::span<const Scalar> xs);

namespace detail {

template <class Body>
void run_chunked(Index chunk_count, Body&& body) {
  const int budget = thread_budget();
  if (budget <= 1 || chunk_count <= 1) {
    for (Index c = 0; c < chunk_count; ++c) body(c);
    return;
  }
  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (Index c = next.fetch_add(1); c < chunk_count; c = next.fetch_add(1)) {
        if (failed.load(std::memory_order_relaxed)) return;
        body(c);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  const int n_threads = static_cast<int>(std::min<Index>(budget, chunk_count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads) - 1);
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failed.load()) std::rethrow_exception(error);
}

}  // namespace detail

/// Evaluate `term(g)` for g in [0, n) and return K simultaneous sums.
/// `term` writes its K addends into the array it is handed.
template <int K, class Term>
std::array<Scalar, K> deterministic_sums(Index n, Term&& term) {
  static_assert(K >= 1);
  if (n <= 0) return {};
  const Index chunk_count = (n + kSumChunk - 1) / kSumChunk;
  std::vector<std::array<Scalar, K>> partial(static_cast<std::size_t>(chunk_count));
  detail::run_chunked(chunk_count, [&](Index c) {
    const Index lo = c * kSumChunk;
    const Index hi = std::min(n, lo + kSumChunk);
    std::array<Scalar, K> acc{};
    std::array<Scalar, K> addend{};
    for (Index g = lo; g < hi; ++g) {
      term(g, addend);
      for (int k = 0; k < K; ++k) acc[static_cast<std::size_t>(k)] += addend[static_cast<std::size_t>(k)];
    }
    partial[static_cast<std::size_t>(c)] = acc;
  });
  std::array<Scalar, K> out{};
  std::vector<Scalar> column(static_cast<std::size_t>(chunk_count));
  for (int k = 0; k < K; ++k) {
    for (Index c = 0; c < chunk_count; ++c)
      column[static_cast<std::size_t>(c)] = partial[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(k)] = pairwise_sum(column);
  }
  return out;
}

template <class Term>
Scalar deterministic_sum(Index n, Term&& term) {
  return deterministic_sums<1>(n, [&term](Index g, std::array<Scalar, 1>& a) { a[0] = term(g); })[0];
}

/// Argmin of `value(i)` over [0, n); ties resolve to the lowest index.
/// NaN values are never selected unless every value is NaN.
template <class Value>
std::pair<Index, Scalar> deterministic_argmin(Index n, Value&& value) {
  const Index chunk_count = (n + kSumChunk - 1) / kSumChunk;
  std::vector<std::pair<Index, Scalar>> best(static_cast<std::size_t>(chunk_count),
                                             {Index{-1}, std::numeric_limits<Scalar>::quiet_NaN()});
  detail::run_chunked(chunk_count, [&](Index c) {
    const Index lo = c * kSumChunk;
    const Index hi = std::min(n, lo + kSumChunk);
    Index arg = -1;
    Scalar val = std::numeric_limits<Scalar>::quiet_NaN();
    for (Index i = lo; i < hi; ++i) {
      const Scalar v = value(i);
      if (arg < 0 ? !std::isnan(v) : v < val) {
        arg = i;
        val = v;
      }
    }
    if (arg < 0 && lo < hi) arg = lo;  // all-NaN chunk; surface the first entry
    best[static_cast<std::size_t>(c)] = {arg, val};
  });
  Index arg = -1;
  Scalar val = std::numeric_limits<Scalar>::quiet_NaN();
  for (const auto& [a, v] : best) {
    if (a < 0) continue;
    if (arg < 0 || (!std::isnan(v) && (std::isnan(val) || v < val))) {
      arg = a;
      val = v;
    }
  }
  return {arg, val};
}

}  // namespace skde
