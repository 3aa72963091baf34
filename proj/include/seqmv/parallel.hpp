#pragma once

// Replica-level parallelism and order-independent reductions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace seqmv {

/// Runs body(index) for index in [0, count) on up to `threads` workers.
/// Work is handed out dynamically, so bodies must only write to storage
/// owned by their index; results are then independent of the thread count.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  const unsigned width =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (width == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(width);
  for (unsigned w = 0; w < width; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise summation in index order.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double std_err = 0.0;
  double variance = 0.0;  // unbiased sample variance
  std::size_t count = 0;
};

inline MeanSe mean_and_se(std::span<const double> samples) {
  MeanSe out;
  out.count = samples.size();
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  out.mean = pairwise_sum(samples) / n;
  if (samples.size() > 1) {
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double d = samples[i] - out.mean;
      sq[i] = d * d;
    }
    out.variance = pairwise_sum(sq) / (n - 1.0);
    out.std_err = std::sqrt(out.variance / n);
  }
  return out;
}

}  // namespace seqmv
