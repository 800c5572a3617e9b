#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <vector>

#include <omp.h>

#include "mamlode/types.hpp"

namespace mamlode::detail {

// Below this many scalar operations per call the thread fork costs more than
// it saves.
inline constexpr std::size_t kParallelWorkThreshold = 4096;

/// Runs body(i) for i in [0, n). The parallel branch is an OpenMP loop; any
/// exception thrown by a task is captured and rethrown on the calling thread.
template <typename Body>
void for_each_task(std::size_t n, Exec exec, std::size_t work_per_task, Body&& body) {
  const bool go_parallel = exec == Exec::parallel && n > 1 &&
                           n * work_per_task >= kParallelWorkThreshold &&
                           !omp_in_parallel();
  if (!go_parallel) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Sum of weights[i] * parts[i] accumulated in index order.
template <typename T>
T weighted_sum(const std::vector<double>& weights, const std::vector<T>& parts) {
  T total = weights[0] * parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total += weights[i] * parts[i];
  return total;
}

}  // namespace mamlode::detail
