#pragma once

namespace deepforest {

// Selects between the OpenMP kernels and their serial reference loops.
// Both paths produce bit-identical results; the serial path exists for
// testing and for builds without OpenMP.
enum class Execution { serial, parallel };

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

// Caps the OpenMP thread count; no-op without OpenMP.
void set_num_threads(int threads);

bool openmp_enabled();

}  // namespace deepforest

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>

namespace deepforest {

// Runs fn(i) for i in [0, n). With Execution::parallel the iterations are
// spread over OpenMP threads (dynamic schedule); the first exception thrown
// by any iteration is rethrown on the calling thread. Iterations must write
// to disjoint outputs.
template <typename Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
  if (exec == Execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace deepforest
