#pragma once

#include <exception>

namespace modsensor {

// Execution policy for kernels that have both a serial reference and an OpenMP path.
enum class Exec { serial, parallel };

// Worker count for parallel kernels: MODSENSOR_THREADS if set, else the OpenMP default.
// Throws ValidationError on a malformed value.
int configured_threads();

// Calls fn(i) for i in [0, count). The parallel path forwards the first exception thrown by a worker.
template <class Fn>
void for_each_index(int count, Exec exec, Fn&& fn) {
  if (exec == Exec::serial) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int threads = configured_threads();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(modsensor_worker_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace modsensor
