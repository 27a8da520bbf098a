#pragma once

// Replica-level parallelism.
//
// Each replica owns a Key, so its result does not depend on which thread ran
// it. Results are written into a slot per replica and reduced in index order
// afterwards, which keeps every estimate bit-identical across thread counts.
// The serial path is the reference the parallel path is tested against.

#include <cstddef>
#include <exception>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kbrw {

enum class Exec { serial, parallel };

inline int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) noexcept {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <class F>
auto map_replicas(std::size_t n, F&& f, Exec exec = Exec::parallel)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using T = std::invoke_result_t<F&, std::size_t>;
  std::vector<T> out(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) out[i] = f(static_cast<std::size_t>(i));
  } else {
    // Exceptions may not leave an OpenMP region; keep the lowest-index one so
    // the error matches what the serial path would raise.
    std::exception_ptr first_error;
    std::ptrdiff_t first_index = count;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        out[i] = f(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(kbrw_map_replicas_error)
        if (i < first_index) {
          first_index = i;
          first_error = std::current_exception();
        }
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
  return out;
}

}  // namespace kbrw
