#pragma once

#include <cstddef>
#include <exception>

namespace tcilab::detail {

// fn(i) for i < n, OpenMP-parallel when requested; the first exception thrown
// by any iteration is rethrown after the loop.
template <class Fn>
void for_each_index(std::size_t n, bool parallel, Fn&& fn) {
  if (!parallel) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(tcilab_first_error)
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace tcilab::detail
