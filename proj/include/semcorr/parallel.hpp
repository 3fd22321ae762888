#pragma once

#include <algorithm>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace semcorr {

// Worker count for the internally parallel kernels. Every parallel loop in
// the library writes disjoint outputs, so results do not depend on it.
inline int& thread_count_storage() {
  static int n = 1;
  return n;
}

inline void set_threads(int n) {
  thread_count_storage() = std::max(1, n);
#if defined(_OPENMP)
  omp_set_num_threads(thread_count_storage());
#endif
}

inline int threads() { return thread_count_storage(); }

}  // namespace semcorr
