#include "evfield/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evf {

namespace {
int g_default_threads = 0;
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_threads);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace evf
