#pragma once

namespace evf {

/// Thread count used by the OpenMP kernels. n <= 0 restores the runtime
/// default (OMP_NUM_THREADS or the hardware concurrency).
void set_num_threads(int n);
int num_threads();

}  // namespace evf
