#pragma once

#include <omp.h>

#include "sar/tensor.hpp"

namespace sar::kernels {

enum class ExecMode { Serial, Parallel };

void set_exec_mode(ExecMode mode);
ExecMode exec_mode();

// C = op(A) * op(B), overwriting C unless accumulate is set.
// Both paths sum over k in ascending order per output element, so the
// parallel result is bit-identical to the serial reference.
void matmul(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
            bool accumulate = false);
void matmul_serial(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                   bool accumulate = false);
void matmul_parallel(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                     bool accumulate = false);

// Runs f(i) for i in [0, n). Parallel only at the outermost OpenMP level and
// when the mode allows it; bodies must touch disjoint state per index.
template <typename F>
void parallel_for(long n, F&& f) {
  if (exec_mode() == ExecMode::Parallel && n > 1 && omp_get_level() == 0) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) f(i);
  } else {
    for (long i = 0; i < n; ++i) f(i);
  }
}

}  // namespace sar::kernels
