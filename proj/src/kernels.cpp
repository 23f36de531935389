#include "sar/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace sar::kernels {

namespace {

std::atomic<ExecMode> g_mode{ExecMode::Parallel};

struct MatDims {
  long m, n, k;
};

MatDims check_dims(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b,
                   const Tensor& c) {
  if (a.rank() != 2 || b.rank() != 2 || c.rank() != 2)
    throw std::invalid_argument("matmul: rank-2 tensors required");
  const long m = trans_a ? a.cols() : a.rows();
  const long ka = trans_a ? a.rows() : a.cols();
  const long kb = trans_b ? b.cols() : b.rows();
  const long n = trans_b ? b.rows() : b.cols();
  if (ka != kb) throw std::invalid_argument("matmul: inner dimensions disagree");
  if (c.rows() != m || c.cols() != n) throw std::invalid_argument("matmul: bad output shape");
  return {m, n, ka};
}

// One output row of C; the k loop ascends so the summation order is fixed.
inline void row_nn(const Tensor& a, const Tensor& b, Tensor& c, long i, long n, long k,
                   bool accumulate) {
  double* ci = c.row(i);
  if (!accumulate)
    for (long j = 0; j < n; ++j) ci[j] = 0.0;
  const double* ai = a.row(i);
  for (long p = 0; p < k; ++p) {
    const double av = ai[p];
    const double* bp = b.row(p);
    for (long j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void row_nt(const Tensor& a, const Tensor& b, Tensor& c, long i, long n, long k,
                   bool accumulate) {
  const double* ai = a.row(i);
  double* ci = c.row(i);
  for (long j = 0; j < n; ++j) {
    const double* bj = b.row(j);
    double acc = 0.0;
    for (long p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = accumulate ? ci[j] + acc : acc;
  }
}

inline void row_tn(const Tensor& a, const Tensor& b, Tensor& c, long i, long n, long k,
                   bool accumulate) {
  double* ci = c.row(i);
  if (!accumulate)
    for (long j = 0; j < n; ++j) ci[j] = 0.0;
  for (long p = 0; p < k; ++p) {
    const double av = a(p, i);
    const double* bp = b.row(p);
    for (long j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void row_tt(const Tensor& a, const Tensor& b, Tensor& c, long i, long n, long k,
                   bool accumulate) {
  double* ci = c.row(i);
  for (long j = 0; j < n; ++j) {
    double acc = 0.0;
    for (long p = 0; p < k; ++p) acc += a(p, i) * b(j, p);
    ci[j] = accumulate ? ci[j] + acc : acc;
  }
}

template <bool Parallel>
void matmul_impl(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                 bool accumulate) {
  const MatDims d = check_dims(a, trans_a, b, trans_b, c);
  const auto body = [&](long i) {
    if (!trans_a && !trans_b)
      row_nn(a, b, c, i, d.n, d.k, accumulate);
    else if (!trans_a && trans_b)
      row_nt(a, b, c, i, d.n, d.k, accumulate);
    else if (trans_a && !trans_b)
      row_tn(a, b, c, i, d.n, d.k, accumulate);
    else
      row_tt(a, b, c, i, d.n, d.k, accumulate);
  };
  if constexpr (Parallel) {
    // thread startup costs more than a small product; the cutoff keeps the
    // result bit-identical either way since each row is computed whole
    const bool worth_it = d.m > 1 && d.m * d.n * d.k >= 32768;
    if (omp_get_level() == 0 && worth_it) {
#pragma omp parallel for schedule(static)
      for (long i = 0; i < d.m; ++i) body(i);
      return;
    }
  }
  for (long i = 0; i < d.m; ++i) body(i);
}

}  // namespace

void set_exec_mode(ExecMode mode) { g_mode.store(mode); }
ExecMode exec_mode() { return g_mode.load(); }

void matmul_serial(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                   bool accumulate) {
  matmul_impl<false>(a, trans_a, b, trans_b, c, accumulate);
}

void matmul_parallel(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                     bool accumulate) {
  matmul_impl<true>(a, trans_a, b, trans_b, c, accumulate);
}

void matmul(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
            bool accumulate) {
  if (exec_mode() == ExecMode::Parallel)
    matmul_parallel(a, trans_a, b, trans_b, c, accumulate);
  else
    matmul_serial(a, trans_a, b, trans_b, c, accumulate);
}

}  // namespace sar::kernels
