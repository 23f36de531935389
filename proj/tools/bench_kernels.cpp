// Times the serial reference kernels against the OpenMP ones, plus a whole
// model forward pass under both execution modes.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "sar/depgraph.hpp"
#include "sar/kernels.hpp"
#include "sar/model.hpp"
#include "sar/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

sar::Tensor random_matrix(long rows, long cols, sar::Rng& rng) {
  sar::Tensor t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void bench_matmul(long size, sar::Rng& rng) {
  const sar::Tensor a = random_matrix(size, size, rng);
  const sar::Tensor b = random_matrix(size, size, rng);
  sar::Tensor c(size, size);
  const double flops = 2.0 * static_cast<double>(size) * size * size;

  auto time_one = [&](auto&& fn) {
    fn(a, false, b, false, c, false);  // warm-up
    long reps = 0;
    const auto t0 = Clock::now();
    double elapsed = 0.0;
    while (elapsed < 0.5) {
      fn(a, false, b, false, c, false);
      ++reps;
      elapsed = seconds_since(t0);
    }
    return flops * static_cast<double>(reps) / elapsed / 1e9;
  };

  const double serial = time_one(sar::kernels::matmul_serial);
  const double parallel = time_one(sar::kernels::matmul_parallel);
  std::printf("matmul %4ldx%-4ld  serial %6.2f GF/s  omp %6.2f GF/s  speedup %.2fx\n", size,
              size, serial, parallel, parallel / serial);
}

void bench_forward(sar::Rng& rng) {
  sar::ModelConfig cfg;
  cfg.joints = 4;
  cfg.joint_dim = 8;
  cfg.positions = 31;
  const sar::SarModel model(cfg);
  const sar::ParamStore store = model.init_params(7);
  const sar::DependencyGraph graph = sar::build_three_stage(cfg.interior(), {1, 9, 19, 29});
  const sar::Fdam fdam = sar::derive_fdam(sar::topological_schedule(graph), cfg.positions);
  const sar::Tensor poses = random_matrix(cfg.positions, 3 * cfg.joints, rng);

  auto time_mode = [&](sar::kernels::ExecMode mode) {
    sar::kernels::set_exec_mode(mode);
    (void)model.forward(store, poses, {}, fdam.mask);
    long reps = 0;
    const auto t0 = Clock::now();
    double elapsed = 0.0;
    while (elapsed < 0.5) {
      (void)model.forward(store, poses, {}, fdam.mask);
      ++reps;
      elapsed = seconds_since(t0);
    }
    return elapsed / static_cast<double>(reps) * 1e3;
  };

  const double serial = time_mode(sar::kernels::ExecMode::Serial);
  const double parallel = time_mode(sar::kernels::ExecMode::Parallel);
  sar::kernels::set_exec_mode(sar::kernels::ExecMode::Parallel);
  std::printf("model forward (J=4 D=8 N=31)  serial %6.3f ms  omp %6.3f ms  speedup %.2fx\n",
              serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  sar::Rng rng(42);
  for (long size : {64, 128, 256, 512}) bench_matmul(size, rng);
  bench_forward(rng);
  return 0;
}
