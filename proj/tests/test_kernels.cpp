#include <doctest.h>

#include <array>
#include <vector>

#include "sar/kernels.hpp"
#include "sar/rng.hpp"

using namespace sar;

namespace {

Tensor random_matrix(long rows, long cols, Rng& rng) {
  Tensor t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2.0, 2.0);
  return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (long i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("parallel matmul matches the serial reference bit for bit") {
  Rng rng(11);
  const std::vector<std::array<long, 3>> shapes{{1, 1, 1}, {3, 5, 7}, {17, 9, 31},
                                                {64, 64, 64}, {2, 33, 6}};
  for (const auto& [m, k, n] : shapes) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        const Tensor a = ta ? random_matrix(k, m, rng) : random_matrix(m, k, rng);
        const Tensor b = tb ? random_matrix(n, k, rng) : random_matrix(k, n, rng);
        Tensor cs(m, n), cp(m, n);
        kernels::matmul_serial(a, ta, b, tb, cs);
        kernels::matmul_parallel(a, ta, b, tb, cp);
        CAPTURE(m);
        CAPTURE(ta);
        CAPTURE(tb);
        CHECK(bit_equal(cs, cp));
      }
    }
  }
}

TEST_CASE("matmul computes a known product") {
  Tensor a(2, 3), b(3, 2);
  for (long i = 0; i < 6; ++i) {
    a[i] = static_cast<double>(i + 1);        // [[1,2,3],[4,5,6]]
    b[i] = static_cast<double>(6 - i);        // [[6,5],[4,3],[2,1]]
  }
  Tensor c(2, 2);
  kernels::matmul(a, false, b, false, c);
  CHECK(c(0, 0) == doctest::Approx(20));
  CHECK(c(0, 1) == doctest::Approx(14));
  CHECK(c(1, 0) == doctest::Approx(56));
  CHECK(c(1, 1) == doctest::Approx(41));
}

TEST_CASE("matmul accumulate adds on top of the output") {
  Rng rng(3);
  const Tensor a = random_matrix(4, 6, rng);
  const Tensor b = random_matrix(6, 5, rng);
  Tensor once(4, 5), twice(4, 5);
  kernels::matmul(a, false, b, false, once);
  kernels::matmul(a, false, b, false, twice);
  kernels::matmul(a, false, b, false, twice, /*accumulate=*/true);
  for (long i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("matmul rejects mismatched shapes") {
  Tensor a(2, 3), b(4, 2), c(2, 2);
  CHECK_THROWS_AS(kernels::matmul(a, false, b, false, c), std::invalid_argument);
  Tensor b2(3, 2), c_bad(3, 2);
  CHECK_THROWS_AS(kernels::matmul(a, false, b2, false, c_bad), std::invalid_argument);
}

TEST_CASE("exec mode switch routes the dispatching entry point") {
  Rng rng(5);
  const Tensor a = random_matrix(8, 8, rng);
  const Tensor b = random_matrix(8, 8, rng);
  Tensor c1(8, 8), c2(8, 8);
  kernels::set_exec_mode(kernels::ExecMode::Serial);
  CHECK(kernels::exec_mode() == kernels::ExecMode::Serial);
  kernels::matmul(a, false, b, false, c1);
  kernels::set_exec_mode(kernels::ExecMode::Parallel);
  kernels::matmul(a, false, b, false, c2);
  CHECK(bit_equal(c1, c2));
}
