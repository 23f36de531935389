#include <doctest.h>

#include <cmath>
#include <set>

#include "sar/nn.hpp"
#include "sar/rng.hpp"

using namespace sar;

namespace {

Tensor random_matrix(long rows, long cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

double weighted_sum(const Tensor& out, const Tensor& weights) {
  double s = 0.0;
  for (long i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

}  // namespace

TEST_CASE("masked softmax hand values") {
  Tensor logits(1, 4);
  logits.fill(0.7);
  AttentionMask mask(1, 4);
  mask.set(0, 0, true);
  mask.set(0, 2, true);
  Tensor p = masked_softmax(logits, &mask);
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(0, 1) == 0.0);
  CHECK(p(0, 2) == doctest::Approx(0.5));
  CHECK(p(0, 3) == 0.0);

  AttentionMask single(1, 4);
  single.set(0, 3, true);
  p = masked_softmax(logits, &single);
  CHECK(p(0, 3) == 1.0);
  CHECK(p(0, 0) == 0.0);

  Tensor two(1, 2);
  two(0, 0) = 0.0;
  two(0, 1) = std::log(3.0);
  p = masked_softmax(two, nullptr);
  CHECK(p(0, 0) == doctest::Approx(0.25));
  CHECK(p(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("masked softmax rows sum to one and masked entries are exact zeros") {
  Rng rng(77);
  const Tensor logits = random_matrix(12, 9, rng, 30.0);
  AttentionMask mask(12, 9);
  for (long r = 0; r < 12; ++r) {
    mask.set(r, r % 9, true);
    for (long c = 0; c < 9; ++c)
      if (rng.u01() < 0.4) mask.set(r, c, true);
  }
  const Tensor p = masked_softmax(logits, &mask);
  for (long r = 0; r < 12; ++r) {
    double sum = 0.0;
    for (long c = 0; c < 9; ++c) {
      if (!mask.at(r, c)) CHECK(p(r, c) == 0.0);
      sum += p(r, c);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("masked softmax rejects a fully masked row") {
  Tensor logits(2, 3);
  AttentionMask mask(2, 3);
  mask.set(0, 1, true);
  CHECK_THROWS_AS(masked_softmax(logits, &mask), std::invalid_argument);
}

TEST_CASE("layer norm hand values") {
  ParamStore store;
  const LayerNorm ln("ln", 4);
  ln.init(store);

  Tensor constant(1, 4);
  constant.fill(3.5);
  const Tensor zeros = ln.forward(store, constant);
  for (long i = 0; i < 4; ++i) CHECK(zeros[i] == doctest::Approx(0.0).epsilon(1e-12));

  const LayerNorm ln2("ln2", 2);
  ln2.init(store);
  Tensor pm(1, 2);
  pm(0, 0) = 1.0;
  pm(0, 1) = -1.0;
  const Tensor out = ln2.forward(store, pm);
  CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(out(0, 1) == doctest::Approx(-1.0).epsilon(1e-4));

  // under unit gain the output mean equals the bias mean
  store.at("ln.b").value.fill(0.25);
  Rng rng(5);
  const Tensor x = random_matrix(3, 4, rng);
  const Tensor y = ln.forward(store, x);
  for (long r = 0; r < 3; ++r) {
    double mean = 0.0;
    for (long c = 0; c < 4; ++c) mean += y(r, c);
    CHECK(mean / 4.0 == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("sinusoidal position encoding values and injectivity") {
  const Tensor pe = sinusoidal_position_encoding(16, 8);
  for (long k = 0; k < 4; ++k) {
    CHECK(pe(0, 2 * k) == 0.0);
    CHECK(pe(0, 2 * k + 1) == 1.0);
  }
  CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)));

  CHECK_THROWS_AS(sinusoidal_position_encoding(4, 7), std::invalid_argument);

  const long n = 10000, d = 16;
  const Tensor big = sinusoidal_position_encoding(n, d);
  std::set<std::vector<double>> rows;
  for (long p = 0; p < n; ++p)
    rows.insert(std::vector<double>(big.row(p), big.row(p) + d));
  CHECK(static_cast<long>(rows.size()) == n);
}

TEST_CASE("adam hand-evaluated steps") {
  ParamStore store;
  Tensor& theta = store.create("w", {1, 1});
  theta[0] = 1.0;
  const AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};

  SUBCASE("zero gradient leaves parameters unchanged") {
    adam_step(store, cfg);
    CHECK(theta[0] == 1.0);
  }

  SUBCASE("first step moves by about -lr for unit gradient") {
    store.at("w").grad[0] = 1.0;
    adam_step(store, cfg);
    CHECK(theta[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-7));
    CHECK(store.at("w").grad[0] == 0.0);
    CHECK(store.step() == 1);
  }

  SUBCASE("oscillating gradient is damped relative to SGD") {
    store.at("w").grad[0] = 1.0;
    adam_step(store, cfg);
    const double after_first = theta[0];
    store.at("w").grad[0] = -1.0;
    adam_step(store, cfg);
    const double second_step = theta[0] - after_first;
    // m2 = 0.9*0.1 - 0.1 = -0.01, bias-corrected by 1-0.81; vhat = 1 exactly
    CHECK(second_step == doctest::Approx(0.1 * (0.01 / 0.19)).epsilon(1e-6));
    CHECK(std::fabs(second_step) < cfg.lr);
  }
}

TEST_CASE("gradient of a quadratic is exact to roundoff") {
  Rng rng(9);
  ParamStore store;
  Tensor& theta = store.create("theta", {1, 6});
  for (long i = 0; i < 6; ++i) theta[i] = rng.uniform(-1, 1);
  const Tensor a = random_matrix(1, 6, rng);
  const Tensor b = random_matrix(1, 6, rng);

  auto value = [&](const ParamStore& s) {
    const Tensor& t = s.value("theta");
    double f = 0.0;
    for (long i = 0; i < 6; ++i) f += a[i] * t[i] * t[i] + b[i] * t[i];
    return f;
  };
  auto grad = [&](const ParamStore& s, GradMap& g) {
    const Tensor& t = s.value("theta");
    Tensor& gt = grad_slot(g, "theta", t);
    for (long i = 0; i < 6; ++i) gt[i] = 2.0 * a[i] * t[i] + b[i];
  };
  const GradCheckResult r = gradient_check(value, grad, store, 1e-5);
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("linear layer gradient check, including the input path") {
  Rng rng(21);
  ParamStore store;
  const Linear lin("lin", 5, 4);
  std::mt19937_64 init_rng(3);
  lin.init(store, init_rng);
  store.create("x", {7, 5});
  for (long i = 0; i < 35; ++i) store.at("x").value[i] = rng.uniform(-1, 1);
  const Tensor w = random_matrix(7, 4, rng);

  auto value = [&](const ParamStore& s) {
    return weighted_sum(lin.forward(s, s.value("x")), w);
  };
  auto grad = [&](const ParamStore& s, GradMap& g) {
    Linear::Ctx ctx;
    (void)lin.forward(s, s.value("x"), &ctx);
    const Tensor dx = lin.backward(s, ctx, w, g);
    grad_slot(g, "x", s.value("x")) = dx;
  };
  CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("layer norm gradient check") {
  Rng rng(22);
  ParamStore store;
  const LayerNorm ln("ln", 6);
  ln.init(store);
  store.create("x", {4, 6});
  for (long i = 0; i < 24; ++i) store.at("x").value[i] = rng.uniform(-2, 2);
  const Tensor w = random_matrix(4, 6, rng);

  auto value = [&](const ParamStore& s) { return weighted_sum(ln.forward(s, s.value("x")), w); };
  auto grad = [&](const ParamStore& s, GradMap& g) {
    LayerNorm::Ctx ctx;
    (void)ln.forward(s, s.value("x"), &ctx);
    grad_slot(g, "x", s.value("x")) = ln.backward(s, ctx, w, g);
  };
  CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("masked softmax gradient check") {
  Rng rng(23);
  AttentionMask mask(3, 5);
  for (long r = 0; r < 3; ++r) {
    mask.set(r, r, true);
    for (long c = 0; c < 5; ++c)
      if (rng.u01() < 0.5) mask.set(r, c, true);
  }
  ParamStore store;
  store.create("logits", {3, 5});
  for (long i = 0; i < 15; ++i) store.at("logits").value[i] = rng.uniform(-2, 2);
  const Tensor w = random_matrix(3, 5, rng);

  auto value = [&](const ParamStore& s) {
    return weighted_sum(masked_softmax(s.value("logits"), &mask), w);
  };
  auto grad = [&](const ParamStore& s, GradMap& g) {
    const Tensor probs = masked_softmax(s.value("logits"), &mask);
    grad_slot(g, "logits", s.value("logits")) = masked_softmax_backward(probs, w);
  };
  CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("gelu matches central differences") {
  Rng rng(24);
  const Tensor x = random_matrix(2, 8, rng, 2.0);
  const Tensor dy = random_matrix(2, 8, rng);
  const Tensor dx = gelu_backward(x, dy);
  for (long i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    const double numeric = (gelu(xp)[i] - gelu(xm)[i]) / 2e-6;
    CHECK(dx[i] == doctest::Approx(numeric * dy[i]).epsilon(1e-6));
  }
}

TEST_CASE("attention with identity-row mask reads only the own row") {
  ParamStore store;
  const MultiHeadAttention mha("mha", 8, 2);
  std::mt19937_64 init_rng(11);
  mha.init(store, init_rng);
  Rng rng(31);
  const Tensor x = random_matrix(6, 8, rng);
  AttentionMask self(6, 6);
  for (long i = 0; i < 6; ++i) self.set(i, i, true);
  const Tensor base = mha.forward(store, x, &self, 6);

  Tensor perturbed = x;
  for (long c = 0; c < 8; ++c) perturbed(3, c) += rng.uniform(0.5, 1.5);
  const Tensor out = mha.forward(store, perturbed, &self, 6);
  for (long r = 0; r < 6; ++r) {
    if (r == 3) continue;
    for (long c = 0; c < 8; ++c) CHECK(out(r, c) == base(r, c));  // bit-identical
  }
}

TEST_CASE("attention rows under a full mask are convex mixes of the inputs") {
  // with identity value/output projections and zero biases, each output row
  // must land inside the input range
  ParamStore store;
  const MultiHeadAttention mha("mha", 4, 1);
  std::mt19937_64 init_rng(13);
  mha.init(store, init_rng);
  for (const char* name : {"mha.wv.w", "mha.wo.w"}) {
    Tensor& w = store.at(name).value;
    w.fill(0.0);
    for (long i = 0; i < 4; ++i) w(i, i) = 1.0;
  }
  store.at("mha.wv.b").value.fill(0.0);
  store.at("mha.wo.b").value.fill(0.0);

  Tensor x(3, 4);
  for (long r = 0; r < 3; ++r)
    for (long c = 0; c < 4; ++c) x(r, c) = static_cast<double>(r);
  const Tensor out = mha.forward(store, x, nullptr, 3);
  for (long r = 0; r < 3; ++r)
    for (long c = 0; c < 4; ++c) {
      CHECK(out(r, c) >= 0.0 - 1e-12);
      CHECK(out(r, c) <= 2.0 + 1e-12);
    }
}

TEST_CASE("attention ignores perturbations at masked columns bit for bit") {
  ParamStore store;
  const MultiHeadAttention mha("mha", 8, 2);
  std::mt19937_64 init_rng(17);
  mha.init(store, init_rng);
  Rng rng(41);
  const Tensor x = random_matrix(5, 8, rng);
  AttentionMask mask(5, 5);
  for (long r = 0; r < 5; ++r) mask.set(r, r, true);
  mask.set(0, 2, true);
  mask.set(1, 0, true);
  mask.set(3, 4, true);

  const Tensor base = mha.forward(store, x, &mask, 5);
  Tensor perturbed = x;
  for (long c = 0; c < 8; ++c) perturbed(4, c) = rng.uniform(-3, 3);
  const Tensor out = mha.forward(store, perturbed, &mask, 5);
  for (long r = 0; r < 3; ++r)  // rows 0..2 never see column 4
    for (long c = 0; c < 8; ++c) CHECK(out(r, c) == base(r, c));
}

TEST_CASE("full attention block gradient check") {
  ParamStore store;
  const MultiHeadAttention mha("mha", 8, 2);
  std::mt19937_64 init_rng(19);
  mha.init(store, init_rng);
  Rng rng(43);
  store.create("x", {5, 8});
  for (long i = 0; i < 40; ++i) store.at("x").value[i] = rng.uniform(-1, 1);
  const Tensor w = random_matrix(5, 8, rng);

  SUBCASE("unmasked") {
    auto value = [&](const ParamStore& s) {
      return weighted_sum(mha.forward(s, s.value("x"), nullptr, 5), w);
    };
    auto grad = [&](const ParamStore& s, GradMap& g) {
      MultiHeadAttention::Ctx ctx;
      (void)mha.forward(s, s.value("x"), nullptr, 5, &ctx);
      grad_slot(g, "x", s.value("x")) = mha.backward(s, ctx, w, g);
    };
    CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
  }

  SUBCASE("with a random dependency-style mask") {
    AttentionMask mask(5, 5);
    for (long r = 0; r < 5; ++r) {
      mask.set(r, r, true);
      for (long c = 0; c < 5; ++c)
        if (rng.u01() < 0.5) mask.set(r, c, true);
    }
    auto value = [&](const ParamStore& s) {
      return weighted_sum(mha.forward(s, s.value("x"), &mask, 5), w);
    };
    auto grad = [&](const ParamStore& s, GradMap& g) {
      MultiHeadAttention::Ctx ctx;
      (void)mha.forward(s, s.value("x"), &mask, 5, &ctx);
      grad_slot(g, "x", s.value("x")) = mha.backward(s, ctx, w, g);
    };
    CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
  }
}

TEST_CASE("transformer block gradient check") {
  ParamStore store;
  const TransformerBlock block("blk", 8, 2, 16);
  std::mt19937_64 init_rng(23);
  block.init(store, init_rng);
  Rng rng(47);
  store.create("x", {4, 8});
  for (long i = 0; i < 32; ++i) store.at("x").value[i] = rng.uniform(-1, 1);
  const Tensor w = random_matrix(4, 8, rng);
  AttentionMask mask(4, 4);
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c <= r; ++c) mask.set(r, c, true);

  auto value = [&](const ParamStore& s) {
    return weighted_sum(block.forward(s, s.value("x"), &mask, 4), w);
  };
  auto grad = [&](const ParamStore& s, GradMap& g) {
    TransformerBlock::Ctx ctx;
    (void)block.forward(s, s.value("x"), &mask, 4, &ctx);
    grad_slot(g, "x", s.value("x")) = block.backward(s, ctx, w, g);
  };
  CHECK(gradient_check(value, grad, store, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("forward and backward keep values finite") {
  ParamStore store;
  const TransformerBlock block("blk", 8, 2, 32);
  std::mt19937_64 init_rng(29);
  block.init(store, init_rng);
  Rng rng(53);
  const Tensor x = random_matrix(6, 8, rng, 3.0);
  TransformerBlock::Ctx ctx;
  const Tensor y = block.forward(store, x, nullptr, 6, &ctx);
  CHECK(y.all_finite());
  GradMap grads;
  const Tensor dx = block.backward(store, ctx, random_matrix(6, 8, rng), grads);
  CHECK(dx.all_finite());
  for (const auto& [_, g] : grads) CHECK(g.all_finite());
}

TEST_CASE("param store basics") {
  ParamStore store;
  store.create("a", {2, 3});
  CHECK_THROWS_AS(store.create("a", {2, 3}), std::logic_error);
  CHECK_THROWS_AS(store.at("missing"), std::out_of_range);
  CHECK(store.total_size() == 6);

  GradMap grads;
  grad_slot(grads, "a", store.value("a")).fill(2.0);
  commit_grads(store, grads);
  CHECK(store.at("a").grad[0] == 2.0);
  clip_grad_norm(store, 1.0);
  double norm = 0.0;
  for (long i = 0; i < 6; ++i) norm += store.at("a").grad[i] * store.at("a").grad[i];
  CHECK(std::sqrt(norm) == doctest::Approx(1.0));
}
