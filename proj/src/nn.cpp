#include "sar/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sar/kernels.hpp"

namespace sar {

namespace {

constexpr double kMaskPenalty = -1e30;

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

void add_bias_rows(Tensor& y, const Tensor& b) {
  const long n = y.cols();
  kernels::parallel_for(y.rows(), [&](long i) {
    double* row = y.row(i);
    for (long j = 0; j < n; ++j) row[j] += b[j];
  });
}

}  // namespace

Tensor& ParamStore::create(const std::string& name, std::vector<long> shape) {
  if (params_.count(name)) throw std::logic_error("parameter already exists: " + name);
  Param p;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.m = Tensor(shape);
  p.v = Tensor(std::move(shape));
  auto [it, ok] = params_.emplace(name, std::move(p));
  (void)ok;
  return it->second.value;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

long ParamStore::total_size() const {
  long n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

Tensor& grad_slot(GradMap& grads, const std::string& name, const Tensor& like) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, Tensor(like.shape())).first;
  return it->second;
}

void commit_grads(ParamStore& store, const GradMap& grads) {
  for (const auto& [name, g] : grads) {
    Tensor& dst = store.at(name).grad;
    check_same_shape(dst, g, "commit_grads");
    for (long i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [_, p] : store.params()) {
    for (long i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      p.grad[i] = 0.0;
    }
  }
}

void clip_grad_norm(ParamStore& store, double max_norm) {
  double total = 0.0;
  for (const auto& [_, p] : store.params())
    for (long i = 0; i < p.grad.size(); ++i) total += p.grad[i] * p.grad[i];
  total = std::sqrt(total);
  if (total <= max_norm || total == 0.0) return;
  const double scale = max_norm / total;
  for (auto& [_, p] : store.params())
    for (long i = 0; i < p.grad.size(); ++i) p.grad[i] *= scale;
}

Tensor masked_softmax(const Tensor& logits, const AttentionMask* mask) {
  if (mask && (mask->rows() != logits.rows() || mask->cols() != logits.cols()))
    throw std::invalid_argument("masked_softmax: mask shape mismatch");
  const long cols = logits.cols();
  if (mask) {
    for (long i = 0; i < logits.rows(); ++i) {
      bool any = false;
      for (long j = 0; j < cols && !any; ++j) any = mask->at(i, j);
      if (!any) throw std::invalid_argument("masked_softmax: fully masked row");
    }
  }
  Tensor probs(logits.rows(), cols);
  kernels::parallel_for(logits.rows(), [&](long i) {
    const double* in = logits.row(i);
    double* out = probs.row(i);
    const std::uint8_t* mrow = mask ? mask->row(i) : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < cols; ++j) {
      const double v = in[j] + (mrow && !mrow[j] ? kMaskPenalty : 0.0);
      out[j] = v;
      if (v > mx) mx = v;
    }
    double sum = 0.0;
    for (long j = 0; j < cols; ++j) {
      out[j] = std::exp(out[j] - mx);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (long j = 0; j < cols; ++j) out[j] *= inv;
    if (mrow)
      for (long j = 0; j < cols; ++j)
        if (!mrow[j]) out[j] = 0.0;
  });
  return probs;
}

Tensor masked_softmax_backward(const Tensor& probs, const Tensor& dprobs) {
  check_same_shape(probs, dprobs, "masked_softmax_backward");
  const long cols = probs.cols();
  Tensor dlogits(probs.rows(), cols);
  kernels::parallel_for(probs.rows(), [&](long i) {
    const double* p = probs.row(i);
    const double* dp = dprobs.row(i);
    double* dl = dlogits.row(i);
    double inner = 0.0;
    for (long j = 0; j < cols; ++j) inner += dp[j] * p[j];
    for (long j = 0; j < cols; ++j) dl[j] = p[j] * (dp[j] - inner);
  });
  return dlogits;
}

Tensor sinusoidal_position_encoding(long n_positions, long dim) {
  if (dim % 2 != 0) throw std::invalid_argument("position encoding dim must be even");
  Tensor pe(n_positions, dim);
  for (long pos = 0; pos < n_positions; ++pos) {
    for (long k = 0; k < dim / 2; ++k) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
      pe(pos, 2 * k) = std::sin(static_cast<double>(pos) * freq);
      pe(pos, 2 * k + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return pe;
}

Tensor gelu(const Tensor& x) {
  Tensor y(x.shape());
  kernels::parallel_for(x.size(), [&](long i) {
    y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * M_SQRT1_2));
  });
  return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  check_same_shape(x, dy, "gelu_backward");
  Tensor dx(x.shape());
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  kernels::parallel_for(x.size(), [&](long i) {
    const double cdf = 0.5 * (1.0 + std::erf(x[i] * M_SQRT1_2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  });
  return dx;
}

void Linear::init(ParamStore& store, std::mt19937_64& rng) const {
  Tensor& w = store.create(w_name, {out, in});
  if (has_bias) store.create(b_name, {1, out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (long i = 0; i < w.size(); ++i) w[i] = dist(rng);
}

Tensor Linear::forward(const ParamStore& store, const Tensor& x, Ctx* ctx) const {
  if (x.cols() != in) throw std::invalid_argument("linear: input width mismatch");
  const Tensor& w = store.value(w_name);
  Tensor y(x.rows(), out);
  kernels::matmul(x, false, w, true, y);
  if (has_bias) add_bias_rows(y, store.value(b_name));
  if (ctx) ctx->x = x;
  return y;
}

Tensor Linear::backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                        GradMap& grads) const {
  const Tensor& w = store.value(w_name);
  Tensor& dw = grad_slot(grads, w_name, w);
  kernels::matmul(dy, true, ctx.x, false, dw, /*accumulate=*/true);
  if (has_bias) {
    Tensor& db = grad_slot(grads, b_name, store.value(b_name));
    for (long i = 0; i < dy.rows(); ++i) {
      const double* row = dy.row(i);
      for (long j = 0; j < out; ++j) db[j] += row[j];
    }
  }
  Tensor dx(dy.rows(), in);
  kernels::matmul(dy, false, w, false, dx);
  return dx;
}

void LayerNorm::init(ParamStore& store) const {
  Tensor& g = store.create(g_name, {1, dim});
  store.create(b_name, {1, dim});
  g.fill(1.0);
}

Tensor LayerNorm::forward(const ParamStore& store, const Tensor& x, Ctx* ctx) const {
  if (x.cols() != dim) throw std::invalid_argument("layer_norm: input width mismatch");
  const Tensor& g = store.value(g_name);
  const Tensor& b = store.value(b_name);
  Tensor y(x.rows(), dim);
  Tensor xhat(x.rows(), dim);
  std::vector<double> rstd(static_cast<size_t>(x.rows()));
  kernels::parallel_for(x.rows(), [&](long i) {
    const double* in_row = x.row(i);
    double mean = 0.0;
    for (long j = 0; j < dim; ++j) mean += in_row[j];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (long j = 0; j < dim; ++j) {
      const double d = in_row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(dim);
    const double r = 1.0 / std::sqrt(var + kEps);
    rstd[static_cast<size_t>(i)] = r;
    double* xh = xhat.row(i);
    double* out = y.row(i);
    for (long j = 0; j < dim; ++j) {
      xh[j] = (in_row[j] - mean) * r;
      out[j] = g[j] * xh[j] + b[j];
    }
  });
  if (ctx) {
    ctx->xhat = std::move(xhat);
    ctx->rstd = std::move(rstd);
  }
  return y;
}

Tensor LayerNorm::backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                           GradMap& grads) const {
  const Tensor& g = store.value(g_name);
  Tensor& dg = grad_slot(grads, g_name, g);
  Tensor& db = grad_slot(grads, b_name, store.value(b_name));
  for (long i = 0; i < dy.rows(); ++i) {
    const double* dyr = dy.row(i);
    const double* xh = ctx.xhat.row(i);
    for (long j = 0; j < dim; ++j) {
      dg[j] += dyr[j] * xh[j];
      db[j] += dyr[j];
    }
  }
  Tensor dx(dy.rows(), dim);
  kernels::parallel_for(dy.rows(), [&](long i) {
    const double* dyr = dy.row(i);
    const double* xh = ctx.xhat.row(i);
    const double r = ctx.rstd[static_cast<size_t>(i)];
    double m1 = 0.0, m2 = 0.0;
    for (long j = 0; j < dim; ++j) {
      const double gd = dyr[j] * g[j];
      m1 += gd;
      m2 += gd * xh[j];
    }
    m1 /= static_cast<double>(dim);
    m2 /= static_cast<double>(dim);
    double* dxr = dx.row(i);
    for (long j = 0; j < dim; ++j) {
      const double gd = dyr[j] * g[j];
      dxr[j] = r * (gd - m1 - xh[j] * m2);
    }
  });
  return dx;
}

namespace {

Tensor slice_block(const Tensor& t, long row0, long n_rows, long col0, long n_cols) {
  Tensor out(n_rows, n_cols);
  for (long i = 0; i < n_rows; ++i) {
    const double* src = t.row(row0 + i) + col0;
    double* dst = out.row(i);
    for (long j = 0; j < n_cols; ++j) dst[j] = src[j];
  }
  return out;
}

void scatter_block(Tensor& t, const Tensor& block, long row0, long col0) {
  for (long i = 0; i < block.rows(); ++i) {
    const double* src = block.row(i);
    double* dst = t.row(row0 + i) + col0;
    for (long j = 0; j < block.cols(); ++j) dst[j] = src[j];
  }
}

}  // namespace

MultiHeadAttention::MultiHeadAttention(const std::string& prefix, long w, long h)
    : width(w),
      heads(h),
      wq(prefix + ".wq", w, w),
      // the key bias would shift every score in a row uniformly, which
      // softmax cancels exactly; the parameter is unidentifiable, so drop it
      wk(prefix + ".wk", w, w, /*bias=*/false),
      wv(prefix + ".wv", w, w),
      wo(prefix + ".wo", w, w) {
  if (h < 1 || w % h != 0)
    throw std::invalid_argument("attention width must be divisible by head count");
}

void MultiHeadAttention::init(ParamStore& store, std::mt19937_64& rng) const {
  wq.init(store, rng);
  wk.init(store, rng);
  wv.init(store, rng);
  wo.init(store, rng);
}

Tensor MultiHeadAttention::forward(const ParamStore& store, const Tensor& x,
                                   const AttentionMask* mask, long group_size, Ctx* ctx) const {
  if (x.cols() != width) throw std::invalid_argument("attention: input width mismatch");
  if (group_size < 1 || x.rows() % group_size != 0)
    throw std::invalid_argument("attention: rows must split into whole groups");
  if (mask && (mask->rows() != group_size || mask->cols() != group_size))
    throw std::invalid_argument("attention: mask must be group_size square");

  const long n_groups = x.rows() / group_size;
  const long hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Ctx local;
  Ctx& c = ctx ? *ctx : local;
  c.group_size = group_size;
  c.q = wq.forward(store, x, ctx ? &c.q_ctx : nullptr);
  c.k = wk.forward(store, x, ctx ? &c.k_ctx : nullptr);
  c.v = wv.forward(store, x, ctx ? &c.v_ctx : nullptr);
  c.probs.assign(static_cast<size_t>(n_groups * heads), Tensor());

  Tensor gathered(x.rows(), width);
  kernels::parallel_for(n_groups * heads, [&](long idx) {
    const long g = idx / heads;
    const long h = idx % heads;
    const long r0 = g * group_size;
    const long c0 = h * hd;
    const Tensor qb = slice_block(c.q, r0, group_size, c0, hd);
    const Tensor kb = slice_block(c.k, r0, group_size, c0, hd);
    const Tensor vb = slice_block(c.v, r0, group_size, c0, hd);
    Tensor scores(group_size, group_size);
    kernels::matmul_serial(qb, false, kb, true, scores);
    for (long i = 0; i < scores.size(); ++i) scores[i] *= scale;
    Tensor probs = masked_softmax(scores, mask);
    Tensor out(group_size, hd);
    kernels::matmul_serial(probs, false, vb, false, out);
    scatter_block(gathered, out, r0, c0);
    c.probs[static_cast<size_t>(idx)] = std::move(probs);
  });
  return wo.forward(store, gathered, ctx ? &c.o_ctx : nullptr);
}

Tensor MultiHeadAttention::backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                                    GradMap& grads) const {
  const long group_size = ctx.group_size;
  const long n_groups = ctx.q.rows() / group_size;
  const long hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  const Tensor dgathered = wo.backward(store, ctx.o_ctx, dy, grads);
  Tensor dq(ctx.q.rows(), width), dk(ctx.q.rows(), width), dv(ctx.q.rows(), width);
  kernels::parallel_for(n_groups * heads, [&](long idx) {
    const long g = idx / heads;
    const long h = idx % heads;
    const long r0 = g * group_size;
    const long c0 = h * hd;
    const Tensor& probs = ctx.probs[static_cast<size_t>(idx)];
    const Tensor dout = slice_block(dgathered, r0, group_size, c0, hd);
    const Tensor qb = slice_block(ctx.q, r0, group_size, c0, hd);
    const Tensor kb = slice_block(ctx.k, r0, group_size, c0, hd);
    const Tensor vb = slice_block(ctx.v, r0, group_size, c0, hd);

    Tensor dvb(group_size, hd);
    kernels::matmul_serial(probs, true, dout, false, dvb);
    Tensor dprobs(group_size, group_size);
    kernels::matmul_serial(dout, false, vb, true, dprobs);
    Tensor dscores = masked_softmax_backward(probs, dprobs);
    for (long i = 0; i < dscores.size(); ++i) dscores[i] *= scale;
    Tensor dqb(group_size, hd);
    kernels::matmul_serial(dscores, false, kb, false, dqb);
    Tensor dkb(group_size, hd);
    kernels::matmul_serial(dscores, true, qb, false, dkb);

    scatter_block(dq, dqb, r0, c0);
    scatter_block(dk, dkb, r0, c0);
    scatter_block(dv, dvb, r0, c0);
  });

  Tensor dx = wq.backward(store, ctx.q_ctx, dq, grads);
  const Tensor dxk = wk.backward(store, ctx.k_ctx, dk, grads);
  const Tensor dxv = wv.backward(store, ctx.v_ctx, dv, grads);
  for (long i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
  return dx;
}

FeedForward::FeedForward(const std::string& prefix, long w, long h)
    : width(w), hidden(h), fc1(prefix + ".fc1", w, h), fc2(prefix + ".fc2", h, w) {}

void FeedForward::init(ParamStore& store, std::mt19937_64& rng) const {
  fc1.init(store, rng);
  fc2.init(store, rng);
}

Tensor FeedForward::forward(const ParamStore& store, const Tensor& x, Ctx* ctx) const {
  Tensor h = fc1.forward(store, x, ctx ? &ctx->fc1_ctx : nullptr);
  Tensor a = gelu(h);
  if (ctx) ctx->pre_act = std::move(h);
  return fc2.forward(store, a, ctx ? &ctx->fc2_ctx : nullptr);
}

Tensor FeedForward::backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                             GradMap& grads) const {
  const Tensor da = fc2.backward(store, ctx.fc2_ctx, dy, grads);
  const Tensor dh = gelu_backward(ctx.pre_act, da);
  return fc1.backward(store, ctx.fc1_ctx, dh, grads);
}

TransformerBlock::TransformerBlock(const std::string& prefix, long width, long heads,
                                   long ff_hidden)
    : ln1(prefix + ".ln1", width),
      ln2(prefix + ".ln2", width),
      attn(prefix + ".attn", width, heads),
      ffn(prefix + ".ffn", width, ff_hidden) {}

void TransformerBlock::init(ParamStore& store, std::mt19937_64& rng) const {
  ln1.init(store);
  ln2.init(store);
  attn.init(store, rng);
  ffn.init(store, rng);
}

Tensor TransformerBlock::forward(const ParamStore& store, const Tensor& x,
                                 const AttentionMask* mask, long group_size, Ctx* ctx) const {
  Tensor normed = ln1.forward(store, x, ctx ? &ctx->ln1_ctx : nullptr);
  Tensor attn_out = attn.forward(store, normed, mask, group_size, ctx ? &ctx->attn_ctx : nullptr);
  Tensor mid(x.shape());
  for (long i = 0; i < x.size(); ++i) mid[i] = x[i] + attn_out[i];
  Tensor normed2 = ln2.forward(store, mid, ctx ? &ctx->ln2_ctx : nullptr);
  Tensor ffn_out = ffn.forward(store, normed2, ctx ? &ctx->ffn_ctx : nullptr);
  Tensor out(x.shape());
  for (long i = 0; i < x.size(); ++i) out[i] = mid[i] + ffn_out[i];
  return out;
}

Tensor TransformerBlock::backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                                  GradMap& grads) const {
  const Tensor dnormed2 = ffn.backward(store, ctx.ffn_ctx, dy, grads);
  Tensor dmid = ln2.backward(store, ctx.ln2_ctx, dnormed2, grads);
  for (long i = 0; i < dmid.size(); ++i) dmid[i] += dy[i];
  const Tensor dnormed = attn.backward(store, ctx.attn_ctx, dmid, grads);
  Tensor dx = ln1.backward(store, ctx.ln1_ctx, dnormed, grads);
  for (long i = 0; i < dx.size(); ++i) dx[i] += dmid[i];
  return dx;
}

GradCheckResult gradient_check(const std::function<double(const ParamStore&)>& value_fn,
                               const std::function<void(const ParamStore&, GradMap&)>& grad_fn,
                               const ParamStore& theta, double h) {
  GradMap analytic;
  grad_fn(theta, analytic);

  struct Coord {
    std::string name;
    long idx;
    double analytic;
  };
  std::vector<Coord> coords;
  for (const auto& [name, p] : theta.params()) {
    const auto it = analytic.find(name);
    for (long i = 0; i < p.value.size(); ++i)
      coords.push_back({name, i, it == analytic.end() ? 0.0 : it->second[i]});
  }

  std::vector<double> numeric(coords.size());
#pragma omp parallel
  {
    ParamStore local = theta;
#pragma omp for schedule(static)
    for (long ci = 0; ci < static_cast<long>(coords.size()); ++ci) {
      const Coord& c = coords[static_cast<size_t>(ci)];
      double& slot = local.at(c.name).value[c.idx];
      const double orig = slot;
      slot = orig + h;
      const double fp = value_fn(local);
      slot = orig - h;
      const double fm = value_fn(local);
      slot = orig;
      numeric[static_cast<size_t>(ci)] = (fp - fm) / (2.0 * h);
    }
  }

  GradCheckResult result;
  for (size_t i = 0; i < coords.size(); ++i) {
    const double a = coords[i].analytic;
    const double n = numeric[i];
    const double rel = std::fabs(a - n) / std::max(1e-8, std::fabs(a) + std::fabs(n));
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = coords[i].name + "[" + std::to_string(coords[i].idx) + "]";
    }
  }
  return result;
}

}  // namespace sar
