#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sar/mask.hpp"
#include "sar/tensor.hpp"

namespace sar {

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

class ParamStore {
 public:
  Tensor& create(const std::string& name, std::vector<long> shape);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  const Tensor& value(const std::string& name) const { return at(name).value; }
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::map<std::string, Param>& params() { return params_; }
  const std::map<std::string, Param>& params() const { return params_; }

  long step() const { return step_; }
  void set_step(long s) { step_ = s; }
  long total_size() const;
  void zero_grads();

 private:
  std::map<std::string, Param> params_;
  long step_ = 0;
};

// Per-sample gradient sink; lets batch elements run backward in parallel and
// be reduced in a fixed order afterwards.
using GradMap = std::map<std::string, Tensor>;

Tensor& grad_slot(GradMap& grads, const std::string& name, const Tensor& like);
void commit_grads(ParamStore& store, const GradMap& grads);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every parameter; consumes and clears the stored
// gradients and bumps the step counter.
void adam_step(ParamStore& store, const AdamConfig& cfg);

// Global-norm gradient clipping over the whole store.
void clip_grad_norm(ParamStore& store, double max_norm);

// Row softmax with boolean masking. Masked entries come out exactly zero;
// a fully masked row is an error. Pass mask == nullptr for no masking.
Tensor masked_softmax(const Tensor& logits, const AttentionMask* mask);
Tensor masked_softmax_backward(const Tensor& probs, const Tensor& dprobs);

// Standard interleaved sin/cos positional table, wavelength base 10000.
Tensor sinusoidal_position_encoding(long n_positions, long dim);

Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

// y = x * W^T + b with W stored out-by-in.
struct Linear {
  std::string w_name, b_name;
  long in = 0, out = 0;
  bool has_bias = true;

  Linear() = default;
  Linear(const std::string& prefix, long in_dim, long out_dim, bool bias = true)
      : w_name(prefix + ".w"), b_name(prefix + ".b"), in(in_dim), out(out_dim), has_bias(bias) {}

  void init(ParamStore& store, std::mt19937_64& rng) const;

  struct Ctx {
    Tensor x;
  };
  Tensor forward(const ParamStore& store, const Tensor& x, Ctx* ctx = nullptr) const;
  Tensor backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                  GradMap& grads) const;
};

struct LayerNorm {
  std::string g_name, b_name;
  long dim = 0;
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& prefix, long d)
      : g_name(prefix + ".g"), b_name(prefix + ".b"), dim(d) {}

  void init(ParamStore& store) const;

  struct Ctx {
    Tensor xhat;
    std::vector<double> rstd;
  };
  Tensor forward(const ParamStore& store, const Tensor& x, Ctx* ctx = nullptr) const;
  Tensor backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                  GradMap& grads) const;
};

// Scaled dot-product attention over rows. The input splits into consecutive
// groups of group_size rows; attention runs independently inside each group
// (group_size == rows gives ordinary sequence attention). The same boolean
// mask applies to every head and every group.
struct MultiHeadAttention {
  long width = 0, heads = 0;
  Linear wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& prefix, long w, long h);

  void init(ParamStore& store, std::mt19937_64& rng) const;

  struct Ctx {
    Linear::Ctx q_ctx, k_ctx, v_ctx, o_ctx;
    Tensor q, k, v;
    std::vector<Tensor> probs;  // one G-by-G matrix per (group, head)
    long group_size = 0;
  };
  Tensor forward(const ParamStore& store, const Tensor& x, const AttentionMask* mask,
                 long group_size, Ctx* ctx = nullptr) const;
  Tensor backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                  GradMap& grads) const;
};

struct FeedForward {
  long width = 0, hidden = 0;
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(const std::string& prefix, long w, long h);

  void init(ParamStore& store, std::mt19937_64& rng) const;

  struct Ctx {
    Linear::Ctx fc1_ctx, fc2_ctx;
    Tensor pre_act;
  };
  Tensor forward(const ParamStore& store, const Tensor& x, Ctx* ctx = nullptr) const;
  Tensor backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                  GradMap& grads) const;
};

// Pre-norm residual block: x + attn(ln1(x)), then x + ffn(ln2(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;

  TransformerBlock() = default;
  TransformerBlock(const std::string& prefix, long width, long heads, long ff_hidden);

  void init(ParamStore& store, std::mt19937_64& rng) const;

  struct Ctx {
    LayerNorm::Ctx ln1_ctx, ln2_ctx;
    MultiHeadAttention::Ctx attn_ctx;
    FeedForward::Ctx ffn_ctx;
  };
  Tensor forward(const ParamStore& store, const Tensor& x, const AttentionMask* mask,
                 long group_size, Ctx* ctx = nullptr) const;
  Tensor backward(const ParamStore& store, const Ctx& ctx, const Tensor& dy,
                  GradMap& grads) const;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

// Central-difference check of grad_fn against value_fn over every parameter
// coordinate. Relative error is |analytic - numeric| over
// max(1e-8, |analytic| + |numeric|).
GradCheckResult gradient_check(const std::function<double(const ParamStore&)>& value_fn,
                               const std::function<void(const ParamStore&, GradMap&)>& grad_fn,
                               const ParamStore& theta, double h);

}  // namespace sar
