#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sar/mask.hpp"
#include "sar/motion.hpp"
#include "sar/nn.hpp"
#include "sar/tensor.hpp"

namespace sar {

struct ModelConfig {
  long joints = 4;          // J
  long joint_dim = 8;       // per-joint embedding width D
  long spatial_blocks = 2;
  long spatial_heads = 2;
  long temporal_blocks = 2;
  long temporal_heads = 2;
  long ff_multiplier = 4;
  long positions = 9;       // N = T + 2

  long width() const { return joints * joint_dim; }
  long interior() const { return positions - 2; }
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  void save(const std::string& path) const;
  static ModelConfig load(const std::string& path);
};

// Spatial pose encoder -> temporal decoder under an attention mask ->
// spatial pose decoder. Pose sequences travel as N-by-(J*3) tensors.
class SarModel {
 public:
  explicit SarModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }

  ParamStore init_params(std::uint64_t seed) const;

  // Closed-form learnable-parameter count for this configuration.
  long param_count() const;

  struct Ctx {
    Linear::Ctx joint_proj_ctx;
    std::vector<TransformerBlock::Ctx> spatial_ctx;
    LayerNorm::Ctx spatial_ln_ctx;
    std::vector<TransformerBlock::Ctx> temporal_ctx;
    LayerNorm::Ctx temporal_ln_ctx;
    Linear::Ctx dec1_ctx, dec2_ctx;
    Tensor dec_pre_act;
    std::vector<std::uint8_t> empty;
  };

  // Per-frame spatial encoding plus position table; rows flagged in `empty`
  // get the learned empty embedding added. Returns N x width.
  Tensor encode_poses(const ParamStore& store, const Tensor& poses,
                      const std::vector<std::uint8_t>& empty, Ctx* ctx = nullptr) const;

  // Masked decoder stack over the N rows.
  Tensor temporal_decode(const ParamStore& store, const Tensor& embeddings,
                         const AttentionMask& fdam, Ctx* ctx = nullptr) const;

  // Row-wise two-layer MLP back to N x (J*3).
  Tensor decode_poses(const ParamStore& store, const Tensor& embeddings,
                      Ctx* ctx = nullptr) const;

  Tensor forward(const ParamStore& store, const Tensor& poses,
                 const std::vector<std::uint8_t>& empty, const AttentionMask& fdam,
                 Ctx* ctx = nullptr) const;

  // Accumulates parameter gradients for a forward pass recorded in ctx.
  void backward(const ParamStore& store, const Ctx& ctx, const Tensor& d_out,
                GradMap& grads) const;

 private:
  ModelConfig cfg_;
  Linear joint_proj_;
  std::vector<TransformerBlock> spatial_;
  LayerNorm spatial_ln_;
  std::vector<TransformerBlock> temporal_;
  LayerNorm temporal_ln_;
  Linear dec1_, dec2_;
  Tensor position_table_;
};

// Flattens poses into rows of 3J values (x,y,z per joint).
Tensor poses_to_tensor(const std::vector<Pose>& poses);
Tensor motion_to_tensor(const Motion& motion);
Pose row_to_pose(const Tensor& rows, long row, long joints);
Motion tensor_to_motion(const Tensor& rows, long joints, double fps);

}  // namespace sar
