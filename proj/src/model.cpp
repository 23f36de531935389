#include "sar/model.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sar {

using nlohmann::json;

void ModelConfig::validate() const {
  if (joints < 1 || joint_dim < 1) throw std::invalid_argument("model config: bad joint sizes");
  if (positions < 3) throw std::invalid_argument("model config: need at least one interior frame");
  if (spatial_blocks < 1 || temporal_blocks < 1 || ff_multiplier < 1)
    throw std::invalid_argument("model config: bad block counts");
  if (spatial_heads < 1 || joint_dim % spatial_heads != 0)
    throw std::invalid_argument("model config: joint_dim must divide into spatial heads");
  if (temporal_heads < 1 || width() % temporal_heads != 0)
    throw std::invalid_argument("model config: width must divide into temporal heads");
}

std::string ModelConfig::to_json() const {
  json doc;
  doc["joints"] = joints;
  doc["joint_dim"] = joint_dim;
  doc["spatial_blocks"] = spatial_blocks;
  doc["spatial_heads"] = spatial_heads;
  doc["temporal_blocks"] = temporal_blocks;
  doc["temporal_heads"] = temporal_heads;
  doc["ff_multiplier"] = ff_multiplier;
  doc["positions"] = positions;
  return doc.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model config parse error: ") + e.what());
  }
  ModelConfig cfg;
  for (const char* field : {"joints", "joint_dim", "spatial_blocks", "spatial_heads",
                            "temporal_blocks", "temporal_heads", "ff_multiplier", "positions"})
    if (!doc.contains(field))
      throw std::runtime_error(std::string("model config is missing field \"") + field + "\"");
  cfg.joints = doc["joints"].get<long>();
  cfg.joint_dim = doc["joint_dim"].get<long>();
  cfg.spatial_blocks = doc["spatial_blocks"].get<long>();
  cfg.spatial_heads = doc["spatial_heads"].get<long>();
  cfg.temporal_blocks = doc["temporal_blocks"].get<long>();
  cfg.temporal_heads = doc["temporal_heads"].get<long>();
  cfg.ff_multiplier = doc["ff_multiplier"].get<long>();
  cfg.positions = doc["positions"].get<long>();
  cfg.validate();
  return cfg;
}

void ModelConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model config: " + path);
  out << to_json() << "\n";
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

SarModel::SarModel(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const long d = cfg_.joint_dim;
  const long w = cfg_.width();
  joint_proj_ = Linear("embed.joint_proj", 3, d);
  for (long b = 0; b < cfg_.spatial_blocks; ++b)
    spatial_.emplace_back("spatial.block" + std::to_string(b), d, cfg_.spatial_heads,
                          cfg_.ff_multiplier * d);
  spatial_ln_ = LayerNorm("spatial.final_ln", d);
  for (long b = 0; b < cfg_.temporal_blocks; ++b)
    temporal_.emplace_back("temporal.block" + std::to_string(b), w, cfg_.temporal_heads,
                           cfg_.ff_multiplier * w);
  temporal_ln_ = LayerNorm("temporal.final_ln", w);
  dec1_ = Linear("decoder.fc1", w, cfg_.ff_multiplier * w);
  dec2_ = Linear("decoder.fc2", cfg_.ff_multiplier * w, cfg_.joints * 3);
  position_table_ = sinusoidal_position_encoding(cfg_.positions, w);
}

ParamStore SarModel::init_params(std::uint64_t seed) const {
  ParamStore store;
  std::mt19937_64 rng(seed);
  joint_proj_.init(store, rng);
  std::uniform_real_distribution<double> emb_dist(-0.1, 0.1);
  Tensor& joint_emb = store.create("embed.joint_emb", {cfg_.joints, cfg_.joint_dim});
  for (long i = 0; i < joint_emb.size(); ++i) joint_emb[i] = emb_dist(rng);
  Tensor& empty_flag = store.create("embed.empty_flag", {1, cfg_.width()});
  for (long i = 0; i < empty_flag.size(); ++i) empty_flag[i] = emb_dist(rng);
  for (const auto& block : spatial_) block.init(store, rng);
  spatial_ln_.init(store);
  for (const auto& block : temporal_) block.init(store, rng);
  temporal_ln_.init(store);
  dec1_.init(store, rng);
  dec2_.init(store, rng);
  return store;
}

long SarModel::param_count() const {
  const long j = cfg_.joints, d = cfg_.joint_dim, w = cfg_.width();
  const long fs = cfg_.ff_multiplier * d, ft = cfg_.ff_multiplier * w;
  auto block_params = [](long width, long hidden) {
    const long attn = 4 * width * width + 3 * width;  // key projection has no bias
    const long ffn = width * hidden + hidden + hidden * width + width;
    const long norms = 2 * (2 * width);
    return attn + ffn + norms;
  };
  long total = 3 * d + d;      // joint projection
  total += j * d;              // joint-index embedding
  total += w;                  // empty-flag embedding
  total += cfg_.spatial_blocks * block_params(d, fs) + 2 * d;
  total += cfg_.temporal_blocks * block_params(w, ft) + 2 * w;
  total += w * ft + ft + ft * (3 * j) + 3 * j;  // pose decoder
  return total;
}

Tensor SarModel::encode_poses(const ParamStore& store, const Tensor& poses,
                              const std::vector<std::uint8_t>& empty, Ctx* ctx) const {
  const long n = cfg_.positions, j = cfg_.joints, d = cfg_.joint_dim;
  if (poses.rank() != 2 || poses.rows() != n || poses.cols() != 3 * j)
    throw std::invalid_argument("encode_poses: expected " + std::to_string(n) + " x " +
                                std::to_string(3 * j) + " pose tensor");
  if (!empty.empty() && static_cast<long>(empty.size()) != n)
    throw std::invalid_argument("encode_poses: empty-flag length mismatch");

  if (ctx) {
    ctx->spatial_ctx.resize(static_cast<size_t>(cfg_.spatial_blocks));
    ctx->temporal_ctx.resize(static_cast<size_t>(cfg_.temporal_blocks));
    ctx->empty = empty;
  }

  // One token per joint; (n*j) x 3 has the same layout as n x (3j).
  Tensor tokens = poses.reshaped({n * j, 3});
  Tensor x = joint_proj_.forward(store, tokens, ctx ? &ctx->joint_proj_ctx : nullptr);
  const Tensor& joint_emb = store.value("embed.joint_emb");
  for (long r = 0; r < x.rows(); ++r) {
    const double* emb = joint_emb.row(r % j);
    double* row = x.row(r);
    for (long c = 0; c < d; ++c) row[c] += emb[c];
  }
  for (size_t b = 0; b < spatial_.size(); ++b)
    x = spatial_[b].forward(store, x, nullptr, j, ctx ? &ctx->spatial_ctx[b] : nullptr);
  x = spatial_ln_.forward(store, x, ctx ? &ctx->spatial_ln_ctx : nullptr);

  Tensor e = x.reshaped({n, cfg_.width()});
  for (long r = 0; r < n; ++r) {
    const double* pe = position_table_.row(r);
    double* row = e.row(r);
    for (long c = 0; c < cfg_.width(); ++c) row[c] += pe[c];
  }
  if (!empty.empty()) {
    const Tensor& flag = store.value("embed.empty_flag");
    for (long r = 0; r < n; ++r) {
      if (!empty[static_cast<size_t>(r)]) continue;
      double* row = e.row(r);
      for (long c = 0; c < cfg_.width(); ++c) row[c] += flag[c];
    }
  }
  return e;
}

Tensor SarModel::temporal_decode(const ParamStore& store, const Tensor& embeddings,
                                 const AttentionMask& fdam, Ctx* ctx) const {
  if (embeddings.rows() != cfg_.positions || embeddings.cols() != cfg_.width())
    throw std::invalid_argument("temporal_decode: embedding shape mismatch");
  if (fdam.rows() != cfg_.positions || fdam.cols() != cfg_.positions)
    throw std::invalid_argument("temporal_decode: mask size mismatch");
  if (ctx && ctx->temporal_ctx.size() != static_cast<size_t>(cfg_.temporal_blocks))
    ctx->temporal_ctx.resize(static_cast<size_t>(cfg_.temporal_blocks));
  Tensor e = embeddings;
  for (size_t b = 0; b < temporal_.size(); ++b)
    e = temporal_[b].forward(store, e, &fdam, cfg_.positions,
                             ctx ? &ctx->temporal_ctx[b] : nullptr);
  return temporal_ln_.forward(store, e, ctx ? &ctx->temporal_ln_ctx : nullptr);
}

Tensor SarModel::decode_poses(const ParamStore& store, const Tensor& embeddings,
                              Ctx* ctx) const {
  if (embeddings.cols() != cfg_.width())
    throw std::invalid_argument("decode_poses: embedding width mismatch");
  Tensor h = dec1_.forward(store, embeddings, ctx ? &ctx->dec1_ctx : nullptr);
  Tensor a = gelu(h);
  if (ctx) ctx->dec_pre_act = std::move(h);
  return dec2_.forward(store, a, ctx ? &ctx->dec2_ctx : nullptr);
}

Tensor SarModel::forward(const ParamStore& store, const Tensor& poses,
                         const std::vector<std::uint8_t>& empty, const AttentionMask& fdam,
                         Ctx* ctx) const {
  Tensor e = encode_poses(store, poses, empty, ctx);
  e = temporal_decode(store, e, fdam, ctx);
  return decode_poses(store, e, ctx);
}

void SarModel::backward(const ParamStore& store, const Ctx& ctx, const Tensor& d_out,
                        GradMap& grads) const {
  const long n = cfg_.positions, j = cfg_.joints, d = cfg_.joint_dim;

  // Pose decoder.
  const Tensor da = dec2_.backward(store, ctx.dec2_ctx, d_out, grads);
  const Tensor dh = gelu_backward(ctx.dec_pre_act, da);
  Tensor de = dec1_.backward(store, ctx.dec1_ctx, dh, grads);

  // Temporal stack.
  de = temporal_ln_.backward(store, ctx.temporal_ln_ctx, de, grads);
  for (size_t b = temporal_.size(); b-- > 0;)
    de = temporal_[b].backward(store, ctx.temporal_ctx[b], de, grads);

  // Empty-flag embedding; the position table is constant.
  if (!ctx.empty.empty()) {
    Tensor& dflag = grad_slot(grads, "embed.empty_flag", store.value("embed.empty_flag"));
    for (long r = 0; r < n; ++r) {
      if (!ctx.empty[static_cast<size_t>(r)]) continue;
      const double* row = de.row(r);
      for (long c = 0; c < cfg_.width(); ++c) dflag[c] += row[c];
    }
  }

  // Spatial stack over joint tokens.
  Tensor dx = de.reshaped({n * j, d});
  dx = spatial_ln_.backward(store, ctx.spatial_ln_ctx, dx, grads);
  for (size_t b = spatial_.size(); b-- > 0;)
    dx = spatial_[b].backward(store, ctx.spatial_ctx[b], dx, grads);

  Tensor& demb = grad_slot(grads, "embed.joint_emb", store.value("embed.joint_emb"));
  for (long r = 0; r < dx.rows(); ++r) {
    double* dst = demb.row(r % j);
    const double* src = dx.row(r);
    for (long c = 0; c < d; ++c) dst[c] += src[c];
  }
  joint_proj_.backward(store, ctx.joint_proj_ctx, dx, grads);
}

Tensor poses_to_tensor(const std::vector<Pose>& poses) {
  if (poses.empty()) return Tensor(0, 0);
  const long j = poses.front().joint_count();
  Tensor t(static_cast<long>(poses.size()), 3 * j);
  for (size_t f = 0; f < poses.size(); ++f) {
    if (poses[f].joint_count() != j)
      throw std::invalid_argument("poses_to_tensor: inconsistent joint counts");
    double* row = t.row(static_cast<long>(f));
    for (long q = 0; q < j; ++q) {
      const Vec3& v = poses[f].joints[static_cast<size_t>(q)].axis_angle;
      row[3 * q] = v.x;
      row[3 * q + 1] = v.y;
      row[3 * q + 2] = v.z;
    }
  }
  return t;
}

Tensor motion_to_tensor(const Motion& motion) { return poses_to_tensor(motion.frames); }

Pose row_to_pose(const Tensor& rows, long row, long joints) {
  if (rows.cols() != 3 * joints) throw std::invalid_argument("row_to_pose: width mismatch");
  Pose p;
  p.joints.resize(static_cast<size_t>(joints));
  const double* src = rows.row(row);
  for (long q = 0; q < joints; ++q)
    p.joints[static_cast<size_t>(q)].axis_angle = {src[3 * q], src[3 * q + 1], src[3 * q + 2]};
  return p;
}

Motion tensor_to_motion(const Tensor& rows, long joints, double fps) {
  Motion m;
  m.fps = fps;
  for (long r = 0; r < rows.rows(); ++r) m.frames.push_back(row_to_pose(rows, r, joints));
  return m;
}

}  // namespace sar
