#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sar/depgraph.hpp"
#include "sar/model.hpp"
#include "sar/motion.hpp"
#include "sar/nn.hpp"

namespace sar {

struct TrainConfig {
  long batch_size = 16;
  long steps1 = 20000;  // teacher-forced stage training
  long steps2 = 5000;   // rollout-conditioned smoothing training
  double lr = 1e-4;
  std::uint64_t seed = 0;
  long report_every = 100;
  double clip_norm = 1.0;
  std::string out_dir;  // when set, checkpoints and the loss CSV land here

  void validate() const;
};

// Mean squared difference over every coordinate of two equal-shape tensors.
double mse_loss(const Tensor& gen, const Tensor& gt);

// (prediction row, target frame) pairs read / supervised along the chain.
std::vector<std::pair<long, long>> chain_loss_selection(const Schedule& schedule);

// Identity pairs over the smoothing targets (all interior frames when the
// schedule has no duplicates).
std::vector<std::pair<long, long>> smoothing_loss_selection(const Schedule& schedule);

// MSE over the selected (prediction row, target frame) pairs; optionally
// writes the gradient with respect to the prediction tensor.
double selected_mse(const Tensor& pred, const Tensor& gt,
                    const std::vector<std::pair<long, long>>& selection,
                    Tensor* d_pred = nullptr);

// One optimizer step of teacher-forced training: ground truth everywhere at
// the input, staged mask, loss on the chain rows. Returns the batch loss.
double teacher_forcing_step(const SarModel& model, ParamStore& store,
                            const std::vector<const Tensor*>& batch, const Schedule& schedule,
                            const Fdam& fdam, const AdamConfig& adam, double clip_norm);

// Evaluation-only variant.
double teacher_forcing_loss(const SarModel& model, const ParamStore& store,
                            const std::vector<const Tensor*>& batch, const Schedule& schedule,
                            const Fdam& fdam);

// One optimizer step of smoothing training: the chain is rolled out without
// gradient tracking, then a full-visibility pass is trained against the
// ground-truth interior frames.
double smoothing_finetune_step(const SarModel& model, ParamStore& store,
                               const std::vector<const Tensor*>& batch,
                               const Schedule& schedule, const Fdam& fdam,
                               const AdamConfig& adam, double clip_norm);

double smoothing_loss(const SarModel& model, const ParamStore& store,
                      const std::vector<const Tensor*>& batch, const Schedule& schedule,
                      const Fdam& fdam);

struct TrainLogRow {
  long step = 0;
  std::string split;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double final_step1_loss = 0.0;
  double final_step2_loss = 0.0;
};

// Two-step procedure: teacher-forced training, checkpoint, then smoothing
// finetuning. Deterministic for a fixed seed and config.
TrainResult train(const SarModel& model, ParamStore& store, const std::vector<Motion>& train_set,
                  const std::vector<Motion>& val_set, const Schedule& schedule,
                  const TrainConfig& cfg);

}  // namespace sar
