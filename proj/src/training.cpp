#include "sar/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sar/checkpoint.hpp"
#include "sar/inference.hpp"
#include "sar/rng.hpp"

namespace sar {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch size must be positive");
  if (steps1 < 0 || steps2 < 0) throw std::invalid_argument("train config: negative step count");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (report_every < 1) throw std::invalid_argument("train config: report cadence must be positive");
}

double mse_loss(const Tensor& gen, const Tensor& gt) {
  if (!gen.same_shape(gt)) throw std::invalid_argument("mse_loss: shape mismatch");
  if (gen.size() == 0) throw std::invalid_argument("mse_loss: empty selection");
  double sum = 0.0;
  for (long i = 0; i < gen.size(); ++i) {
    const double d = gen[i] - gt[i];
    sum += d * d;
  }
  return sum / static_cast<double>(gen.size());
}

std::vector<std::pair<long, long>> chain_loss_selection(const Schedule& schedule) {
  std::vector<std::pair<long, long>> selection;
  for (long target : schedule.order) selection.emplace_back(schedule.source.at(target), target);
  return selection;
}

std::vector<std::pair<long, long>> smoothing_loss_selection(const Schedule& schedule) {
  std::vector<std::pair<long, long>> selection;
  if (!schedule.smoothing_source.empty()) {
    for (const auto& [target, row] : schedule.smoothing_source) selection.emplace_back(row, target);
  } else {
    for (long t = 1; t + 1 < schedule.n_positions; ++t) selection.emplace_back(t, t);
  }
  return selection;
}

double selected_mse(const Tensor& pred, const Tensor& gt,
                    const std::vector<std::pair<long, long>>& selection, Tensor* d_pred) {
  if (pred.cols() != gt.cols()) throw std::invalid_argument("selected_mse: width mismatch");
  if (selection.empty()) throw std::invalid_argument("selected_mse: empty selection");
  const long cols = pred.cols();
  const double denom = static_cast<double>(selection.size()) * static_cast<double>(cols);
  if (d_pred) *d_pred = Tensor(pred.shape());
  double sum = 0.0;
  for (const auto& [row, target] : selection) {
    const double* p = pred.row(row);
    const double* t = gt.row(target);
    double* dp = d_pred ? d_pred->row(row) : nullptr;
    for (long c = 0; c < cols; ++c) {
      const double d = p[c] - t[c];
      sum += d * d;
      if (dp) dp[c] += 2.0 * d / denom;
    }
  }
  return sum / denom;
}

namespace {

struct BatchResult {
  double loss = 0.0;
};

// Runs forward/backward per element in parallel, then reduces gradients and
// losses in a fixed element order.
template <typename PerElement>
double batched_step(ParamStore& store, long batch_size, const AdamConfig& adam, double clip_norm,
                    PerElement&& per_element) {
  std::vector<GradMap> grads(static_cast<size_t>(batch_size));
  std::vector<double> losses(static_cast<size_t>(batch_size), 0.0);
#pragma omp parallel for schedule(static)
  for (long e = 0; e < batch_size; ++e)
    losses[static_cast<size_t>(e)] = per_element(e, grads[static_cast<size_t>(e)]);

  const double scale = 1.0 / static_cast<double>(batch_size);
  for (long e = 0; e < batch_size; ++e)
    for (auto& [name, g] : grads[static_cast<size_t>(e)]) {
      Tensor& dst = store.at(name).grad;
      for (long i = 0; i < g.size(); ++i) dst[i] += g[i] * scale;
    }
  clip_grad_norm(store, clip_norm);
  adam_step(store, adam);

  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss * scale;
}

Tensor givens_only_buffer(const Tensor& gt, std::vector<std::uint8_t>& empty) {
  Tensor buffer(gt.rows(), gt.cols());
  for (long c = 0; c < gt.cols(); ++c) {
    buffer(0, c) = gt(0, c);
    buffer(gt.rows() - 1, c) = gt(gt.rows() - 1, c);
  }
  empty.assign(static_cast<size_t>(gt.rows()), 1);
  empty.front() = 0;
  empty.back() = 0;
  return buffer;
}

// Stage-1/2 rollout with no gradient tracking (no activations recorded).
Tensor detached_rollout(const SarModel& model, const ParamStore& store, const Tensor& gt,
                        const Schedule& schedule, const Fdam& fdam) {
  std::vector<std::uint8_t> empty;
  Tensor buffer = givens_only_buffer(gt, empty);
  const RowPredictor predict = model_predictor(model, store);
  return run_chain(predict, schedule, fdam, std::move(buffer), std::move(empty));
}

}  // namespace

double teacher_forcing_step(const SarModel& model, ParamStore& store,
                            const std::vector<const Tensor*>& batch, const Schedule& schedule,
                            const Fdam& fdam, const AdamConfig& adam, double clip_norm) {
  if (batch.empty()) throw std::invalid_argument("teacher_forcing_step: empty batch");
  const auto selection = chain_loss_selection(schedule);
  return batched_step(store, static_cast<long>(batch.size()), adam, clip_norm,
                      [&](long e, GradMap& grads) {
                        const Tensor& gt = *batch[static_cast<size_t>(e)];
                        SarModel::Ctx ctx;
                        const Tensor pred = model.forward(store, gt, {}, fdam.mask, &ctx);
                        Tensor d_pred;
                        const double loss = selected_mse(pred, gt, selection, &d_pred);
                        model.backward(store, ctx, d_pred, grads);
                        return loss;
                      });
}

double teacher_forcing_loss(const SarModel& model, const ParamStore& store,
                            const std::vector<const Tensor*>& batch, const Schedule& schedule,
                            const Fdam& fdam) {
  if (batch.empty()) throw std::invalid_argument("teacher_forcing_loss: empty batch");
  const auto selection = chain_loss_selection(schedule);
  std::vector<double> losses(batch.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (long e = 0; e < static_cast<long>(batch.size()); ++e) {
    const Tensor pred = model.forward(store, *batch[static_cast<size_t>(e)], {}, fdam.mask);
    losses[static_cast<size_t>(e)] = selected_mse(pred, *batch[static_cast<size_t>(e)], selection);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(batch.size());
}

double smoothing_finetune_step(const SarModel& model, ParamStore& store,
                               const std::vector<const Tensor*>& batch, const Schedule& schedule,
                               const Fdam& fdam, const AdamConfig& adam, double clip_norm) {
  if (batch.empty()) throw std::invalid_argument("smoothing_finetune_step: empty batch");
  const auto selection = smoothing_loss_selection(schedule);
  const std::vector<std::uint8_t> none(static_cast<size_t>(schedule.n_positions), 0);
  return batched_step(store, static_cast<long>(batch.size()), adam, clip_norm,
                      [&](long e, GradMap& grads) {
                        const Tensor& gt = *batch[static_cast<size_t>(e)];
                        const Tensor rollout = detached_rollout(model, store, gt, schedule, fdam);
                        SarModel::Ctx ctx;
                        const Tensor pred = model.forward(store, rollout, none, fdam.smoothing, &ctx);
                        Tensor d_pred;
                        const double loss = selected_mse(pred, gt, selection, &d_pred);
                        model.backward(store, ctx, d_pred, grads);
                        return loss;
                      });
}

double smoothing_loss(const SarModel& model, const ParamStore& store,
                      const std::vector<const Tensor*>& batch, const Schedule& schedule,
                      const Fdam& fdam) {
  if (batch.empty()) throw std::invalid_argument("smoothing_loss: empty batch");
  const auto selection = smoothing_loss_selection(schedule);
  const std::vector<std::uint8_t> none(static_cast<size_t>(schedule.n_positions), 0);
  std::vector<double> losses(batch.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (long e = 0; e < static_cast<long>(batch.size()); ++e) {
    const Tensor& gt = *batch[static_cast<size_t>(e)];
    const Tensor rollout = detached_rollout(model, store, gt, schedule, fdam);
    const Tensor pred = model.forward(store, rollout, none, fdam.smoothing);
    losses[static_cast<size_t>(e)] = selected_mse(pred, gt, selection);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(batch.size());
}

TrainResult train(const SarModel& model, ParamStore& store, const std::vector<Motion>& train_set,
                  const std::vector<Motion>& val_set, const Schedule& schedule,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const long n = schedule.n_positions;
  const Fdam fdam = derive_fdam(schedule, n);

  auto tensorize = [&](const std::vector<Motion>& motions) {
    std::vector<Tensor> tensors;
    tensors.reserve(motions.size());
    for (const Motion& m : motions) {
      if (m.frame_count() != n)
        throw std::invalid_argument("train: motion length disagrees with schedule positions");
      if (m.joint_count() != model.config().joints)
        throw std::invalid_argument("train: motion joint count disagrees with model");
      tensors.push_back(motion_to_tensor(m));
    }
    return tensors;
  };
  const std::vector<Tensor> train_tensors = tensorize(train_set);
  const std::vector<Tensor> val_tensors = tensorize(val_set);

  std::vector<const Tensor*> val_batch1, val_batch2;
  for (size_t i = 0; i < val_tensors.size() && i < 64; ++i) val_batch1.push_back(&val_tensors[i]);
  for (size_t i = 0; i < val_tensors.size() && i < 8; ++i) val_batch2.push_back(&val_tensors[i]);

  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  Rng rng(cfg.seed);
  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto log_row = [&](long step, const std::string& split, double loss) {
    result.log.push_back({step, split, loss, elapsed()});
  };

  auto sample_batch = [&] {
    std::vector<const Tensor*> batch;
    batch.reserve(static_cast<size_t>(cfg.batch_size));
    for (long b = 0; b < cfg.batch_size; ++b)
      batch.push_back(&train_tensors[static_cast<size_t>(
          rng.uniform_int(static_cast<long>(train_tensors.size())))]);
    return batch;
  };

  for (long step = 1; step <= cfg.steps1; ++step) {
    const double loss = teacher_forcing_step(model, store, sample_batch(), schedule, fdam, adam,
                                             cfg.clip_norm);
    if (!std::isfinite(loss))
      throw std::runtime_error("train: loss became non-finite at step " + std::to_string(step));
    result.final_step1_loss = loss;
    if (step % cfg.report_every == 0 || step == cfg.steps1) {
      log_row(step, "train", loss);
      if (!val_batch1.empty())
        log_row(step, "val", teacher_forcing_loss(model, store, val_batch1, schedule, fdam));
    }
  }
  if (!cfg.out_dir.empty()) {
    save_params(store, cfg.out_dir + "/model_step1.sarm");
  }

  for (long step = 1; step <= cfg.steps2; ++step) {
    const double loss = smoothing_finetune_step(model, store, sample_batch(), schedule, fdam,
                                                adam, cfg.clip_norm);
    if (!std::isfinite(loss))
      throw std::runtime_error("train: smoothing loss became non-finite at step " +
                               std::to_string(step));
    result.final_step2_loss = loss;
    if (step % cfg.report_every == 0 || step == cfg.steps2) {
      log_row(cfg.steps1 + step, "train_smooth", loss);
      if (!val_batch2.empty())
        log_row(cfg.steps1 + step, "val_smooth",
                smoothing_loss(model, store, val_batch2, schedule, fdam));
    }
  }

  if (!cfg.out_dir.empty()) {
    save_params(store, cfg.out_dir + "/model.sarm");
    save_optimizer_state(store, cfg.out_dir + "/model.sarm.opt");
    std::ofstream csv(cfg.out_dir + "/losses.csv");
    if (!csv) throw std::runtime_error("train: cannot write loss log in " + cfg.out_dir);
    csv << "step,split,loss,seconds\n";
    for (const TrainLogRow& row : result.log)
      csv << row.step << "," << row.split << "," << row.loss << "," << row.seconds << "\n";
  }
  return result;
}

}  // namespace sar
