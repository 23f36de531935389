#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sar/depgraph.hpp"
#include "sar/model.hpp"
#include "sar/motion.hpp"

namespace sar {

enum class PassKind { Chain, Smoothing };

// One full forward over the current input buffer (N x 3J) under the mask for
// this pass; returns the N x 3J predictions. The predicted frame for target
// o_i sits at output row source(o_i).
using RowPredictor = std::function<Tensor(const Tensor& buffer,
                                          const std::vector<std::uint8_t>& empty,
                                          const AttentionMask& mask, PassKind kind)>;

// Adapter around a trained model; the references must outlive the predictor.
RowPredictor model_predictor(const SarModel& model, const ParamStore& store);

struct RunStats {
  long forward_passes = 0;
  std::vector<long> writes;  // per-position write count
};

struct RunOptions {
  bool level_parallel = false;  // batch each schedule level into one pass
};

// Iterates the chain over a buffer whose given rows are already filled,
// writing each generated frame back before the next pass. Returns the
// completed buffer.
Tensor run_chain(const RowPredictor& predict, const Schedule& schedule, const Fdam& fdam,
                 Tensor buffer, std::vector<std::uint8_t> empty,
                 const RunOptions& opts = {}, RunStats* stats = nullptr);

// Full inference: chain, then (when the schedule carries duplicates) one
// parallel smoothing pass that regenerates every interior frame. Returns the
// T interior frames.
Motion run_schedule(const Pose& start, const Pose& end, const RowPredictor& predict,
                    const Schedule& schedule, const Fdam& fdam, double fps,
                    const RunOptions& opts = {}, RunStats* stats = nullptr);

// The chain alone, smoothing skipped.
Motion run_without_smoothing(const Pose& start, const Pose& end, const RowPredictor& predict,
                             const Schedule& schedule, const Fdam& fdam, double fps,
                             const RunOptions& opts = {}, RunStats* stats = nullptr);

// SLERP baseline under the same call shape as the model-driven paths.
Motion interpolate_slerp(const Pose& start, const Pose& end, long t_interior, double fps);

}  // namespace sar
