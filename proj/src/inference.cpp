#include "sar/inference.hpp"

#include <stdexcept>

namespace sar {

RowPredictor model_predictor(const SarModel& model, const ParamStore& store) {
  return [&model, &store](const Tensor& buffer, const std::vector<std::uint8_t>& empty,
                          const AttentionMask& mask, PassKind) {
    return model.forward(store, buffer, empty, mask);
  };
}

namespace {

void copy_row(Tensor& dst, long dst_row, const Tensor& src, long src_row) {
  const long cols = dst.cols();
  const double* s = src.row(src_row);
  double* d = dst.row(dst_row);
  for (long c = 0; c < cols; ++c) d[c] = s[c];
}

Tensor make_buffer(const Pose& start, const Pose& end, long n_positions,
                   std::vector<std::uint8_t>& empty) {
  if (start.joint_count() != end.joint_count())
    throw std::invalid_argument("run_schedule: endpoint joint counts disagree");
  const long j = start.joint_count();
  Tensor buffer(n_positions, 3 * j);
  const Tensor endpoints = poses_to_tensor({start, end});
  copy_row(buffer, 0, endpoints, 0);
  copy_row(buffer, n_positions - 1, endpoints, 1);
  empty.assign(static_cast<size_t>(n_positions), 1);
  empty.front() = 0;
  empty.back() = 0;
  return buffer;
}

Motion interior_frames(const Tensor& buffer, long joints, double fps) {
  Motion m;
  m.fps = fps;
  for (long t = 1; t + 1 < buffer.rows(); ++t) m.frames.push_back(row_to_pose(buffer, t, joints));
  return m;
}

}  // namespace

Tensor run_chain(const RowPredictor& predict, const Schedule& schedule, const Fdam& fdam,
                 Tensor buffer, std::vector<std::uint8_t> empty, const RunOptions& opts,
                 RunStats* stats) {
  if (buffer.rows() != schedule.n_positions)
    throw std::invalid_argument("run_chain: buffer rows disagree with schedule");
  if (fdam.mask.rows() != schedule.n_positions)
    throw std::invalid_argument("run_chain: mask size disagrees with schedule");
  if (stats && stats->writes.empty())
    stats->writes.assign(static_cast<size_t>(schedule.n_positions), 0);

  auto write_target = [&](long target, const Tensor& out) {
    copy_row(buffer, target, out, schedule.source.at(target));
    empty[static_cast<size_t>(target)] = 0;
    if (stats) ++stats->writes[static_cast<size_t>(target)];
  };

  if (opts.level_parallel) {
    for (const auto& level : schedule.levels) {
      const Tensor out = predict(buffer, empty, fdam.mask, PassKind::Chain);
      if (stats) ++stats->forward_passes;
      for (long target : level) write_target(target, out);
    }
  } else {
    for (long target : schedule.order) {
      const Tensor out = predict(buffer, empty, fdam.mask, PassKind::Chain);
      if (stats) ++stats->forward_passes;
      write_target(target, out);
    }
  }
  return buffer;
}

Motion run_schedule(const Pose& start, const Pose& end, const RowPredictor& predict,
                    const Schedule& schedule, const Fdam& fdam, double fps,
                    const RunOptions& opts, RunStats* stats) {
  std::vector<std::uint8_t> empty;
  Tensor buffer = make_buffer(start, end, schedule.n_positions, empty);
  if (stats) stats->writes.assign(static_cast<size_t>(schedule.n_positions), 0);
  buffer = run_chain(predict, schedule, fdam, std::move(buffer), empty, opts, stats);

  if (schedule.smoothing) {
    std::vector<std::uint8_t> none(static_cast<size_t>(schedule.n_positions), 0);
    const Tensor out = predict(buffer, none, fdam.smoothing, PassKind::Smoothing);
    if (stats) ++stats->forward_passes;
    for (const auto& [target, row] : schedule.smoothing_source) {
      copy_row(buffer, target, out, row);
      if (stats) ++stats->writes[static_cast<size_t>(target)];
    }
  }
  return interior_frames(buffer, start.joint_count(), fps);
}

Motion run_without_smoothing(const Pose& start, const Pose& end, const RowPredictor& predict,
                             const Schedule& schedule, const Fdam& fdam, double fps,
                             const RunOptions& opts, RunStats* stats) {
  std::vector<std::uint8_t> empty;
  Tensor buffer = make_buffer(start, end, schedule.n_positions, empty);
  if (stats) stats->writes.assign(static_cast<size_t>(schedule.n_positions), 0);
  buffer = run_chain(predict, schedule, fdam, std::move(buffer), empty, opts, stats);
  return interior_frames(buffer, start.joint_count(), fps);
}

Motion interpolate_slerp(const Pose& start, const Pose& end, long t_interior, double fps) {
  return slerp_motion(start, end, t_interior, fps);
}

}  // namespace sar
