#include "sar/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sar {

namespace {

void check_pair(const Motion& gen, const Motion& gt, const char* who) {
  if (gen.frame_count() != gt.frame_count() || gen.joint_count() != gt.joint_count())
    throw std::invalid_argument(std::string(who) + ": motions have different shapes");
  if (gen.frame_count() == 0) throw std::invalid_argument(std::string(who) + ": empty motions");
}

}  // namespace

double mpjae(const Motion& gen, const Motion& gt) {
  check_pair(gen, gt, "mpjae");
  const long frames = gen.frame_count(), joints = gen.joint_count();
  double sum = 0.0;
  for (long f = 0; f < frames; ++f)
    for (long j = 0; j < joints; ++j) {
      const Vec3 d = gen.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(j)].axis_angle -
                     gt.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(j)].axis_angle;
      sum += d.norm();
    }
  return sum / static_cast<double>(frames * joints);
}

double mpjae_geodesic(const Motion& gen, const Motion& gt) {
  check_pair(gen, gt, "mpjae_geodesic");
  const long frames = gen.frame_count(), joints = gen.joint_count();
  double sum = 0.0;
  for (long f = 0; f < frames; ++f)
    for (long j = 0; j < joints; ++j) {
      const Quat a =
          axis_angle_to_quaternion(gen.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(j)]);
      const Quat b =
          axis_angle_to_quaternion(gt.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(j)]);
      sum += geodesic_angle(a, b);
    }
  return sum / static_cast<double>(frames * joints);
}

double mpjpe(const Motion& gen, const Motion& gt, const Skeleton& skeleton) {
  check_pair(gen, gt, "mpjpe");
  if (gen.joint_count() != skeleton.joint_count())
    throw std::invalid_argument("mpjpe: skeleton joint count mismatch");
  const long frames = gen.frame_count(), joints = gen.joint_count();
  double sum = 0.0;
  for (long f = 0; f < frames; ++f) {
    const auto pa = forward_kinematics(gen.frames[static_cast<size_t>(f)], skeleton);
    const auto pb = forward_kinematics(gt.frames[static_cast<size_t>(f)], skeleton);
    for (long j = 0; j < joints; ++j) sum += (pa[static_cast<size_t>(j)] - pb[static_cast<size_t>(j)]).norm();
  }
  return sum / static_cast<double>(frames * joints);
}

double neighbor_l2(const Motion& m, NeighborSpace space, const Skeleton* skeleton) {
  if (m.frame_count() < 2) throw std::invalid_argument("neighbor_l2: need at least two frames");
  if (space == NeighborSpace::Position && !skeleton)
    throw std::invalid_argument("neighbor_l2: position space needs a skeleton");
  const long frames = m.frame_count(), joints = m.joint_count();
  double sum = 0.0;
  if (space == NeighborSpace::Angle) {
    for (long f = 0; f + 1 < frames; ++f) {
      double sq = 0.0;
      for (long j = 0; j < joints; ++j) {
        const Vec3 d =
            m.frames[static_cast<size_t>(f + 1)].joints[static_cast<size_t>(j)].axis_angle -
            m.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(j)].axis_angle;
        sq += dot(d, d);
      }
      sum += std::sqrt(sq);
    }
  } else {
    auto prev = forward_kinematics(m.frames[0], *skeleton);
    for (long f = 1; f < frames; ++f) {
      const auto cur = forward_kinematics(m.frames[static_cast<size_t>(f)], *skeleton);
      double sq = 0.0;
      for (long j = 0; j < joints; ++j) {
        const Vec3 d = cur[static_cast<size_t>(j)] - prev[static_cast<size_t>(j)];
        sq += dot(d, d);
      }
      sum += std::sqrt(sq);
      prev = cur;
    }
  }
  return sum / static_cast<double>(frames - 1);
}

double npss(const Motion& gen, const Motion& gt) {
  check_pair(gen, gt, "npss");
  const long n = gen.frame_count();
  if (n < 2) throw std::invalid_argument("npss: need at least two frames");
  const long joints = gen.joint_count();
  const long features = joints * 3;

  auto signal = [](const Motion& m, long feature, long t) {
    const Vec3& v =
        m.frames[static_cast<size_t>(t)].joints[static_cast<size_t>(feature / 3)].axis_angle;
    const long c = feature % 3;
    return c == 0 ? v.x : (c == 1 ? v.y : v.z);
  };

  // Squared-magnitude DFT of one feature channel; O(n^2) is fine at n <= 64.
  auto power_spectrum = [&](const Motion& m, long feature) {
    std::vector<double> power(static_cast<size_t>(n));
    for (long k = 0; k < n; ++k) {
      double re = 0.0, im = 0.0;
      for (long t = 0; t < n; ++t) {
        const double angle = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) /
                             static_cast<double>(n);
        const double x = signal(m, feature, t);
        re += x * std::cos(angle);
        im += x * std::sin(angle);
      }
      power[static_cast<size_t>(k)] = re * re + im * im;
    }
    return power;
  };

  double weighted = 0.0, weight_total = 0.0;
  for (long f = 0; f < features; ++f) {
    const std::vector<double> pg = power_spectrum(gen, f);
    const std::vector<double> pt = power_spectrum(gt, f);
    double tg = 0.0, tt = 0.0;
    for (long k = 0; k < n; ++k) {
      tg += pg[static_cast<size_t>(k)];
      tt += pt[static_cast<size_t>(k)];
    }
    if (tg == 0.0 && tt == 0.0) continue;  // feature silent in both signals

    // 1-D EMD between normalized spectra via cumulative-distribution L1.
    // A zero-power side contributes an all-zero CDF.
    double cg = 0.0, ct = 0.0, emd = 0.0;
    for (long k = 0; k < n; ++k) {
      if (tg > 0.0) cg += pg[static_cast<size_t>(k)] / tg;
      if (tt > 0.0) ct += pt[static_cast<size_t>(k)] / tt;
      emd += std::fabs(cg - ct);
    }
    weighted += emd * tt;
    weight_total += tt;
  }
  if (weight_total == 0.0)
    throw std::domain_error("npss: ground truth carries no spectral power");
  return weighted / weight_total;
}

}  // namespace sar
