#include <doctest.h>

#include <cmath>

#include "sar/metrics.hpp"
#include "sar/rng.hpp"

using namespace sar;

namespace {

Motion random_motion(long frames, long joints, Rng& rng) {
  Motion m;
  m.fps = 30.0;
  for (long f = 0; f < frames; ++f) {
    Pose p = Pose::identity(joints);
    for (auto& r : p.joints)
      r.axis_angle = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    m.frames.push_back(p);
  }
  return m;
}

// one feature channel follows value(t), everything else stays zero
Motion single_channel_motion(long frames, double (*value)(double)) {
  Motion m;
  m.fps = 30.0;
  for (long f = 0; f < frames; ++f) {
    Pose p = Pose::identity(2);
    p.joints[0].axis_angle.x = value(static_cast<double>(f));
    m.frames.push_back(p);
  }
  return m;
}

}  // namespace

TEST_CASE("metrics are zero on identical motions") {
  Rng rng(3);
  const Motion m = random_motion(8, 3, rng);
  CHECK(mpjae(m, m) == 0.0);
  CHECK(mpjae_geodesic(m, m) == 0.0);
  const Skeleton s = Skeleton::chain(3);
  CHECK(mpjpe(m, m, s) == 0.0);
  CHECK(npss(m, m) == 0.0);
}

TEST_CASE("mpjae single-coordinate hand value") {
  Rng rng(5);
  const Motion gt = random_motion(6, 4, rng);
  Motion gen = gt;
  gen.frames[2].joints[1].axis_angle.x += 0.3;
  CHECK(mpjae(gen, gt) == doctest::Approx(0.3 / (6.0 * 4.0)));
}

TEST_CASE("mpjae rejects shape mismatches") {
  Rng rng(6);
  const Motion a = random_motion(4, 3, rng);
  const Motion b = random_motion(5, 3, rng);
  CHECK_THROWS_AS(mpjae(a, b), std::invalid_argument);
}

TEST_CASE("mpjpe hand geometry on a two-joint chain") {
  Skeleton s;
  s.joint_names = {"root", "child"};
  s.parents = {-1, 0};
  s.offsets = {{0, 0, 0}, {1, 0, 0}};
  Motion gt, gen;
  gt.frames.push_back(Pose::identity(2));
  Pose rotated = Pose::identity(2);
  rotated.joints[0].axis_angle = {0, 0, M_PI / 2};
  gen.frames.push_back(rotated);
  // child lands at (0,1,0) instead of (1,0,0): error sqrt(2) over 2 joints
  CHECK(mpjpe(gen, gt, s) == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("mpjae is invariant to a joint reordering applied to both motions") {
  Rng rng(7);
  const Motion a = random_motion(5, 4, rng);
  const Motion b = random_motion(5, 4, rng);
  const double base = mpjae(a, b);
  auto permute = [](const Motion& m) {
    Motion out = m;
    for (size_t f = 0; f < m.frames.size(); ++f) {
      out.frames[f].joints[0] = m.frames[f].joints[3];
      out.frames[f].joints[3] = m.frames[f].joints[0];
    }
    return out;
  };
  CHECK(mpjae(permute(a), permute(b)) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("neighbor L2 hand values") {
  Motion constant;
  constant.fps = 30.0;
  constant.frames.assign(5, Pose::identity(3));
  CHECK(neighbor_l2(constant) == 0.0);

  Motion two;
  two.fps = 30.0;
  two.frames.assign(2, Pose::identity(3));
  two.frames[1].joints[2].axis_angle.y += 0.1;
  CHECK(neighbor_l2(two) == doctest::Approx(0.1));

  Motion one;
  one.frames.assign(1, Pose::identity(3));
  CHECK_THROWS_AS(neighbor_l2(one), std::invalid_argument);

  // position space: rotate the root so the children actually move
  Motion swing;
  swing.fps = 30.0;
  swing.frames.assign(2, Pose::identity(3));
  swing.frames[1].joints[0].axis_angle.z += 0.5;
  const Skeleton s = Skeleton::chain(3);
  CHECK(neighbor_l2(swing, NeighborSpace::Position, &s) > 0.0);
  CHECK(neighbor_l2(two, NeighborSpace::Position, &s) == 0.0);  // leaf-only rotation
  CHECK_THROWS_AS(neighbor_l2(two, NeighborSpace::Position, nullptr), std::invalid_argument);
}

TEST_CASE("npss treats a pure phase shift as identical") {
  // two full cycles over 16 frames; sin vs cos differ only in phase
  const long n = 16;
  auto sin_wave = [](double t) { return std::sin(2.0 * M_PI * 2.0 * t / 16.0); };
  auto cos_wave = [](double t) { return std::cos(2.0 * M_PI * 2.0 * t / 16.0); };
  const Motion a = single_channel_motion(n, sin_wave);
  const Motion b = single_channel_motion(n, cos_wave);
  CHECK(npss(a, b) < 1e-9);
}

TEST_CASE("npss detects a frequency difference") {
  auto one_cycle = [](double t) { return std::sin(2.0 * M_PI * t / 16.0); };
  auto four_cycles = [](double t) { return std::sin(2.0 * M_PI * 4.0 * t / 16.0); };
  CHECK(npss(single_channel_motion(16, one_cycle), single_channel_motion(16, four_cycles)) >
        0.1);
}

TEST_CASE("npss invariances: global time shift and uniform scaling") {
  Rng rng(11);
  const Motion a = random_motion(12, 2, rng);
  const Motion b = random_motion(12, 2, rng);
  const double base = npss(a, b);

  auto cyclic_shift = [](const Motion& m, long k) {
    Motion out = m;
    const long n = m.frame_count();
    for (long f = 0; f < n; ++f) out.frames[static_cast<size_t>((f + k) % n)] = m.frames[static_cast<size_t>(f)];
    return out;
  };
  CHECK(npss(cyclic_shift(a, 5), cyclic_shift(b, 5)) == doctest::Approx(base).epsilon(1e-9));

  auto scale = [](const Motion& m, double c) {
    Motion out = m;
    for (auto& p : out.frames)
      for (auto& r : p.joints) r.axis_angle = r.axis_angle * c;
    return out;
  };
  CHECK(npss(scale(a, 3.7), scale(b, 3.7)) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("npss is undefined on silent ground truth") {
  Motion zero;
  zero.fps = 30.0;
  zero.frames.assign(8, Pose::identity(2));
  CHECK_THROWS_AS(npss(zero, zero), std::domain_error);
}

TEST_CASE("metrics are nonnegative on random pairs") {
  Rng rng(13);
  const Skeleton s = Skeleton::chain(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Motion a = random_motion(6, 3, rng);
    const Motion b = random_motion(6, 3, rng);
    CHECK(mpjae(a, b) >= 0.0);
    CHECK(mpjpe(a, b, s) >= 0.0);
    CHECK(npss(a, b) >= 0.0);
    CHECK(neighbor_l2(a) >= 0.0);
  }
}
