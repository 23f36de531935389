#pragma once

#include <string>
#include <vector>

#include "sar/rotation.hpp"

namespace sar {

struct Pose {
  std::vector<Rotation> joints;

  long joint_count() const { return static_cast<long>(joints.size()); }

  static Pose identity(long n_joints) {
    Pose p;
    p.joints.resize(static_cast<size_t>(n_joints));
    return p;
  }
};

struct Motion {
  std::vector<Pose> frames;
  double fps = 30.0;

  long frame_count() const { return static_cast<long>(frames.size()); }
  long joint_count() const { return frames.empty() ? 0 : frames.front().joint_count(); }
};

// Joint hierarchy; parents[0] == -1 and parents[i] < i for all other joints.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parents;
  std::vector<Vec3> offsets;  // bone offsets in meters

  long joint_count() const { return static_cast<long>(parents.size()); }

  // Throws std::invalid_argument when the tree structure is broken.
  void validate() const;

  // Straight chain of n joints, each hanging 0.3 m below its parent.
  // Handy fallback when no skeleton file is supplied.
  static Skeleton chain(long n_joints);

  // The shipped 22-joint body: pelvis root, spine/neck/head chain,
  // two 4-joint legs, two 4-joint arms.
  static Skeleton default_body22();
};

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& s, const std::string& path);

// World-space joint positions; the root sits at the origin and each child is
// placed by its parent's cumulative rotation applied to the bone offset.
std::vector<Vec3> forward_kinematics(const Pose& pose, const Skeleton& skeleton);

// T interior frames between the given endpoints; frame t (1-based) uses
// interpolation parameter u = t / (T + 1) per joint.
Motion slerp_motion(const Pose& start, const Pose& end, long t_interior, double fps);

}  // namespace sar
