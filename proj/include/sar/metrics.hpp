#pragma once

#include "sar/motion.hpp"

namespace sar {

// Mean per-joint angle error: average Euclidean norm of the axis-angle
// difference over interior frames and joints.
double mpjae(const Motion& gen, const Motion& gt);

// Quaternion geodesic variant of the angle error.
double mpjae_geodesic(const Motion& gen, const Motion& gt);

// Mean per-joint position error through forward kinematics, in meters.
double mpjpe(const Motion& gen, const Motion& gt, const Skeleton& skeleton);

enum class NeighborSpace { Angle, Position };

// Mean consecutive-frame difference norm, a proxy for motion speed. The
// position variant measures FK joint positions instead of joint angles.
double neighbor_l2(const Motion& m, NeighborSpace space = NeighborSpace::Angle,
                   const Skeleton* skeleton = nullptr);

// Normalized power spectrum similarity: power-weighted 1-D earth-mover's
// distance between normalized per-feature power spectra.
double npss(const Motion& gen, const Motion& gt);

}  // namespace sar
