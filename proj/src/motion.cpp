#include "sar/motion.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace sar {

using nlohmann::json;

void Skeleton::validate() const {
  const long j = joint_count();
  if (j == 0) throw std::invalid_argument("skeleton: no joints");
  if (static_cast<long>(joint_names.size()) != j || static_cast<long>(offsets.size()) != j)
    throw std::invalid_argument("skeleton: joint_names/parents/offsets lengths disagree");
  if (parents[0] != -1) throw std::invalid_argument("skeleton: joint 0 must be the root");
  for (long i = 1; i < j; ++i) {
    if (parents[static_cast<size_t>(i)] < 0 || parents[static_cast<size_t>(i)] >= i)
      throw std::invalid_argument("skeleton: parents[i] must satisfy 0 <= parents[i] < i");
  }
}

Skeleton Skeleton::chain(long n_joints) {
  if (n_joints < 1) throw std::invalid_argument("skeleton chain: need at least one joint");
  Skeleton s;
  for (long i = 0; i < n_joints; ++i) {
    s.joint_names.push_back("joint" + std::to_string(i));
    s.parents.push_back(i == 0 ? -1 : static_cast<int>(i - 1));
    s.offsets.push_back(i == 0 ? Vec3{0, 0, 0} : Vec3{0, -0.3, 0});
  }
  return s;
}

Skeleton Skeleton::default_body22() {
  Skeleton s;
  auto add = [&s](const std::string& name, int parent, Vec3 off) {
    s.joint_names.push_back(name);
    s.parents.push_back(parent);
    s.offsets.push_back(off);
  };
  add("pelvis", -1, {0, 0, 0});
  add("left_hip", 0, {0.09, -0.06, 0});
  add("left_knee", 1, {0, -0.40, 0});
  add("left_ankle", 2, {0, -0.42, 0});
  add("left_foot", 3, {0, -0.06, 0.12});
  add("right_hip", 0, {-0.09, -0.06, 0});
  add("right_knee", 5, {0, -0.40, 0});
  add("right_ankle", 6, {0, -0.42, 0});
  add("right_foot", 7, {0, -0.06, 0.12});
  add("spine1", 0, {0, 0.12, 0});
  add("spine2", 9, {0, 0.13, 0});
  add("spine3", 10, {0, 0.13, 0});
  add("neck", 11, {0, 0.12, 0});
  add("head", 12, {0, 0.10, 0});
  add("left_collar", 11, {0.07, 0.10, 0});
  add("left_shoulder", 14, {0.11, 0, 0});
  add("left_elbow", 15, {0.26, 0, 0});
  add("left_wrist", 16, {0.25, 0, 0});
  add("right_collar", 11, {-0.07, 0.10, 0});
  add("right_shoulder", 18, {-0.11, 0, 0});
  add("right_elbow", 19, {-0.26, 0, 0});
  add("right_wrist", 20, {-0.25, 0, 0});
  s.validate();
  return s;
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skeleton file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("skeleton parse error in " + path + ": " + e.what());
  }
  for (const char* field : {"joint_names", "parents", "offsets"}) {
    if (!doc.contains(field))
      throw std::runtime_error("skeleton file " + path + " is missing field \"" + field + "\"");
  }
  Skeleton s;
  s.joint_names = doc["joint_names"].get<std::vector<std::string>>();
  s.parents = doc["parents"].get<std::vector<int>>();
  for (const auto& o : doc["offsets"]) {
    if (!o.is_array() || o.size() != 3)
      throw std::runtime_error("skeleton file " + path + ": each offset must be [x,y,z]");
    s.offsets.push_back({o[0].get<double>(), o[1].get<double>(), o[2].get<double>()});
  }
  s.validate();
  return s;
}

void save_skeleton(const Skeleton& s, const std::string& path) {
  json doc;
  doc["joint_names"] = s.joint_names;
  doc["parents"] = s.parents;
  json offs = json::array();
  for (const Vec3& o : s.offsets) offs.push_back(json::array({o.x, o.y, o.z}));
  doc["offsets"] = offs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write skeleton file: " + path);
  out << doc.dump(2) << "\n";
}

std::vector<Vec3> forward_kinematics(const Pose& pose, const Skeleton& skeleton) {
  const long j = skeleton.joint_count();
  if (pose.joint_count() != j)
    throw std::invalid_argument("forward_kinematics: pose and skeleton joint counts disagree");
  std::vector<Vec3> positions(static_cast<size_t>(j));
  std::vector<Quat> world(static_cast<size_t>(j));
  positions[0] = {0, 0, 0};
  world[0] = axis_angle_to_quaternion(pose.joints[0]);
  for (long i = 1; i < j; ++i) {
    const auto parent = static_cast<size_t>(skeleton.parents[static_cast<size_t>(i)]);
    const auto idx = static_cast<size_t>(i);
    positions[idx] = positions[parent] + rotate(world[parent], skeleton.offsets[idx]);
    world[idx] = world[parent] * axis_angle_to_quaternion(pose.joints[idx]);
  }
  return positions;
}

Motion slerp_motion(const Pose& start, const Pose& end, long t_interior, double fps) {
  if (start.joint_count() != end.joint_count())
    throw std::invalid_argument("slerp_motion: endpoint joint counts disagree");
  const long j = start.joint_count();
  std::vector<Quat> q0(static_cast<size_t>(j)), q1(static_cast<size_t>(j));
  for (long i = 0; i < j; ++i) {
    q0[static_cast<size_t>(i)] = axis_angle_to_quaternion(start.joints[static_cast<size_t>(i)]);
    q1[static_cast<size_t>(i)] = axis_angle_to_quaternion(end.joints[static_cast<size_t>(i)]);
  }
  Motion motion;
  motion.fps = fps;
  for (long t = 1; t <= t_interior; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(t_interior + 1);
    Pose p;
    p.joints.reserve(static_cast<size_t>(j));
    for (long i = 0; i < j; ++i) {
      const Quat q = slerp(q0[static_cast<size_t>(i)], q1[static_cast<size_t>(i)], u);
      p.joints.push_back(quaternion_to_axis_angle(q));
    }
    motion.frames.push_back(std::move(p));
  }
  return motion;
}

}  // namespace sar
