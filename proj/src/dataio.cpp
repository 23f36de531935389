#include "sar/dataio.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "sar/rng.hpp"

namespace sar {

using nlohmann::json;

Motion load_motion(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open motion file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("motion parse error in " + path + ": " + e.what());
  }
  for (const char* field : {"fps", "joints", "frames"})
    if (!doc.contains(field))
      throw std::runtime_error("motion file " + path + " is missing field \"" + field + "\"");
  Motion m;
  try {
    m.fps = doc["fps"].get<double>();
    if (!(m.fps > 0.0)) throw std::runtime_error("motion file " + path + ": fps must be positive");
    const long joints = doc["joints"].get<long>();
    if (joints < 1) throw std::runtime_error("motion file " + path + ": joints must be positive");
    if (!doc["frames"].is_array())
      throw std::runtime_error("motion file " + path + ": \"frames\" must be an array");
    for (const auto& frame : doc["frames"]) {
      if (static_cast<long>(frame.size()) != joints)
        throw std::runtime_error("motion file " + path + ": frame has wrong joint count");
      Pose p;
      for (const auto& rot : frame) {
        if (!rot.is_array() || rot.size() != 3)
          throw std::runtime_error("motion file " + path + ": each joint must be [x,y,z]");
        p.joints.push_back({{rot[0].get<double>(), rot[1].get<double>(), rot[2].get<double>()}});
      }
      m.frames.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("motion file " + path + ": " + e.what());
  }
  return m;
}

void save_motion(const Motion& motion, const std::string& path) {
  json doc;
  doc["fps"] = motion.fps;
  doc["joints"] = motion.joint_count();
  json frames = json::array();
  for (const Pose& p : motion.frames) {
    json frame = json::array();
    for (const Rotation& r : p.joints)
      frame.push_back(json::array({r.axis_angle.x, r.axis_angle.y, r.axis_angle.z}));
    frames.push_back(std::move(frame));
  }
  doc["frames"] = std::move(frames);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write motion file: " + path);
  out << doc.dump() << "\n";
}

std::vector<Motion> slice_windows(const Motion& motion, long window, long stride,
                                  const SlicePolicy& policy) {
  if (window < 1 || stride < 1)
    throw std::invalid_argument("slice_windows: window and stride must be positive");
  std::vector<Motion> out;
  const long len = motion.frame_count();
  for (long start = 0; start + window <= len; start += stride) {
    Motion w;
    w.fps = motion.fps;
    w.frames.assign(motion.frames.begin() + start, motion.frames.begin() + start + window);
    out.push_back(std::move(w));
  }
  if (motion.fps >= policy.high_fps_threshold) {
    for (long start = 0; start + 2 * window <= len; start += stride) {
      Motion w;
      w.fps = motion.fps / 2.0;
      for (long t = 0; t < window; ++t)
        w.frames.push_back(motion.frames[static_cast<size_t>(start + 2 * t)]);
      out.push_back(std::move(w));
    }
  }
  return out;
}

DatasetSplit split_dataset(long n_items, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  std::vector<long> idx(static_cast<size_t>(n_items));
  for (long i = 0; i < n_items; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  for (long i = n_items - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i + 1))]);

  const long n_train = std::lround(static_cast<double>(n_items) * ratios[0]);
  const long n_val = std::lround(static_cast<double>(n_items) * ratios[1]);
  DatasetSplit split;
  for (long i = 0; i < n_items; ++i) {
    const long source = idx[static_cast<size_t>(i)];
    if (i < n_train)
      split.train.push_back(source);
    else if (i < n_train + n_val)
      split.val.push_back(source);
    else
      split.test.push_back(source);
  }
  return split;
}

std::vector<Motion> synth_generate(long n_sequences, long joints, long length, double fps,
                                   std::uint64_t seed) {
  if (n_sequences < 1 || joints < 1 || length < 1 || !(fps > 0.0))
    throw std::invalid_argument("synth_generate: counts and fps must be positive");
  std::vector<Motion> out;
  Rng rng(seed);
  for (long s = 0; s < n_sequences; ++s) {
    struct Sinusoid {
      double freq, amp, phase;
    };
    // channel = joint * 3 + coordinate
    std::vector<std::vector<Sinusoid>> channels(static_cast<size_t>(joints * 3));
    for (auto& ch : channels) {
      const long count = 1 + rng.uniform_int(3);
      for (long k = 0; k < count; ++k)
        ch.push_back({rng.uniform(0.25, 2.0), rng.uniform(0.05, 0.8),
                      rng.uniform(0.0, 2.0 * M_PI)});
    }
    Motion m;
    m.fps = fps;
    for (long t = 0; t < length; ++t) {
      const double time = static_cast<double>(t) / fps;
      Pose p;
      p.joints.resize(static_cast<size_t>(joints));
      for (long j = 0; j < joints; ++j) {
        double v[3];
        for (long c = 0; c < 3; ++c) {
          double x = 0.0;
          for (const Sinusoid& sn : channels[static_cast<size_t>(j * 3 + c)])
            x += sn.amp * std::sin(2.0 * M_PI * sn.freq * time + sn.phase);
          v[c] = x;
        }
        p.joints[static_cast<size_t>(j)].axis_angle = {v[0], v[1], v[2]};
      }
      m.frames.push_back(std::move(p));
    }
    out.push_back(std::move(m));
  }
  return out;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  json doc = json::array();
  for (const ManifestEntry& e : entries) doc.push_back({{"path", e.path}, {"split", e.split}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << doc.dump(2) << "\n";
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
  }
  std::vector<ManifestEntry> entries;
  for (const auto& item : doc) {
    if (!item.contains("path") || !item.contains("split"))
      throw std::runtime_error("manifest entry needs \"path\" and \"split\": " + path);
    entries.push_back({item["path"].get<std::string>(), item["split"].get<std::string>()});
  }
  return entries;
}

}  // namespace sar
