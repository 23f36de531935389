#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sar/motion.hpp"

namespace sar {

// Motion file schema: {"fps": number, "joints": J,
//                      "frames": [[[x,y,z] * J] * T]}.
Motion load_motion(const std::string& path);
void save_motion(const Motion& motion, const std::string& path);

struct SlicePolicy {
  double high_fps_threshold = 60.0;  // at or above this, also slice 2x windows
};

// Fixed-length windows at the given stride. High-framerate motions
// additionally produce double-length windows downsampled by two (half fps).
std::vector<Motion> slice_windows(const Motion& motion, long window, long stride,
                                  const SlicePolicy& policy = {});

struct DatasetSplit {
  std::vector<long> train, val, test;  // source indices
};

// Seeded shuffle then contiguous cut at the source level; ratios must sum
// to one.
DatasetSplit split_dataset(long n_items, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

// Per joint coordinate, a sum of one to three seeded sinusoids with
// frequency 0.25-2 Hz, amplitude at most 0.8 rad, and random phase.
std::vector<Motion> synth_generate(long n_sequences, long joints, long length, double fps,
                                   std::uint64_t seed);

struct ManifestEntry {
  std::string path;
  std::string split;  // "train" | "val" | "test"
};

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> load_manifest(const std::string& path);

}  // namespace sar
