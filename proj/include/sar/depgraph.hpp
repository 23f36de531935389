#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sar/mask.hpp"

namespace sar {

// Frame dependency DAG over positions 0..N-1, where position 0 and N-1 are
// the given endpoint frames. Edges point target -> dependency. Duplicate
// nodes model the smoothing pass; each duplicate implicitly depends on all
// N positions, so only the set of duplicated targets is stored.
struct DependencyGraph {
  long n_positions = 0;
  std::map<long, std::vector<long>> deps;  // target -> sorted unique dependencies
  std::set<long> duplicates;

  long interior_count() const { return n_positions - 2; }
};

struct DagValidation {
  bool ok = true;
  std::vector<long> cycle;  // one offending cycle when !ok
};

class CycleError : public std::runtime_error {
 public:
  CycleError(std::string msg, std::vector<long> cycle_positions)
      : std::runtime_error(std::move(msg)), cycle(std::move(cycle_positions)) {}
  std::vector<long> cycle;
};

// Generation plan: a topological order o_1..o_M over the non-duplicate
// targets, the chain source rows (o_0 := 0, source(o_i) = o_{i-1}), and the
// level partition used for batched execution.
struct Schedule {
  long n_positions = 0;
  std::vector<long> order;
  std::map<long, long> source;             // target -> row its prediction is read from
  std::map<long, std::vector<long>> deps;  // per-target deps, source included
  std::vector<std::vector<long>> levels;
  bool smoothing = false;
  std::map<long, long> smoothing_source;  // duplicate target -> row (identity)
};

struct Fdam {
  AttentionMask mask;       // chain-pass rows: row source(o_i) sees deps(o_i)
  AttentionMask smoothing;  // full-visibility rows for the duplicate targets
  bool has_smoothing = false;
};

// Left-to-right order; every frame sees both givens and all earlier frames.
DependencyGraph build_original_ar(long t_interior);

// Recursive middle-frame generation, breadth-first over the recursion tree.
DependencyGraph build_binary_search(long t_interior);

// Keyframe interpolation, then frame-by-frame generation per interval, then
// smoothing duplicates over all interior frames.
DependencyGraph build_three_stage(long t_interior, const std::vector<long>& keyframes);

// Kahn's algorithm over the non-duplicate part; reports one cycle on failure.
DagValidation validate_dag(const DependencyGraph& g);

// Deterministic schedule (smallest-position-first tie-break). Throws
// CycleError when the graph does not validate. The chain source of each
// target is added to its dependency set if the graph lacks it.
Schedule topological_schedule(const DependencyGraph& g);

// Row source(o_i) gets exactly deps(o_i); rows never used as a source keep
// only a self-entry so softmax stays well-defined.
Fdam derive_fdam(const Schedule& s, long n);

// Graphviz text, deterministic node/edge ordering. Duplicates render dashed.
std::string export_dot(const DependencyGraph& g);

std::string schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const std::string& text);
void save_schedule(const Schedule& s, const std::string& path);
Schedule load_schedule(const std::string& path);

}  // namespace sar
