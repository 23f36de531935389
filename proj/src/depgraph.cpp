#include "sar/depgraph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace sar {

using nlohmann::json;

namespace {

void insert_sorted(std::vector<long>& v, long x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

void check_interior(long t_interior) {
  if (t_interior < 1) throw std::invalid_argument("dependency graph needs at least one interior frame");
}

// Appends the chain source of each target to its dependency set, following
// the construction order the caller passes in.
void add_chain_sources(DependencyGraph& g, const std::vector<long>& order) {
  long prev = 0;
  for (long t : order) {
    insert_sorted(g.deps[t], prev);
    prev = t;
  }
}

}  // namespace

DependencyGraph build_original_ar(long t_interior) {
  check_interior(t_interior);
  DependencyGraph g;
  g.n_positions = t_interior + 2;
  const long end = t_interior + 1;
  for (long t = 1; t <= t_interior; ++t) {
    std::vector<long> d{0};
    for (long u = 1; u < t; ++u) d.push_back(u);
    d.push_back(end);
    g.deps[t] = std::move(d);
  }
  return g;
}

DependencyGraph build_binary_search(long t_interior) {
  check_interior(t_interior);
  DependencyGraph g;
  g.n_positions = t_interior + 2;
  std::vector<long> order;
  std::deque<std::pair<long, long>> intervals{{0, t_interior + 1}};
  while (!intervals.empty()) {
    const auto [lo, hi] = intervals.front();
    intervals.pop_front();
    if (hi - lo <= 1) continue;
    const long mid = (lo + hi) / 2;
    g.deps[mid] = {lo, hi};
    order.push_back(mid);
    intervals.emplace_back(lo, mid);
    intervals.emplace_back(mid, hi);
  }
  add_chain_sources(g, order);
  return g;
}

DependencyGraph build_three_stage(long t_interior, const std::vector<long>& keyframes) {
  check_interior(t_interior);
  for (size_t i = 0; i < keyframes.size(); ++i) {
    if (keyframes[i] < 1 || keyframes[i] > t_interior)
      throw std::invalid_argument("keyframe out of range [1, T]");
    if (i > 0 && keyframes[i] <= keyframes[i - 1])
      throw std::invalid_argument("keyframes must be strictly increasing");
  }
  DependencyGraph g;
  g.n_positions = t_interior + 2;
  const long end = t_interior + 1;
  std::vector<long> order;

  // Stage 1: keyframes, each seeing the endpoints and the earlier keyframes.
  for (size_t j = 0; j < keyframes.size(); ++j) {
    std::vector<long> d{0, end};
    for (size_t p = 0; p < j; ++p) insert_sorted(d, keyframes[p]);
    g.deps[keyframes[j]] = std::move(d);
    order.push_back(keyframes[j]);
  }

  // Stage 2: left-to-right within each interval between consecutive anchors;
  // every frame sees the endpoints, all keyframes, and earlier frames of its
  // own interval.
  std::vector<long> anchors{0};
  anchors.insert(anchors.end(), keyframes.begin(), keyframes.end());
  anchors.push_back(end);
  for (size_t a = 0; a + 1 < anchors.size(); ++a) {
    const long left = anchors[a], right = anchors[a + 1];
    for (long t = left + 1; t < right; ++t) {
      std::vector<long> d{0, end};
      for (long k : keyframes) insert_sorted(d, k);
      for (long u = left + 1; u < t; ++u) insert_sorted(d, u);
      g.deps[t] = std::move(d);
      order.push_back(t);
    }
  }
  add_chain_sources(g, order);

  // Stage 3: duplicated interior nodes depending on all N positions.
  for (long t = 1; t <= t_interior; ++t) g.duplicates.insert(t);
  return g;
}

DagValidation validate_dag(const DependencyGraph& g) {
  const long n = g.n_positions;
  const long end = n - 1;
  for (const auto& [target, dep_list] : g.deps) {
    if (target == 0 || target == end)
      throw std::invalid_argument("given frames cannot be non-duplicate targets");
    if (target < 0 || target >= n) throw std::invalid_argument("target position out of range");
    for (long d : dep_list) {
      if (d < 0 || d >= n) throw std::invalid_argument("dependency position out of range");
      if (d != 0 && d != end && !g.deps.count(d))
        throw std::invalid_argument("dependency refers to a position that is never generated");
    }
  }

  // Kahn over targets; the endpoints count as already available.
  std::map<long, long> pending;  // target -> unmet dependency count
  std::map<long, std::vector<long>> dependents;
  for (const auto& [target, dep_list] : g.deps) {
    long unmet = 0;
    for (long d : dep_list) {
      if (d == 0 || d == end) continue;
      ++unmet;
      if (d != target) dependents[d].push_back(target);  // a self edge never resolves
    }
    pending[target] = unmet;
  }
  std::set<long> ready;
  for (const auto& [target, count] : pending)
    if (count == 0) ready.insert(target);
  long consumed = 0;
  std::set<long> remaining;
  for (const auto& [target, _] : pending) remaining.insert(target);
  while (!ready.empty()) {
    const long t = *ready.begin();
    ready.erase(ready.begin());
    remaining.erase(t);
    ++consumed;
    auto it = dependents.find(t);
    if (it == dependents.end()) continue;
    for (long dep : it->second)
      if (--pending[dep] == 0) ready.insert(dep);
  }
  if (consumed == static_cast<long>(g.deps.size())) return {};

  // Walk target -> unresolved dependency links until a position repeats.
  DagValidation result;
  result.ok = false;
  long cur = *remaining.begin();
  std::vector<long> path;
  std::map<long, size_t> seen;
  while (!seen.count(cur)) {
    seen[cur] = path.size();
    path.push_back(cur);
    long next = -1;
    for (long d : g.deps.at(cur)) {
      if (d == 0 || d == end) continue;
      if (remaining.count(d)) {
        next = d;
        break;
      }
    }
    cur = next;
  }
  result.cycle.assign(path.begin() + static_cast<long>(seen[cur]), path.end());
  return result;
}

Schedule topological_schedule(const DependencyGraph& g) {
  const DagValidation v = validate_dag(g);
  if (!v.ok) {
    std::ostringstream msg;
    msg << "dependency graph contains a cycle:";
    for (long p : v.cycle) msg << " " << p;
    throw CycleError(msg.str(), v.cycle);
  }

  Schedule s;
  s.n_positions = g.n_positions;
  const long end = g.n_positions - 1;

  // Kahn with smallest-position-first tie-break; reproduces the builders'
  // construction order because their chain sources leave one choice per step.
  std::map<long, std::set<long>> unmet;
  std::map<long, std::vector<long>> dependents;
  for (const auto& [target, dep_list] : g.deps) {
    std::set<long> u;
    for (long d : dep_list) {
      if (d == 0 || d == end) continue;
      u.insert(d);
      dependents[d].push_back(target);
    }
    unmet[target] = std::move(u);
  }
  std::set<long> ready;
  for (const auto& [target, u] : unmet)
    if (u.empty()) ready.insert(target);
  while (!ready.empty()) {
    const long t = *ready.begin();
    ready.erase(ready.begin());
    s.order.push_back(t);
    for (long dep : dependents[t]) {
      unmet[dep].erase(t);
      if (unmet[dep].empty()) ready.insert(dep);
    }
  }

  long prev = 0;
  for (long t : s.order) {
    s.source[t] = prev;
    std::vector<long> d = g.deps.at(t);
    insert_sorted(d, prev);
    s.deps[t] = std::move(d);
    prev = t;
  }

  // Level partition: maximal consecutive groups whose members depend only on
  // frames valid before the group, with pairwise distinct source rows.
  std::set<long> valid{0, end};
  std::vector<long> group;
  std::set<long> group_sources;
  auto flush = [&] {
    if (group.empty()) return;
    for (long t : group) valid.insert(t);
    s.levels.push_back(group);
    group.clear();
    group_sources.clear();
  };
  for (long t : s.order) {
    const bool deps_ok = std::all_of(s.deps[t].begin(), s.deps[t].end(),
                                     [&](long d) { return valid.count(d) > 0; });
    if (!deps_ok || group_sources.count(s.source[t])) flush();
    group.push_back(t);
    group_sources.insert(s.source[t]);
  }
  flush();

  s.smoothing = !g.duplicates.empty();
  for (long t : g.duplicates) s.smoothing_source[t] = t;
  return s;
}

Fdam derive_fdam(const Schedule& s, long n) {
  for (long t : s.order)
    if (t < 0 || t >= n) throw std::invalid_argument("schedule position out of mask range");

  Fdam f;
  f.mask = AttentionMask(n);
  std::set<long> used_rows;
  for (size_t i = 0; i < s.order.size(); ++i) {
    const long target = s.order[i];
    const long row = s.source.at(target);
    if (!used_rows.insert(row).second)
      throw std::logic_error("derive_fdam: source row assigned twice");
    for (long d : s.deps.at(target)) {
      if (d < 0 || d >= n) throw std::invalid_argument("dependency out of mask range");
      f.mask.set(row, d, true);
    }
  }
  for (long r = 0; r < n; ++r)
    if (!used_rows.count(r)) f.mask.set(r, r, true);

  f.has_smoothing = s.smoothing;
  f.smoothing = AttentionMask(n);
  std::set<long> smoothing_rows;
  for (const auto& [target, row] : s.smoothing_source) {
    smoothing_rows.insert(row);
    for (long c = 0; c < n; ++c) f.smoothing.set(row, c, true);
  }
  for (long r = 0; r < n; ++r)
    if (!smoothing_rows.count(r)) f.smoothing.set(r, r, true);
  return f;
}

std::string export_dot(const DependencyGraph& g) {
  std::ostringstream out;
  out << "digraph dependencies {\n";
  const long end = g.n_positions - 1;
  for (long p = 0; p < g.n_positions; ++p) {
    out << "  p" << p;
    if ((p == 0 || p == end) && !g.deps.count(p)) out << " [shape=box]";
    out << ";\n";
  }
  for (long t : g.duplicates) out << "  s" << t << " [style=dashed];\n";
  for (const auto& [target, dep_list] : g.deps)
    for (long d : dep_list) out << "  p" << target << " -> p" << d << ";\n";
  for (long t : g.duplicates)
    for (long d = 0; d < g.n_positions; ++d) out << "  s" << t << " -> p" << d << ";\n";
  out << "}\n";
  return out.str();
}

std::string schedule_to_json(const Schedule& s) {
  json doc;
  doc["n_positions"] = s.n_positions;
  doc["order"] = s.order;
  json source = json::object();
  for (const auto& [t, row] : s.source) source[std::to_string(t)] = row;
  doc["source"] = std::move(source);
  json deps = json::object();
  for (const auto& [t, d] : s.deps) deps[std::to_string(t)] = d;
  doc["deps"] = std::move(deps);
  doc["levels"] = s.levels;
  doc["smoothing"] = s.smoothing;
  json dup = json::array();
  for (const auto& [t, _] : s.smoothing_source) dup.push_back(t);
  doc["duplicates"] = std::move(dup);
  return doc.dump(2);
}

Schedule schedule_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("schedule parse error: ") + e.what());
  }
  for (const char* field : {"n_positions", "order", "source", "deps", "levels"})
    if (!doc.contains(field))
      throw std::runtime_error(std::string("schedule is missing field \"") + field + "\"");
  Schedule s;
  s.n_positions = doc["n_positions"].get<long>();
  s.order = doc["order"].get<std::vector<long>>();
  for (const auto& [key, value] : doc["source"].items()) s.source[std::stol(key)] = value.get<long>();
  for (const auto& [key, value] : doc["deps"].items())
    s.deps[std::stol(key)] = value.get<std::vector<long>>();
  s.levels = doc["levels"].get<std::vector<std::vector<long>>>();
  s.smoothing = doc.value("smoothing", false);
  if (doc.contains("duplicates"))
    for (long t : doc["duplicates"].get<std::vector<long>>()) s.smoothing_source[t] = t;
  return s;
}

void save_schedule(const Schedule& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schedule file: " + path);
  out << schedule_to_json(s) << "\n";
}

Schedule load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return schedule_from_json(buf.str());
}

}  // namespace sar
