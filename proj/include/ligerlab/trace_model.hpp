#ifndef LIGERLAB_TRACE_MODEL_HPP
#define LIGERLAB_TRACE_MODEL_HPP

// Symbolic / state projections of execution traces, grouping of concrete
// runs by program path, blended traces, and coverage-minimal path selection.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ligerlab/minilang.hpp"
#include "ligerlab/util.hpp"

namespace ligerlab::traces {

using minilang::BranchArm;
using minilang::Coverage;
using minilang::ExecutionTrace;
using minilang::ProgramState;
using minilang::StatementId;

struct PathKey {
  std::uint64_t hash = 0;
  auto operator<=>(const PathKey&) const = default;
  std::string str() const { return hex64(hash); }
};

inline PathKey path_key_of(std::span<const StatementId> stmts) {
  Fnv1a h;
  for (auto s : stmts) h.u64(static_cast<std::uint64_t>(s));
  return {h.value()};
}

struct SymbolicTrace {
  PathKey path_key;
  std::vector<StatementId> statements;
  friend bool operator==(const SymbolicTrace&, const SymbolicTrace&) = default;
};

struct StateTrace {
  std::vector<ProgramState> states;
  friend bool operator==(const StateTrace&, const StateTrace&) = default;
};

struct OrderedPair {
  StatementId statement;
  std::vector<ProgramState> states;  // one per concrete trace, in concrete order
  friend bool operator==(const OrderedPair&, const OrderedPair&) = default;
};

struct BlendedTrace {
  PathKey path_key;
  std::vector<OrderedPair> pairs;
  std::size_t concrete_count = 0;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const BlendedTrace&, const BlendedTrace&) = default;
};

inline std::vector<StatementId> statement_sequence(const ExecutionTrace& t) {
  std::vector<StatementId> out;
  out.reserve(t.steps.size());
  for (const auto& s : t.steps) out.push_back(s.stmt);
  return out;
}

inline SymbolicTrace project_symbolic(const ExecutionTrace& t) {
  if (t.steps.empty()) throw Error("project_symbolic: empty execution trace");
  SymbolicTrace out;
  out.statements = statement_sequence(t);
  out.path_key = path_key_of(out.statements);
  return out;
}

inline StateTrace project_states(const ExecutionTrace& t) {
  if (t.steps.empty()) throw Error("project_states: empty execution trace");
  StateTrace out;
  out.states.reserve(t.steps.size());
  for (const auto& s : t.steps) out.states.push_back(s.state);
  return out;
}

struct PathGroup {
  SymbolicTrace symbolic;
  std::vector<ExecutionTrace> traces;  // discovery order
  Coverage coverage;
};

/// Partitions traces by identical statement sequence; groups and their
/// members keep discovery order.
inline std::vector<PathGroup> group_by_path(const std::vector<ExecutionTrace>& traces) {
  std::vector<PathGroup> groups;
  std::map<std::vector<StatementId>, std::size_t> index;
  for (const auto& t : traces) {
    auto seq = statement_sequence(t);
    auto [it, inserted] = index.try_emplace(seq, groups.size());
    if (inserted) {
      PathGroup g;
      g.symbolic.path_key = path_key_of(seq);
      g.symbolic.statements = std::move(seq);
      groups.push_back(std::move(g));
    }
    auto& g = groups[it->second];
    g.traces.push_back(t);
    g.coverage.insert(t.covered_branches.begin(), t.covered_branches.end());
  }
  return groups;
}

/// Zips a symbolic trace with the first `n_eps` concrete runs of that path.
inline BlendedTrace build_blended(const SymbolicTrace& sym, const std::vector<ExecutionTrace>& concretes,
                                  std::size_t n_eps) {
  if (n_eps == 0) throw Error("build_blended: need at least one concrete trace");
  if (concretes.size() < n_eps)
    throw Error("build_blended: " + std::to_string(concretes.size()) +
                " concrete traces available, " + std::to_string(n_eps) + " requested");
  for (std::size_t c = 0; c < n_eps; ++c) {
    const auto& t = concretes[c];
    bool same = t.steps.size() == sym.statements.size();
    for (std::size_t i = 0; same && i < t.steps.size(); ++i)
      same = t.steps[i].stmt == sym.statements[i];
    if (!same) throw Error("build_blended: concrete trace " + std::to_string(c) +
                           " does not follow path " + sym.path_key.str());
  }
  BlendedTrace bt;
  bt.path_key = sym.path_key;
  bt.concrete_count = n_eps;
  bt.pairs.reserve(sym.statements.size());
  for (std::size_t i = 0; i < sym.statements.size(); ++i) {
    OrderedPair op{sym.statements[i], {}};
    op.states.reserve(n_eps);
    for (std::size_t c = 0; c < n_eps; ++c) op.states.push_back(concretes[c].steps[i].state);
    bt.pairs.push_back(std::move(op));
  }
  return bt;
}

inline SymbolicTrace symbolic_of(const BlendedTrace& bt) {
  SymbolicTrace s{bt.path_key, {}};
  for (const auto& p : bt.pairs) s.statements.push_back(p.statement);
  return s;
}

inline StateTrace concrete_column(const BlendedTrace& bt, std::size_t c) {
  if (c >= bt.concrete_count) throw Error("concrete_column: index out of range");
  StateTrace s;
  for (const auto& p : bt.pairs) s.states.push_back(p.states[c]);
  return s;
}

/// Greedy set cover over branch arms. Each round takes the path adding the
/// most uncovered arms; ties go to the earliest-discovered path. A program
/// without branches still yields its first path.
inline std::vector<std::size_t> select_min_coverage_indices(const std::vector<Coverage>& coverage) {
  if (coverage.empty()) throw Error("select_min_coverage_set: no paths");
  Coverage full, covered;
  for (const auto& c : coverage) full.insert(c.begin(), c.end());
  std::vector<std::size_t> picked;
  std::vector<bool> used(coverage.size(), false);
  while (covered.size() < full.size()) {
    std::size_t best = coverage.size(), best_gain = 0;
    for (std::size_t i = 0; i < coverage.size(); ++i) {
      if (used[i]) continue;
      std::size_t gain = 0;
      for (const auto& b : coverage[i]) gain += covered.count(b) ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best == coverage.size()) break;
    used[best] = true;
    picked.push_back(best);
    covered.insert(coverage[best].begin(), coverage[best].end());
  }
  if (picked.empty()) picked.push_back(0);
  return picked;
}

inline std::vector<PathKey> select_min_coverage_set(
    const std::vector<std::pair<PathKey, Coverage>>& groups) {
  std::vector<Coverage> cov;
  cov.reserve(groups.size());
  for (const auto& g : groups) cov.push_back(g.second);
  std::vector<PathKey> out;
  for (auto i : select_min_coverage_indices(cov)) out.push_back(groups[i].first);
  return out;
}

/// Keeps `k` concrete columns chosen uniformly at random; kept columns stay
/// in their original order.
inline BlendedTrace downsample_concretes(const BlendedTrace& bt, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > bt.concrete_count)
    throw Error("downsample_concretes: k=" + std::to_string(k) + " outside [1, " +
                std::to_string(bt.concrete_count) + "]");
  std::vector<std::size_t> cols(bt.concrete_count);
  std::iota(cols.begin(), cols.end(), 0);
  Rng rng(seed);
  shuffle_in_place(cols, rng);
  cols.resize(k);
  std::sort(cols.begin(), cols.end());
  BlendedTrace out;
  out.path_key = bt.path_key;
  out.concrete_count = k;
  for (const auto& p : bt.pairs) {
    OrderedPair op{p.statement, {}};
    for (auto c : cols) op.states.push_back(p.states[c]);
    out.pairs.push_back(std::move(op));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blended-trace store: one JSON line per program.

struct PathRecord {
  BlendedTrace blended;
  Coverage coverage;
  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

struct ProgramTraces {
  std::string program_id;
  std::vector<PathRecord> paths;
  std::size_t executions = 0;          // runs performed while tracing
  bool coverage_preserved = true;      // false if a reduction lost branch arms
  friend bool operator==(const ProgramTraces&, const ProgramTraces&) = default;

  std::size_t concretes_used() const {
    std::size_t n = 0;
    for (const auto& p : paths) n += p.blended.concrete_count;
    return n;
  }
  Coverage coverage() const {
    Coverage c;
    for (const auto& p : paths) c.insert(p.coverage.begin(), p.coverage.end());
    return c;
  }
};

inline nlohmann::json program_traces_to_json(const ProgramTraces& pt) {
  nlohmann::json j;
  j["program_id"] = pt.program_id;
  auto paths = nlohmann::json::array();
  for (const auto& rec : pt.paths) {
    const auto& bt = rec.blended;
    nlohmann::json pj;
    pj["path_key"] = bt.path_key.str();
    auto ids = nlohmann::json::array();
    for (const auto& p : bt.pairs) ids.push_back(p.statement);
    pj["stmt_ids"] = ids;
    auto concretes = nlohmann::json::array();
    for (std::size_t c = 0; c < bt.concrete_count; ++c) {
      auto col = nlohmann::json::array();
      for (const auto& p : bt.pairs) col.push_back(minilang::state_to_json(p.states[c]));
      concretes.push_back(std::move(col));
    }
    pj["concretes"] = std::move(concretes);
    auto br = nlohmann::json::array();
    for (const auto& b : rec.coverage) br.push_back(minilang::branch_to_json(b));
    pj["branches"] = std::move(br);
    paths.push_back(std::move(pj));
  }
  j["paths"] = std::move(paths);
  j["executions"] = pt.executions;
  j["coverage_preserved"] = pt.coverage_preserved;
  return j;
}

inline ProgramTraces program_traces_from_json(const nlohmann::json& j) {
  ProgramTraces pt;
  pt.program_id = j.at("program_id").get<std::string>();
  for (const auto& pj : j.at("paths")) {
    PathRecord rec;
    auto& bt = rec.blended;
    bt.path_key.hash = std::stoull(pj.at("path_key").get<std::string>(), nullptr, 16);
    const auto& ids = pj.at("stmt_ids");
    const auto& concretes = pj.at("concretes");
    bt.concrete_count = concretes.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      OrderedPair op{ids[i].get<int>(), {}};
      for (const auto& col : concretes) op.states.push_back(minilang::state_from_json(col.at(i)));
      bt.pairs.push_back(std::move(op));
    }
    for (const auto& b : pj.value("branches", nlohmann::json::array()))
      rec.coverage.insert(minilang::branch_from_json(b));
    pt.paths.push_back(std::move(rec));
  }
  pt.executions = j.value("executions", std::size_t{0});
  pt.coverage_preserved = j.value("coverage_preserved", true);
  return pt;
}

}  // namespace ligerlab::traces

#endif  // LIGERLAB_TRACE_MODEL_HPP
