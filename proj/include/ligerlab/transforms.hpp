#ifndef LIGERLAB_TRANSFORMS_HPP
#define LIGERLAB_TRANSFORMS_HPP

// Semantics-preserving minilang rewrites (constant/variable propagation,
// dead-code elimination, loop unrolling, loop-invariant hoisting), an
// execution-based equivalence oracle, and prediction-stability measurement.
//
// Every rewrite works on a copy of the AST and re-parses the rendered source
// afterwards, so statement ids, variables and branch sites are rebuilt.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ligerlab/minilang.hpp"

namespace ligerlab::transforms {

using minilang::Expr;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;
using minilang::Type;
using minilang::Value;

struct TransformKind {
  enum class Kind { ConstVarPropagation, DeadCodeElim, LoopUnroll, Hoisting, Identity };
  Kind kind = Kind::Identity;
  unsigned factor = 2;  // LoopUnroll only

  static TransformKind const_var_propagation() { return {Kind::ConstVarPropagation, 2}; }
  static TransformKind dead_code_elim() { return {Kind::DeadCodeElim, 2}; }
  static TransformKind loop_unroll(unsigned f = 2) { return {Kind::LoopUnroll, f}; }
  static TransformKind hoisting() { return {Kind::Hoisting, 2}; }
  static TransformKind identity() { return {Kind::Identity, 2}; }

  std::string name() const {
    switch (kind) {
      case Kind::ConstVarPropagation: return "const_var_propagation";
      case Kind::DeadCodeElim: return "dead_code_elim";
      case Kind::LoopUnroll: return "loop_unroll";
      case Kind::Hoisting: return "hoisting";
      case Kind::Identity: return "identity";
    }
    return "?";
  }

  static TransformKind parse(const std::string& s) {
    if (s == "const_var_propagation" || s == "constprop") return const_var_propagation();
    if (s == "dead_code_elim" || s == "dce") return dead_code_elim();
    if (s == "loop_unroll" || s == "unroll") return loop_unroll();
    if (s == "hoisting" || s == "hoist") return hoisting();
    if (s == "identity") return identity();
    throw Error("unknown transform '" + s + "'");
  }

  static std::vector<TransformKind> all() {
    return {const_var_propagation(), dead_code_elim(), loop_unroll(), hoisting(), identity()};
  }
};

struct TransformResult {
  Program program;
  bool applied = false;
};

namespace detail {

using VarSet = std::set<std::string>;

inline void expr_reads(const Expr& e, VarSet& out) {
  switch (e.kind) {
    case Expr::Kind::Var:
    case Expr::Kind::Len: out.insert(e.name); break;
    case Expr::Kind::Index: out.insert(e.name); break;
    default: break;
  }
  for (const auto& k : e.kids) expr_reads(k, out);
}

inline VarSet reads_of(const Expr& e) {
  VarSet s;
  expr_reads(e, s);
  return s;
}

/// True when evaluating `e` cannot fault on assigned operands: no indexing,
/// no division or remainder.
inline bool cannot_fault(const Expr& e) {
  if (e.kind == Expr::Kind::Index) return false;
  if (e.kind == Expr::Kind::Binary && (e.op == "/" || e.op == "%")) return false;
  return std::all_of(e.kids.begin(), e.kids.end(), cannot_fault);
}

// Variables a statement (recursively) writes.
inline void stmt_writes(const Stmt& s, VarSet& out) {
  switch (s.kind) {
    case StmtKind::Assign:
    case StmtKind::ArrayStore:
    case StmtKind::For: out.insert(s.target); break;
    case StmtKind::Call: out.insert(s.args[0].name); break;
    default: break;
  }
  for (const auto& b : s.body) stmt_writes(b, out);
  for (const auto& b : s.else_body) stmt_writes(b, out);
}

inline VarSet writes_of(const std::vector<Stmt>& body) {
  VarSet s;
  for (const auto& b : body) stmt_writes(b, s);
  return s;
}

// Variables a statement (recursively) reads, including guards and bounds.
inline void stmt_reads(const Stmt& s, VarSet& out) {
  if (s.value) expr_reads(*s.value, out);
  if (s.index) expr_reads(*s.index, out);
  if (s.lo) expr_reads(*s.lo, out);
  if (s.hi) expr_reads(*s.hi, out);
  for (const auto& a : s.args) expr_reads(a, out);
  if (s.kind == StmtKind::Assign && s.op != "=") out.insert(s.target);
  if (s.kind == StmtKind::ArrayStore) out.insert(s.target);
  if (s.kind == StmtKind::For) out.insert(s.target);
  for (const auto& b : s.body) stmt_reads(b, out);
  for (const auto& b : s.else_body) stmt_reads(b, out);
}

inline std::size_t count_assignments(const std::vector<Stmt>& body, const std::string& var) {
  std::size_t n = 0;
  for (const auto& s : body) {
    if ((s.kind == StmtKind::Assign || s.kind == StmtKind::For) && s.target == var) ++n;
    n += count_assignments(s.body, var) + count_assignments(s.else_body, var);
  }
  return n;
}

inline bool mentions(const std::vector<Stmt>& body, const std::string& var, int skip_id) {
  for (const auto& s : body) {
    if (s.id == skip_id) continue;
    VarSet r, w;
    stmt_reads(s, r);
    stmt_writes(s, w);
    if (s.kind != StmtKind::If && s.kind != StmtKind::While && s.kind != StmtKind::For) {
      if (r.count(var) || w.count(var)) return true;
      continue;
    }
    // compound statement: check header then recurse into the bodies
    VarSet hr;
    if (s.value) expr_reads(*s.value, hr);
    if (s.lo) expr_reads(*s.lo, hr);
    if (s.hi) expr_reads(*s.hi, hr);
    if (hr.count(var) || (s.kind == StmtKind::For && s.target == var)) return true;
    if (mentions(s.body, var, skip_id) || mentions(s.else_body, var, skip_id)) return true;
  }
  return false;
}

inline Program reparse(const Program& p, const std::vector<Stmt>& body) {
  return minilang::parse(minilang::render_function(p.name, p.params, body));
}

// ---------------------------------------------------------------------------
// Constant folding and propagation

inline bool fold(Expr& e) {
  bool changed = false;
  for (auto& k : e.kids) changed |= fold(k);
  if (e.kind == Expr::Kind::Unary && e.kids[0].is_literal()) {
    const Expr& k = e.kids[0];
    Expr lit = e.op == "-" ? Expr::int_lit(minilang::detail::wrap_sub(0, k.int_value))
                           : Expr::bool_lit(!k.bool_value);
    e = std::move(lit);
    return true;
  }
  if (e.kind == Expr::Kind::Binary && e.kids[0].is_literal() && e.kids[1].is_literal()) {
    const Expr &l = e.kids[0], &r = e.kids[1];
    std::optional<Expr> lit;
    if (l.kind == Expr::Kind::BoolLit) {
      if (e.op == "&&") lit = Expr::bool_lit(l.bool_value && r.bool_value);
      else if (e.op == "||") lit = Expr::bool_lit(l.bool_value || r.bool_value);
      else if (e.op == "==") lit = Expr::bool_lit(l.bool_value == r.bool_value);
      else if (e.op == "!=") lit = Expr::bool_lit(l.bool_value != r.bool_value);
    } else if (auto c = minilang::detail::compare_op(e.op, l.int_value, r.int_value)) {
      lit = Expr::bool_lit(*c);
    } else if (auto v = minilang::detail::int_binop(e.op, l.int_value, r.int_value)) {
      lit = Expr::int_lit(*v);
    }
    if (lit) {
      e = std::move(*lit);
      return true;
    }
  }
  return changed;
}

class Propagator {
 public:
  explicit Propagator(const Program& p) {
    for (std::size_t i = 0; i < p.variables.size(); ++i) types_[p.variables[i]] = p.variable_types[i];
  }

  bool changed() const { return changed_; }

  void block(std::vector<Stmt>& body, std::map<std::string, Expr>& env) {
    for (auto& s : body) stmt(s, env);
  }

 private:
  using Env = std::map<std::string, Expr>;

  bool scalar(const std::string& v) const {
    auto it = types_.find(v);
    return it != types_.end() && it->second != Type::IntArray;
  }

  void subst(Expr& e, const Env& env) {
    if (e.kind == Expr::Kind::Var) {
      auto it = env.find(e.name);
      if (it != env.end()) {
        e = it->second;
        changed_ = true;
        return;
      }
    }
    for (auto& k : e.kids) subst(k, env);
  }

  void rewrite(std::optional<Expr>& e, const Env& env) {
    if (!e) return;
    subst(*e, env);
    if (fold(*e)) changed_ = true;
  }

  static void kill(Env& env, const std::string& var) {
    env.erase(var);
    for (auto it = env.begin(); it != env.end();) {
      if (it->second.kind == Expr::Kind::Var && it->second.name == var) it = env.erase(it);
      else ++it;
    }
  }

  static void kill_all(Env& env, const VarSet& vars) {
    for (const auto& v : vars) kill(env, v);
  }

  static Env intersect(const Env& a, const Env& b) {
    Env out;
    for (const auto& [k, v] : a) {
      auto it = b.find(k);
      if (it != b.end() && minilang::expr_tokens(it->second) == minilang::expr_tokens(v)) out.emplace(k, v);
    }
    return out;
  }

  void stmt(Stmt& s, Env& env) {
    switch (s.kind) {
      case StmtKind::Assign:
        rewrite(s.value, env);
        kill(env, s.target);
        if (s.op == "=" && scalar(s.target) &&
            (s.value->is_literal() || (s.value->kind == Expr::Kind::Var && scalar(s.value->name) &&
                                       s.value->name != s.target)))
          env[s.target] = *s.value;
        return;
      case StmtKind::ArrayStore:
        rewrite(s.index, env);
        rewrite(s.value, env);
        return;
      case StmtKind::Call:
        for (std::size_t i = 1; i < s.args.size(); ++i) {
          subst(s.args[i], env);
          if (fold(s.args[i])) changed_ = true;
        }
        return;
      case StmtKind::Return:
        rewrite(s.value, env);
        return;
      case StmtKind::If: {
        rewrite(s.value, env);
        Env then_env = env, else_env = env;
        block(s.body, then_env);
        block(s.else_body, else_env);
        env = intersect(then_env, else_env);
        return;
      }
      case StmtKind::While: {
        kill_all(env, writes_of(s.body));
        rewrite(s.value, env);
        Env inner = env;
        block(s.body, inner);
        return;
      }
      case StmtKind::For: {
        rewrite(s.lo, env);
        rewrite(s.hi, env);
        kill(env, s.target);
        kill_all(env, writes_of(s.body));
        Env inner = env;
        block(s.body, inner);
        return;
      }
    }
  }

  std::map<std::string, Type> types_;
  bool changed_ = false;
};

// ---------------------------------------------------------------------------
// Liveness

class Liveness {
 public:
  explicit Liveness(const Program& p) {
    for (const auto& prm : p.params)
      if (prm.type == Type::IntArray) exit_live_.insert(prm.name);
  }

  const VarSet& exit_live() const { return exit_live_; }

  /// Live-after set of every statement id, computed to a fixpoint.
  std::map<int, VarSet> run(const std::vector<Stmt>& body) {
    after_.clear();
    block(body, exit_live_);
    return after_;
  }

 private:
  VarSet block(const std::vector<Stmt>& body, VarSet live) {
    for (auto it = body.rbegin(); it != body.rend(); ++it) live = stmt(*it, live);
    return live;
  }

  VarSet stmt(const Stmt& s, const VarSet& live_after) {
    after_[s.id] = live_after;
    VarSet live = live_after;
    switch (s.kind) {
      case StmtKind::Assign:
        if (s.op == "=") live.erase(s.target);
        else live.insert(s.target);
        expr_reads(*s.value, live);
        return live;
      case StmtKind::ArrayStore:
        live.insert(s.target);
        expr_reads(*s.index, live);
        expr_reads(*s.value, live);
        return live;
      case StmtKind::Call:
        for (const auto& a : s.args) expr_reads(a, live);
        return live;
      case StmtKind::Return:
        live = exit_live_;
        if (s.value) expr_reads(*s.value, live);
        return live;
      case StmtKind::If: {
        VarSet a = block(s.body, live_after), b = block(s.else_body, live_after);
        a.insert(b.begin(), b.end());
        expr_reads(*s.value, a);
        return a;
      }
      case StmtKind::While: {
        VarSet head = live_after;
        expr_reads(*s.value, head);
        while (true) {
          VarSet next = live_after;
          expr_reads(*s.value, next);
          VarSet body_in = block(s.body, head);
          next.insert(body_in.begin(), body_in.end());
          if (next == head) break;
          head = std::move(next);
        }
        after_[s.id] = live_after;
        return head;
      }
      case StmtKind::For: {
        VarSet head = live_after;
        head.insert(s.target);
        while (true) {
          VarSet next = live_after;
          next.insert(s.target);
          VarSet body_in = block(s.body, head);
          next.insert(body_in.begin(), body_in.end());
          if (next == head) break;
          head = std::move(next);
        }
        after_[s.id] = live_after;
        VarSet before = head;
        before.erase(s.target);
        expr_reads(*s.lo, before);
        expr_reads(*s.hi, before);
        return before;
      }
    }
    return live;
  }

  VarSet exit_live_;
  std::map<int, VarSet> after_;
};

// ---------------------------------------------------------------------------
// Dead-code elimination

// One sweep: drop code after a return, collapse literal guards, and remove
// dead non-faulting assignments. Returns true if anything changed.
inline bool eliminate(std::vector<Stmt>& body, const std::map<int, VarSet>& live_after,
                      const std::vector<Stmt>& whole) {
  bool changed = false;
  std::vector<Stmt> out;
  for (auto& s : body) {
    if (s.kind == StmtKind::If && s.value->kind == Expr::Kind::BoolLit) {
      auto& taken = s.value->bool_value ? s.body : s.else_body;
      eliminate(taken, live_after, whole);
      for (auto& t : taken) out.push_back(std::move(t));
      changed = true;
      continue;
    }
    if (s.kind == StmtKind::While && s.value->kind == Expr::Kind::BoolLit && !s.value->bool_value) {
      changed = true;
      continue;
    }
    if (s.kind == StmtKind::Assign && cannot_fault(*s.value)) {
      const VarSet& live = live_after.at(s.id);
      bool dead = !live.count(s.target);
      // a removed declaration must not leave other references behind
      if (dead && s.decl_type && mentions(whole, s.target, s.id)) dead = false;
      if (dead) {
        changed = true;
        continue;
      }
    }
    changed |= eliminate(s.body, live_after, whole);
    changed |= eliminate(s.else_body, live_after, whole);
    bool is_return = s.kind == StmtKind::Return;
    out.push_back(std::move(s));
    if (is_return) {
      if (&s != &body.back()) changed = true;
      break;
    }
  }
  body = std::move(out);
  return changed;
}

// ---------------------------------------------------------------------------
// Unrolling

inline bool contains_loop(const std::vector<Stmt>& body) {
  for (const auto& s : body) {
    if (s.kind == StmtKind::While || s.kind == StmtKind::For) return true;
    if (contains_loop(s.body) || contains_loop(s.else_body)) return true;
  }
  return false;
}

inline std::string fresh_name(const std::string& base, std::set<std::string>& taken) {
  std::string name = base;
  for (int k = 2; taken.count(name); ++k) name = base + std::to_string(k);
  taken.insert(name);
  return name;
}

inline Stmt make_assign(const std::string& target, Expr value, std::optional<Type> decl) {
  Stmt s;
  s.kind = StmtKind::Assign;
  s.target = target;
  s.decl_type = decl;
  s.op = "=";
  s.value = std::move(value);
  return s;
}

// Rewrites innermost `for v in lo..hi { B }` as
//   v: int = lo; end: int = hi;
//   while (v + (f-1) < end) { (B; v = v + 1;) x f }
//   remainder: if/while (v < end) { B; v = v + 1; }
inline bool unroll(std::vector<Stmt>& body, unsigned factor, std::set<std::string>& names) {
  bool changed = false;
  std::vector<Stmt> out;
  for (auto& s : body) {
    if (s.kind == StmtKind::For && !contains_loop(s.body) && !writes_of(s.body).count(s.target)) {
      const std::string v = s.target;
      const std::string end = fresh_name(v + "_end", names);
      out.push_back(make_assign(v, *s.lo, Type::Int));
      out.push_back(make_assign(end, *s.hi, Type::Int));
      Stmt increment = make_assign(v, Expr::binary("+", Expr::var(v), Expr::int_lit(1)), std::nullopt);
      Stmt main;
      main.kind = StmtKind::While;
      main.value = Expr::binary(
          "<", Expr::binary("+", Expr::var(v), Expr::int_lit(static_cast<std::int64_t>(factor) - 1)),
          Expr::var(end));
      for (unsigned k = 0; k < factor; ++k) {
        main.body.insert(main.body.end(), s.body.begin(), s.body.end());
        main.body.push_back(increment);
      }
      Stmt rest;
      rest.kind = factor == 2 ? StmtKind::If : StmtKind::While;
      rest.value = Expr::binary("<", Expr::var(v), Expr::var(end));
      rest.body = s.body;
      rest.body.push_back(increment);
      out.push_back(std::move(main));
      out.push_back(std::move(rest));
      changed = true;
      continue;
    }
    changed |= unroll(s.body, factor, names);
    changed |= unroll(s.else_body, factor, names);
    out.push_back(std::move(s));
  }
  body = std::move(out);
  return changed;
}

// ---------------------------------------------------------------------------
// Hoisting

// Finds one loop-invariant assignment and moves it in front of its loop.
inline bool hoist_one(std::vector<Stmt>& body, const std::map<int, VarSet>& live_after,
                      const std::map<std::string, Type>& types) {
  for (std::size_t li = 0; li < body.size(); ++li) {
    Stmt& loop = body[li];
    if (hoist_one(loop.body, live_after, types) || hoist_one(loop.else_body, live_after, types)) return true;
    if (loop.kind != StmtKind::While && loop.kind != StmtKind::For) continue;
    VarSet modified = writes_of(loop.body);
    if (loop.kind == StmtKind::For) modified.insert(loop.target);
    VarSet header;
    if (loop.value) expr_reads(*loop.value, header);
    if (loop.lo) expr_reads(*loop.lo, header);
    if (loop.hi) expr_reads(*loop.hi, header);
    VarSet read_before;  // reads by earlier statements of the body
    for (std::size_t k = 0; k < loop.body.size(); ++k) {
      const Stmt& s = loop.body[k];
      bool candidate = s.kind == StmtKind::Assign && s.op == "=" && types.at(s.target) != Type::IntArray &&
                       cannot_fault(*s.value) && !header.count(s.target) && !read_before.count(s.target) &&
                       count_assignments(loop.body, s.target) == 1 && !live_after.at(loop.id).count(s.target);
      if (candidate) {
        VarSet rhs = reads_of(*s.value);
        rhs.insert(s.target);  // x = f(x) is not invariant
        bool invariant = std::none_of(rhs.begin(), rhs.end(), [&](const std::string& v) {
          return v == s.target ? reads_of(*s.value).count(v) > 0 : modified.count(v) > 0;
        });
        if (invariant) {
          Stmt moved = std::move(loop.body[k]);
          loop.body.erase(loop.body.begin() + static_cast<std::ptrdiff_t>(k));
          body.insert(body.begin() + static_cast<std::ptrdiff_t>(li), std::move(moved));
          return true;
        }
      }
      stmt_reads(s, read_before);
    }
  }
  return false;
}

}  // namespace detail

inline TransformResult apply_transform(const Program& p, const TransformKind& k) {
  using K = TransformKind::Kind;
  switch (k.kind) {
    case K::Identity:
      return {p, true};
    case K::ConstVarPropagation: {
      std::vector<Stmt> body = p.body;
      detail::Propagator prop(p);
      std::map<std::string, Expr> env;
      prop.block(body, env);
      if (!prop.changed()) return {p, false};
      Program out = detail::reparse(p, body);
      if (out.tokens == p.tokens) return {p, false};
      return {out, true};
    }
    case K::DeadCodeElim: {
      Program cur = p;
      bool any = false;
      for (int round = 0; round < 64; ++round) {
        auto live = detail::Liveness(cur).run(cur.body);
        std::vector<Stmt> body = cur.body;
        if (!detail::eliminate(body, live, cur.body)) break;
        Program next = detail::reparse(cur, body);
        if (next.tokens == cur.tokens) break;
        cur = std::move(next);
        any = true;
      }
      return {any ? cur : p, any};
    }
    case K::LoopUnroll: {
      if (k.factor < 1) throw Error("loop_unroll: factor must be at least 1");
      if (k.factor == 1) return {p, false};
      std::vector<Stmt> body = p.body;
      std::set<std::string> names(p.variables.begin(), p.variables.end());
      if (!detail::unroll(body, k.factor, names)) return {p, false};
      return {detail::reparse(p, body), true};
    }
    case K::Hoisting: {
      std::map<std::string, Type> types;
      Program cur = p;
      bool any = false;
      for (int round = 0; round < 64; ++round) {
        types.clear();
        for (std::size_t i = 0; i < cur.variables.size(); ++i) types[cur.variables[i]] = cur.variable_types[i];
        auto live = detail::Liveness(cur).run(cur.body);
        std::vector<Stmt> body = cur.body;
        if (!detail::hoist_one(body, live, types)) break;
        cur = detail::reparse(cur, body);
        any = true;
      }
      return {any ? cur : p, any};
    }
  }
  return {p, false};
}

// ---------------------------------------------------------------------------
// Equivalence oracle

/// Return value plus the final contents of array parameters.
inline std::vector<Value> observable(const Program& p, const minilang::ExecutionTrace& t) {
  std::vector<Value> out{t.return_value};
  const auto& final = t.final_state();
  for (std::size_t i = 0; i < p.params.size(); ++i)
    if (p.params[i].type == Type::IntArray) out.push_back(final.values[i]);
  return out;
}

/// True iff, on every input, both programs finish within `limits` with equal
/// observable results. Runtime faults count as an outcome and must match;
/// hitting the step limit is never equivalent.
inline bool check_equivalence(const Program& a, const Program& b,
                              const std::vector<std::vector<Value>>& inputs,
                              minilang::StepLimit limits = {}) {
  if (a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].type != b.params[i].type) return false;
  for (const auto& in : inputs) {
    auto ta = minilang::execute(a, in, limits);
    auto tb = minilang::execute(b, in, limits);
    using S = minilang::TraceStatus;
    if (ta.status == S::StepLimitExceeded || tb.status == S::StepLimitExceeded) return false;
    if (ta.status != tb.status) return false;
    if (ta.status == S::RuntimeError) continue;
    if (observable(a, ta) != observable(b, tb)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityReport {
  std::string transform;
  std::size_t applicable = 0;
  std::size_t changed = 0;
  double fraction() const {
    return applicable ? static_cast<double>(changed) / static_cast<double>(applicable) : 0.0;
  }
};

struct StabilityItem {
  std::string program_id;
  Program program;
};

/// `predict` traces, embeds and classifies a program; it returns nullopt
/// when the program cannot be traced, which excludes it.
using Predictor = std::function<std::optional<std::size_t>(const std::string& id, const Program&)>;

inline StabilityReport measure_stability(const Predictor& predict, const std::vector<StabilityItem>& programs,
                                         const TransformKind& kind) {
  StabilityReport r;
  r.transform = kind.name();
  for (const auto& item : programs) {
    auto t = apply_transform(item.program, kind);
    if (!t.applied) continue;
    auto before = predict(item.program_id, item.program);
    auto after = predict(item.program_id, t.program);
    if (!before || !after) continue;
    ++r.applicable;
    if (*before != *after) ++r.changed;
  }
  return r;
}

}  // namespace ligerlab::transforms

#endif  // LIGERLAB_TRANSFORMS_HPP
