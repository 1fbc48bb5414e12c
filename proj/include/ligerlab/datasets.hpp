#ifndef LIGERLAB_DATASETS_HPP
#define LIGERLAB_DATASETS_HPP

// Synthetic corpora for the two desk tasks (semantic classification and
// method-name prediction), their manifests and splits, and the tracing
// pipeline that turns a manifest into a blended-trace store.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ligerlab/minilang.hpp"
#include "ligerlab/numcore.hpp"
#include "ligerlab/trace_model.hpp"
#include "ligerlab/util.hpp"

namespace ligerlab::data {

using minilang::Program;
using minilang::Value;

enum class Task { Classify, Name };

inline std::string task_name(Task t) { return t == Task::Classify ? "classify" : "name"; }

inline Task parse_task(const std::string& s) {
  if (s == "classify") return Task::Classify;
  if (s == "name") return Task::Name;
  throw Error("unknown task '" + s + "' (expected classify|name)");
}

struct TraceBudget {
  std::size_t max_paths = 6;  // U_max
  std::size_t n_eps = 5;
  std::size_t attempt_cap = 400;
  std::size_t step_limit = minilang::kDefaultStepLimit;

  nlohmann::json to_json() const {
    return {{"max_paths", max_paths}, {"n_eps", n_eps}, {"attempt_cap", attempt_cap},
            {"step_limit", step_limit}};
  }
  static TraceBudget from_json(const nlohmann::json& j) {
    TraceBudget b;
    b.max_paths = j.at("max_paths");
    b.n_eps = j.at("n_eps");
    b.attempt_cap = j.at("attempt_cap");
    b.step_limit = j.value("step_limit", minilang::kDefaultStepLimit);
    return b;
  }
};

inline const std::vector<std::string>& default_class_labels() {
  static const std::vector<std::string> kLabels = {"sort_ascending", "sort_descending", "count_positive",
                                                   "count_negative", "find_max", "find_min"};
  return kLabels;
}

inline const std::vector<std::string>& default_name_pool() {
  static const std::vector<std::string> kNames = {
      "sort_array_ascending", "sort_array_descending", "reverse_array",       "compute_prefix_sum",
      "find_max_value",       "find_min_value",        "sum_array_elements",  "count_positive_numbers",
      "count_even_numbers",   "find_max_index",        "sum_two_numbers",     "find_max_diff"};
  return kNames;
}

struct CorpusSpec {
  Task task = Task::Classify;
  std::vector<std::string> labels;  // classes, or the name pool
  std::size_t variants_per_label = 200;
  std::uint64_t seed = 1;
  minilang::InputSpec inputs{-20, 20, 1, 4};
  TraceBudget budget;

  static CorpusSpec classification(std::uint64_t seed, std::size_t variants = 200) {
    CorpusSpec s;
    s.task = Task::Classify;
    s.labels = default_class_labels();
    s.variants_per_label = variants;
    s.seed = seed;
    return s;
  }
  static CorpusSpec naming(std::uint64_t seed, std::size_t variants = 50) {
    CorpusSpec s;
    s.task = Task::Name;
    s.labels = default_name_pool();
    s.variants_per_label = variants;
    s.seed = seed;
    return s;
  }

  void validate() const;

  nlohmann::json to_json() const {
    return {{"task", task_name(task)},
            {"labels", labels},
            {"variants_per_label", variants_per_label},
            {"seed", seed},
            {"inputs",
             {{"int_min", inputs.int_min},
              {"int_max", inputs.int_max},
              {"array_min_length", inputs.array_min_length},
              {"array_max_length", inputs.array_max_length}}},
            {"budget", budget.to_json()}};
  }
  static CorpusSpec from_json(const nlohmann::json& j) {
    CorpusSpec s;
    s.task = parse_task(j.at("task"));
    s.labels = j.at("labels").get<std::vector<std::string>>();
    s.variants_per_label = j.at("variants_per_label");
    s.seed = j.at("seed");
    const auto& in = j.at("inputs");
    s.inputs.int_min = in.at("int_min");
    s.inputs.int_max = in.at("int_max");
    s.inputs.array_min_length = in.at("array_min_length");
    s.inputs.array_max_length = in.at("array_max_length");
    s.budget = TraceBudget::from_json(j.at("budget"));
    return s;
  }
  std::uint64_t hash() const { return hash_string(to_json().dump()); }
};

enum class Split { Train, Valid, Test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw Error("unknown split '" + s + "'");
}

struct ManifestEntry {
  std::string program_id;
  std::string source_path;  // relative to the corpus directory
  std::string label;        // class label or gold method name
  Split split = Split::Train;
  std::uint64_t seed = 0;   // per-program input seed
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  CorpusSpec spec;
  std::vector<ManifestEntry> entries;
  std::uint64_t config_hash = 0;

  std::size_t label_index(const std::string& label) const {
    auto it = std::find(spec.labels.begin(), spec.labels.end(), label);
    if (it == spec.labels.end()) throw Error("label '" + label + "' not in manifest label set");
    return static_cast<std::size_t>(it - spec.labels.begin());
  }
  std::vector<ManifestEntry> split(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : entries)
      arr.push_back({{"program_id", e.program_id},
                     {"source", e.source_path},
                     {"label", e.label},
                     {"split", split_name(e.split)},
                     {"seed", e.seed}});
    return {{"spec", spec.to_json()}, {"config_hash", hex64(config_hash)}, {"entries", arr}};
  }
  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.spec = CorpusSpec::from_json(j.at("spec"));
    m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    std::set<std::string> ids;
    for (const auto& e : j.at("entries")) {
      ManifestEntry me{e.at("program_id"), e.at("source"), e.at("label"), parse_split(e.at("split")),
                       e.at("seed")};
      if (!ids.insert(me.program_id).second) throw Error("duplicate program id '" + me.program_id + "'");
      m.entries.push_back(std::move(me));
    }
    return m;
  }
};

/// A manifest together with the program sources it names.
struct Corpus {
  DatasetManifest manifest;
  std::map<std::string, std::string> sources;  // program_id -> source text

  const std::string& source(const std::string& id) const {
    auto it = sources.find(id);
    if (it == sources.end()) throw Error("no source for program '" + id + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Reference semantics: the observable outcome of a program is its return
// value plus the final contents of its array parameters.

struct Observation {
  std::optional<Value> ret;
  std::vector<Value> arrays;
  bool fault = false;
  friend bool operator==(const Observation&, const Observation&) = default;
};

inline Observation observe(const Program& p, const std::vector<Value>& input) {
  auto t = minilang::execute(p, input);
  Observation o;
  if (!t.ok()) {
    o.fault = true;
    return o;
  }
  if (!t.return_value.is_bottom()) o.ret = t.return_value;
  const auto& fin = t.final_state();
  for (std::size_t i = 0; i < p.params.size(); ++i)
    if (p.params[i].type == minilang::Type::IntArray) o.arrays.push_back(fin.values[i]);
  return o;
}

namespace detail {

using Array = Value::Array;
using Ref = std::function<Observation(const std::vector<Value>&)>;

inline Observation returns(std::int64_t v, const std::vector<Value>& in) {
  Observation o;
  o.ret = Value::integer(v);
  for (const auto& x : in)
    if (x.is_array()) o.arrays.push_back(x);
  return o;
}
inline Observation mutates(Array a) {
  Observation o;
  o.arrays.push_back(Value::array(std::move(a)));
  return o;
}

struct Family {
  std::vector<minilang::Param> params;
  Ref reference;
};

inline std::int64_t count_if(const Array& a, const std::function<bool(std::int64_t)>& f) {
  return static_cast<std::int64_t>(std::count_if(a.begin(), a.end(), f));
}

/// Reference behaviour of every program family.
inline const std::map<std::string, Ref>& references() {
  static const std::map<std::string, Ref> kRefs = {
      {"sort_asc", [](const std::vector<Value>& in) { auto a = in[0].as_array(); std::sort(a.begin(), a.end()); return mutates(a); }},
      {"sort_desc", [](const std::vector<Value>& in) { auto a = in[0].as_array(); std::sort(a.rbegin(), a.rend()); return mutates(a); }},
      {"reverse", [](const std::vector<Value>& in) { auto a = in[0].as_array(); std::reverse(a.begin(), a.end()); return mutates(a); }},
      {"prefix_sum", [](const std::vector<Value>& in) {
         auto a = in[0].as_array();
         for (std::size_t i = 1; i < a.size(); ++i) a[i] += a[i - 1];
         return mutates(a);
       }},
      {"count_positive", [](const std::vector<Value>& in) { return returns(count_if(in[0].as_array(), [](auto x) { return x > 0; }), in); }},
      {"count_negative", [](const std::vector<Value>& in) { return returns(count_if(in[0].as_array(), [](auto x) { return x < 0; }), in); }},
      {"count_even", [](const std::vector<Value>& in) { return returns(count_if(in[0].as_array(), [](auto x) { return x % 2 == 0; }), in); }},
      {"find_max", [](const std::vector<Value>& in) { const auto& a = in[0].as_array(); return returns(*std::max_element(a.begin(), a.end()), in); }},
      {"find_min", [](const std::vector<Value>& in) { const auto& a = in[0].as_array(); return returns(*std::min_element(a.begin(), a.end()), in); }},
      {"find_max_index", [](const std::vector<Value>& in) { const auto& a = in[0].as_array(); return returns(std::max_element(a.begin(), a.end()) - a.begin(), in); }},
      {"max_diff", [](const std::vector<Value>& in) {
         const auto& a = in[0].as_array();
         return returns(*std::max_element(a.begin(), a.end()) - *std::min_element(a.begin(), a.end()), in);
       }},
      {"sum_elems", [](const std::vector<Value>& in) {
         std::int64_t s = 0;
         for (auto x : in[0].as_array()) s += x;
         return returns(s, in);
       }},
      {"sum_two", [](const std::vector<Value>& in) { return returns(in[0].as_int() + in[1].as_int(), in); }},
  };
  return kRefs;
}

inline const std::map<std::string, std::string>& label_families() {
  static const std::map<std::string, std::string> kMap = {
      {"sort_ascending", "sort_asc"},         {"sort_descending", "sort_desc"},
      {"count_positive", "count_positive"},   {"count_negative", "count_negative"},
      {"find_max", "find_max"},               {"find_min", "find_min"},
      {"sort_array_ascending", "sort_asc"},   {"sort_array_descending", "sort_desc"},
      {"reverse_array", "reverse"},           {"compute_prefix_sum", "prefix_sum"},
      {"find_max_value", "find_max"},         {"find_min_value", "find_min"},
      {"sum_array_elements", "sum_elems"},    {"count_positive_numbers", "count_positive"},
      {"count_even_numbers", "count_even"},   {"find_max_index", "find_max_index"},
      {"sum_two_numbers", "sum_two"},         {"find_max_diff", "max_diff"},
  };
  return kMap;
}

inline const std::string& family_of(const std::string& label) {
  auto it = label_families().find(label);
  if (it == label_families().end()) throw Error("no program template for label '" + label + "'");
  return it->second;
}

// Source builder with randomized surface style.
class Writer {
 public:
  explicit Writer(Rng& rng) : rng_(rng) {
    static const std::vector<std::string> kPool = {
        "i", "j", "k", "m", "n", "p", "q", "r", "s", "t", "u", "v", "w", "x", "y", "z",
        "idx", "pos", "cur", "acc", "best", "tmp", "lo", "hi", "cnt", "res", "val", "key",
        "total", "left", "right", "step", "top", "mark", "last", "first", "aux"};
    pool_ = kPool;
    shuffle_in_place(pool_, rng_);
  }

  Rng& rng() { return rng_; }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  template <typename T>
  const T& choose(const std::vector<T>& v) { return v[pick(v.size())]; }

  std::string fresh() {
    if (next_ >= pool_.size()) throw Error("variable name pool exhausted");
    return pool_[next_++];
  }
  std::string array_name() {
    static const std::vector<std::string> kArrays = {"a", "arr", "xs", "data", "vals", "nums", "items", "seq"};
    return choose(kArrays);
  }

  void line(const std::string& s) { out_ += std::string(2 * (depth_ + 1), ' ') + s + "\n"; }
  void open(const std::string& s) {
    line(s + " {");
    ++depth_;
  }
  void close() {
    --depth_;
    line("}");
  }

  /// Counting loop over [lo, hi) as either `for` or `while`.
  void loop(const std::string& var, const std::string& lo, const std::string& hi) {
    bool as_while = coin(0.4);
    loops_.push_back(as_while ? var : "");
    if (!as_while) {
      open("for " + var + " in " + lo + ".." + hi);
      return;
    }
    line(var + ": int = " + lo + ";");
    open("while (" + var + " < " + hi + ")");
  }
  void end_loop() {
    std::string var = loops_.back();
    loops_.pop_back();
    if (!var.empty()) line(coin() ? var + " += 1;" : var + " = " + var + " + 1;");
    close();
  }

  /// An unused, fault-free declaration.
  void dead_code(const std::string& arr) {
    std::string d = fresh();
    switch (pick(4)) {
      case 0: line(d + ": int = " + std::to_string(pick(9)) + ";"); break;
      case 1: line(d + ": int = len(" + arr + ") * " + std::to_string(pick(4) + 2) + ";"); break;
      case 2: line(d + ": bool = " + (coin() ? "true" : "false") + ";"); break;
      default: line(d + ": int = " + std::to_string(pick(5) + 1) + " + " + std::to_string(pick(5)) + ";"); break;
    }
  }
  void maybe_dead(const std::string& arr, double p = 0.3) {
    if (arr.empty()) return;
    if (coin(p)) dead_code(arr);
  }

  /// Writes independent statements in random order.
  void shuffled(std::vector<std::string> lines) {
    shuffle_in_place(lines, rng_);
    for (const auto& l : lines) line(l);
  }

  void swap_cells(const std::string& arr, const std::string& i, const std::string& j) {
    if (coin(0.6)) {
      line("swap(" + arr + ", " + i + ", " + j + ");");
      return;
    }
    std::string t = fresh();
    line(t + ": int = " + arr + "[" + i + "];");
    line(arr + "[" + i + "] = " + arr + "[" + j + "];");
    line(arr + "[" + j + "] = " + t + ";");
  }

  std::string finish(const std::vector<minilang::Param>& params) {
    std::string head = "fn f(";
    for (std::size_t i = 0; i < params.size(); ++i)
      head += (i ? ", " : "") + params[i].name + ": " + minilang::type_name(params[i].type);
    return head + ") {\n" + out_ + "}\n";
  }

 private:
  Rng& rng_;
  std::vector<std::string> pool_;
  std::size_t next_ = 0;
  std::string out_;
  int depth_ = 0;
  std::vector<std::string> loops_;
};

// "a > b" spelled in one of several equivalent ways.
inline std::string greater(Writer& w, const std::string& a, const std::string& b) {
  switch (w.pick(3)) {
    case 0: return a + " > " + b;
    case 1: return b + " < " + a;
    default: return "!(" + a + " <= " + b + ")";
  }
}
inline std::string greater_eq(Writer& w, const std::string& a, const std::string& b) {
  switch (w.pick(3)) {
    case 0: return a + " >= " + b;
    case 1: return b + " <= " + a;
    default: return "!(" + a + " < " + b + ")";
  }
}

inline std::string length_of(Writer& w, const std::string& arr, std::vector<std::string>& prologue) {
  if (w.coin(0.5)) return "len(" + arr + ")";
  std::string n = w.fresh();
  prologue.push_back(n + ": int = len(" + arr + ");");
  return n;
}

inline void increment(Writer& w, const std::string& c) { w.line(w.coin() ? c + " += 1;" : c + " = " + c + " + 1;"); }

// Sorting: bubble, selection or insertion; `desc` flips the order.
inline std::vector<minilang::Param> gen_sort(Writer& w, bool desc) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string I = w.fresh(), J = w.fresh();
  w.shuffled(pro);
  w.maybe_dead(A);
  auto out_of_order = [&](const std::string& x, const std::string& y) {
    return desc ? greater(w, y, x) : greater(w, x, y);
  };
  switch (w.pick(3)) {
    case 0: {  // bubble
      w.loop(I, "0", N);
      w.maybe_dead(A, 0.15);
      w.loop(J, "0", w.coin() ? N + " - " + I + " - 1" : N + " - 1");
      w.open("if (" + out_of_order(A + "[" + J + "]", A + "[" + J + " + 1]") + ")");
      w.swap_cells(A, J, J + " + 1");
      w.close();
      w.end_loop();
      w.end_loop();
      break;
    }
    case 1: {  // selection
      std::string M = w.fresh();
      w.loop(I, "0", N);
      w.line(M + ": int = " + I + ";");
      w.loop(J, I + " + 1", N);
      w.open("if (" + out_of_order(A + "[" + M + "]", A + "[" + J + "]") + ")");
      w.line(M + " = " + J + ";");
      w.close();
      w.end_loop();
      w.swap_cells(A, I, M);
      w.end_loop();
      break;
    }
    default: {  // insertion
      w.loop(I, "1", N);
      w.line(J + ": int = " + I + ";");
      w.open("while (" + J + " > 0 && " + out_of_order(A + "[" + J + " - 1]", A + "[" + J + "]") + ")");
      w.swap_cells(A, J + " - 1", J);
      w.line(w.coin() ? J + " -= 1;" : J + " = " + J + " - 1;");
      w.close();
      w.end_loop();
      break;
    }
  }
  w.maybe_dead(A);
  return {{A, minilang::Type::IntArray}};
}

// Counting elements that satisfy a predicate on x.
inline std::vector<minilang::Param> gen_count(Writer& w, const std::string& which) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string C = w.fresh(), I = w.fresh();
  bool down = which != "count_even" && w.coin(0.3);  // start from len and subtract misses
  pro.push_back(C + ": int = " + (down ? "len(" + A + ")" : "0") + ";");
  w.shuffled(pro);
  w.maybe_dead(A);
  w.loop(I, "0", N);
  std::string x = A + "[" + I + "]";
  if (w.coin(0.3)) {
    std::string X = w.fresh();
    w.line(X + ": int = " + x + ";");
    x = X;
  }
  std::string cond;
  if (which == "count_even") {
    cond = w.coin() ? x + " % 2 == 0" : "0 == " + x + " % 2";
  } else if (which == "count_positive") {
    cond = down ? greater_eq(w, "0", x) : greater(w, x, "0");
  } else {
    cond = down ? greater_eq(w, x, "0") : greater(w, "0", x);
  }
  w.open("if (" + cond + ")");
  w.line(down ? C + " -= 1;" : (w.coin() ? C + " += 1;" : C + " = " + C + " + 1;"));
  w.close();
  w.end_loop();
  w.maybe_dead(A);
  w.line("return " + C + ";");
  return {{A, minilang::Type::IntArray}};
}

// Running extremum; `index` returns the position instead of the value.
inline std::vector<minilang::Param> gen_extreme(Writer& w, bool max, bool index) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string I = w.fresh();
  bool by_index = index || w.coin(0.3);
  std::string P = w.fresh();
  std::string M = by_index ? "" : w.fresh();
  pro.push_back(by_index ? P + ": int = 0;" : M + ": int = " + A + "[0];");
  w.shuffled(pro);
  w.maybe_dead(A);
  w.loop(I, w.coin(0.7) ? "1" : "0", N);
  std::string cur = by_index ? A + "[" + P + "]" : M;
  std::string x = A + "[" + I + "]";
  w.open("if (" + (max ? greater(w, x, cur) : greater(w, cur, x)) + ")");
  w.line(by_index ? P + " = " + I + ";" : M + " = " + x + ";");
  w.close();
  w.end_loop();
  w.maybe_dead(A);
  if (index) w.line("return " + P + ";");
  else w.line("return " + (by_index ? A + "[" + P + "]" : M) + ";");
  return {{A, minilang::Type::IntArray}};
}

inline std::vector<minilang::Param> gen_max_diff(Writer& w) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string I = w.fresh(), H = w.fresh(), L = w.fresh();
  pro.push_back(H + ": int = " + A + "[0];");
  pro.push_back(L + ": int = " + A + "[0];");
  w.shuffled(pro);
  w.maybe_dead(A);
  std::string x = A + "[" + I + "]";
  if (w.coin()) {
    w.loop(I, "1", N);
    w.open("if (" + greater(w, x, H) + ")");
    w.line(H + " = " + x + ";");
    w.close();
    w.open("if (" + greater(w, L, x) + ")");
    w.line(L + " = " + x + ";");
    w.close();
    w.end_loop();
  } else {
    std::string K = w.fresh();
    std::string y = A + "[" + K + "]";
    w.loop(I, "1", N);
    w.open("if (" + greater(w, x, H) + ")");
    w.line(H + " = " + x + ";");
    w.close();
    w.end_loop();
    w.loop(K, "1", N);
    w.open("if (" + greater(w, L, y) + ")");
    w.line(L + " = " + y + ";");
    w.close();
    w.end_loop();
  }
  w.maybe_dead(A);
  if (w.coin()) {
    w.line("return " + H + " - " + L + ";");
  } else {
    std::string D = w.fresh();
    w.line(D + ": int = " + H + " - " + L + ";");
    w.line("return " + D + ";");
  }
  return {{A, minilang::Type::IntArray}};
}

inline std::vector<minilang::Param> gen_reverse(Writer& w) {
  std::string A = w.array_name();
  w.maybe_dead(A);
  if (w.coin()) {
    std::string I = w.fresh();
    std::vector<std::string> pro;
    std::string N = length_of(w, A, pro);
    w.shuffled(pro);
    w.loop(I, "0", N + " / 2");
    w.swap_cells(A, I, N + " - 1 - " + I);
    w.end_loop();
  } else {
    std::string L = w.fresh(), R = w.fresh();
    w.shuffled({L + ": int = 0;", R + ": int = len(" + A + ") - 1;"});
    w.open("while (" + L + " < " + R + ")");
    w.swap_cells(A, L, R);
    increment(w, L);
    w.line(w.coin() ? R + " -= 1;" : R + " = " + R + " - 1;");
    w.close();
  }
  w.maybe_dead(A);
  return {{A, minilang::Type::IntArray}};
}

inline std::vector<minilang::Param> gen_prefix_sum(Writer& w) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string I = w.fresh();
  w.shuffled(pro);
  w.maybe_dead(A);
  if (w.coin()) {
    w.loop(I, "1", N);
    std::string prev = A + "[" + I + " - 1]";
    w.line(w.coin() ? A + "[" + I + "] += " + prev + ";" : A + "[" + I + "] = " + A + "[" + I + "] + " + prev + ";");
    w.end_loop();
  } else {
    std::string S = w.fresh();
    w.line(S + ": int = 0;");
    w.loop(I, "0", N);
    w.line(S + " += " + A + "[" + I + "];");
    w.line(A + "[" + I + "] = " + S + ";");
    w.end_loop();
  }
  w.maybe_dead(A);
  return {{A, minilang::Type::IntArray}};
}

inline std::vector<minilang::Param> gen_sum_elems(Writer& w) {
  std::string A = w.array_name();
  std::vector<std::string> pro;
  std::string N = length_of(w, A, pro);
  std::string S = w.fresh(), I = w.fresh();
  pro.push_back(S + ": int = 0;");
  w.shuffled(pro);
  w.maybe_dead(A);
  w.loop(I, "0", N);
  std::string x = A + "[" + I + "]";
  w.line(w.coin() ? S + " += " + x + ";" : S + " = " + S + " + " + x + ";");
  w.end_loop();
  w.maybe_dead(A);
  w.line("return " + S + ";");
  return {{A, minilang::Type::IntArray}};
}

inline std::vector<minilang::Param> gen_sum_two(Writer& w) {
  std::string X = w.fresh(), Y = w.fresh();
  std::string a = X, b = Y;
  if (w.coin()) std::swap(a, b);
  switch (w.pick(3)) {
    case 0: w.line("return " + a + " + " + b + ";"); break;
    case 1: {
      std::string S = w.fresh();
      w.line(S + ": int = " + a + " + " + b + ";");
      if (w.coin()) w.line(w.fresh() + ": int = " + std::to_string(w.pick(9)) + ";");
      w.line("return " + S + ";");
      break;
    }
    default: {
      std::string S = w.fresh();
      w.line(S + ": int = " + a + ";");
      w.line(S + " += " + b + ";");
      w.line("return " + S + ";");
      break;
    }
  }
  return {{X, minilang::Type::Int}, {Y, minilang::Type::Int}};
}

/// One random source-text variant of `family`.
inline std::string generate_variant(const std::string& family, Rng& rng) {
  Writer w(rng);
  std::vector<minilang::Param> params;
  if (family == "sort_asc") params = gen_sort(w, false);
  else if (family == "sort_desc") params = gen_sort(w, true);
  else if (family == "count_positive" || family == "count_negative" || family == "count_even") params = gen_count(w, family);
  else if (family == "find_max") params = gen_extreme(w, true, false);
  else if (family == "find_min") params = gen_extreme(w, false, false);
  else if (family == "find_max_index") params = gen_extreme(w, true, true);
  else if (family == "max_diff") params = gen_max_diff(w);
  else if (family == "reverse") params = gen_reverse(w);
  else if (family == "prefix_sum") params = gen_prefix_sum(w);
  else if (family == "sum_elems") params = gen_sum_elems(w);
  else if (family == "sum_two") params = gen_sum_two(w);
  else throw Error("unknown program family '" + family + "'");
  return w.finish(params);
}

/// Fixed probe inputs shared by every program with the given parameter list.
inline std::vector<std::vector<Value>> probe_inputs(const std::vector<minilang::Param>& params,
                                                    const minilang::InputSpec& spec, std::uint64_t seed) {
  std::vector<std::vector<Value>> out;
  bool array_fn = params.size() == 1 && params[0].type == minilang::Type::IntArray;
  if (array_fn) {
    for (Array a : std::vector<Array>{{8, 5, 1, 4, 3}, {0}, {3, 0, -2}, {-1, 0, 2, 0}, {2, 7}, {7, 2}, {-4, -3, 5, 1}, {5, 5, 1}})
      out.push_back({Value::array(std::move(a))});
  }
  Program shape;
  shape.params = params;
  auto extra = minilang::random_inputs(shape, 24, seed, spec);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

}  // namespace detail

/// Checks that every pair of labels differs on at least one shared probe
/// input. Throws naming the first indistinguishable pair.
inline void check_class_separation(const std::vector<std::string>& labels, const minilang::InputSpec& spec) {
  const auto& refs = detail::references();
  for (std::size_t a = 0; a < labels.size(); ++a)
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      const auto& fa = detail::family_of(labels[a]);
      const auto& fb = detail::family_of(labels[b]);
      Rng ra(1), rb(1);
      Program pa = minilang::parse(detail::generate_variant(fa, ra));
      Program pb = minilang::parse(detail::generate_variant(fb, rb));
      bool same_shape = pa.params.size() == pb.params.size();
      for (std::size_t i = 0; same_shape && i < pa.params.size(); ++i)
        same_shape = pa.params[i].type == pb.params[i].type;
      if (!same_shape) continue;  // no shared input
      bool differ = false;
      for (const auto& in : detail::probe_inputs(pa.params, spec, 17))
        if (!(refs.at(fa)(in) == refs.at(fb)(in))) {
          differ = true;
          break;
        }
      if (!differ) throw Error("labels '" + labels[a] + "' and '" + labels[b] + "' are not separable");
    }
}

/// True if `p` matches the reference behaviour of `label` on the probe inputs.
inline bool matches_reference(const Program& p, const std::string& label, const minilang::InputSpec& spec,
                              std::uint64_t seed) {
  const auto& ref = detail::references().at(detail::family_of(label));
  for (const auto& in : detail::probe_inputs(p.params, spec, seed))
    if (!(observe(p, in) == ref(in))) return false;
  return true;
}

inline void CorpusSpec::validate() const {
  if (task == Task::Classify && labels.size() < 2) throw Error("corpus spec: classification needs at least 2 labels");
  if (labels.empty()) throw Error("corpus spec: empty name pool");
  if (variants_per_label < 1) throw Error("corpus spec: variants_per_label must be at least 1");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
    throw Error("corpus spec: duplicate labels");
  for (const auto& l : labels) detail::family_of(l);
  if (inputs.int_min > inputs.int_max || inputs.array_min_length < 1 ||
      inputs.array_min_length > inputs.array_max_length ||
      inputs.array_max_length > minilang::kDefaultMaxArrayLength)
    throw Error("corpus spec: invalid input distribution");
  if (budget.max_paths == 0 || budget.n_eps == 0 || budget.attempt_cap == 0 || budget.step_limit == 0)
    throw Error("corpus spec: trace budget entries must be positive");
}

/// Sizes of the valid and test portions of `n` items (floor of 20% each).
inline std::pair<std::size_t, std::size_t> split_sizes(std::size_t n) { return {n / 5, n / 5}; }

/// Generates the corpus described by `spec`: variants per label by template
/// instantiation, each checked against its reference behaviour, with
/// stratified 60/20/20 splits. Deterministic per seed.
inline Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  if (spec.task == Task::Classify) check_class_separation(spec.labels, spec.inputs);
  Corpus c;
  c.manifest.spec = spec;
  c.manifest.config_hash = spec.hash();
  std::set<std::string> seen;
  for (std::size_t li = 0; li < spec.labels.size(); ++li) {
    const auto& label = spec.labels[li];
    const auto& family = detail::family_of(label);
    Rng rng = make_rng(spec.seed, "corpus", li);
    std::vector<std::string> variants;
    std::size_t attempts = 0;
    while (variants.size() < spec.variants_per_label) {
      if (++attempts > 200 * spec.variants_per_label + 1000)
        throw Error("could not generate " + std::to_string(spec.variants_per_label) + " distinct variants of '" + label + "'");
      std::string src = detail::generate_variant(family, rng);
      if (!seen.insert(src).second) continue;
      Program p = minilang::parse(src);
      if (!matches_reference(p, label, spec.inputs, substream_seed(spec.seed, "probe", li)))
        throw Error("generated variant of '" + label + "' does not match its reference:\n" + src);
      variants.push_back(std::move(src));
    }
    std::vector<std::size_t> order(variants.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = make_rng(spec.seed, "split", li);
    shuffle_in_place(order, split_rng);
    auto [n_valid, n_test] = split_sizes(variants.size());
    std::vector<Split> split_of(variants.size(), Split::Train);
    for (std::size_t k = 0; k < n_valid; ++k) split_of[order[k]] = Split::Valid;
    for (std::size_t k = n_valid; k < n_valid + n_test; ++k) split_of[order[k]] = Split::Test;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      std::string num = std::to_string(v);
      std::string id = label + "_" + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
      ManifestEntry e{id, "sources/" + id + ".ml", label, split_of[v],
                      substream_seed(spec.seed, "inputs", li * 100000 + v)};
      c.manifest.entries.push_back(e);
      c.sources[id] = std::move(variants[v]);
    }
  }
  return c;
}

inline Corpus gen_classification_corpus(CorpusSpec spec) {
  spec.task = Task::Classify;
  return generate_corpus(spec);
}

inline Corpus gen_naming_corpus(CorpusSpec spec) {
  spec.task = Task::Name;
  return generate_corpus(spec);
}

// ---------------------------------------------------------------------------
// Corpus files

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline void save_corpus(const Corpus& c, const std::filesystem::path& dir) {
  for (const auto& e : c.manifest.entries) write_file(dir / e.source_path, c.source(e.program_id));
  write_file(dir / "manifest.json", c.manifest.to_json().dump(2) + "\n");
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& ex) {
    throw Error("unparseable manifest in '" + dir.string() + "': " + ex.what());
  }
  c.manifest = DatasetManifest::from_json(j);
  for (const auto& e : c.manifest.entries) c.sources[e.program_id] = read_file(dir / e.source_path);
  return c;
}

// ---------------------------------------------------------------------------
// Tracing

struct TraceOutcome {
  std::optional<traces::ProgramTraces> traces;  // empty when dropped
  std::string drop_reason;
};

/// Runs `p` on random inputs until min(U_max, discovered) paths each have
/// n_eps concrete runs, or the attempt cap is hit. Any failing run drops the
/// program.
inline TraceOutcome trace_program(const std::string& id, const Program& p, const TraceBudget& budget,
                                  const minilang::InputSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<minilang::ExecutionTrace> runs;
  std::map<std::vector<minilang::StatementId>, std::size_t> counts;
  std::vector<std::vector<minilang::StatementId>> discovery;
  std::size_t complete = 0;
  std::size_t attempts = 0;
  while (attempts < budget.attempt_cap) {
    ++attempts;
    auto t = minilang::execute(p, minilang::random_input(p, rng, spec), {budget.step_limit});
    if (!t.ok()) {
      TraceOutcome o;
      o.drop_reason = t.status == minilang::TraceStatus::StepLimitExceeded ? "step limit exceeded" : "runtime error: " + t.error;
      return o;
    }
    if (t.steps.empty()) return {std::nullopt, "program executes no statements"};
    auto seq = traces::statement_sequence(t);
    auto [it, fresh] = counts.try_emplace(seq, 0);
    if (fresh) discovery.push_back(seq);
    if (++it->second == budget.n_eps) ++complete;
    runs.push_back(std::move(t));
    if (complete >= std::min(budget.max_paths, discovery.size())) break;
  }
  traces::ProgramTraces pt;
  pt.program_id = id;
  pt.executions = attempts;
  auto groups = traces::group_by_path(runs);
  for (const auto& g : groups) {
    if (g.traces.size() < budget.n_eps) continue;
    if (pt.paths.size() == budget.max_paths) break;
    traces::PathRecord rec;
    rec.blended = traces::build_blended(g.symbolic, g.traces, budget.n_eps);
    for (std::size_t c = 0; c < budget.n_eps; ++c)
      rec.coverage.insert(g.traces[c].covered_branches.begin(), g.traces[c].covered_branches.end());
    pt.paths.push_back(std::move(rec));
  }
  if (pt.paths.empty()) return {std::nullopt, "no path reached " + std::to_string(budget.n_eps) + " concrete runs"};
  return {std::move(pt), ""};
}

struct DroppedProgram {
  std::string program_id;
  std::string reason;
};

struct TraceStore {
  std::vector<traces::ProgramTraces> programs;  // manifest order
  std::vector<DroppedProgram> dropped;

  const traces::ProgramTraces* find(const std::string& id) const {
    for (const auto& p : programs)
      if (p.program_id == id) return &p;
    return nullptr;
  }
  std::size_t executions() const {
    std::size_t n = 0;
    for (const auto& p : programs) n += p.executions;
    return n;
  }
};

/// Traces every manifest program in parallel; per-program input seeds come
/// from the manifest mixed with `seed`.
inline TraceStore trace_corpus(const Corpus& corpus, const TraceBudget& budget, std::uint64_t seed,
                               int threads = worker_threads()) {
  const auto& entries = corpus.manifest.entries;
  std::vector<TraceOutcome> outcomes(entries.size());
  num::parallel_for(entries.size(), threads, [&](std::size_t i, std::size_t) {
    const auto& e = entries[i];
    Program p = minilang::parse(corpus.source(e.program_id));
    outcomes[i] = trace_program(e.program_id, p, budget, corpus.manifest.spec.inputs,
                                substream_seed(seed, "inputs", e.seed));
  });
  TraceStore store;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (outcomes[i].traces) store.programs.push_back(std::move(*outcomes[i].traces));
    else store.dropped.push_back({entries[i].program_id, outcomes[i].drop_reason});
  }
  return store;
}

inline std::string store_to_jsonl(const TraceStore& s) {
  std::string out;
  for (const auto& p : s.programs) out += traces::program_traces_to_json(p).dump() + "\n";
  return out;
}

inline TraceStore store_from_jsonl(const std::string& text) {
  TraceStore s;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      s.programs.push_back(traces::program_traces_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error("trace store line " + std::to_string(n) + ": " + ex.what());
    }
  }
  return s;
}

inline void save_store(const TraceStore& s, const std::filesystem::path& path) { write_file(path, store_to_jsonl(s)); }
inline TraceStore load_store(const std::filesystem::path& path) { return store_from_jsonl(read_file(path)); }

// ---------------------------------------------------------------------------
// Reduction

struct ReductionStats {
  std::size_t executions_before = 0;
  std::size_t executions_after = 0;
  std::size_t paths_before = 0;
  std::size_t paths_after = 0;
  bool coverage_preserved = true;
};

/// Keeps `keep` concrete runs per path (0 keeps all) and, with `min_set`,
/// only a greedy coverage-minimal set of paths. The executions count of a
/// reduced program is the number of runs it retains.
inline TraceStore reduce_store(const TraceStore& in, std::size_t keep, bool min_set, std::uint64_t seed,
                               ReductionStats* stats = nullptr) {
  TraceStore out;
  out.dropped = in.dropped;
  ReductionStats st;
  for (std::size_t pi = 0; pi < in.programs.size(); ++pi) {
    const auto& prog = in.programs[pi];
    traces::ProgramTraces r;
    r.program_id = prog.program_id;
    std::vector<std::size_t> chosen(prog.paths.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    if (min_set) {
      std::vector<minilang::Coverage> cov;
      for (const auto& p : prog.paths) cov.push_back(p.coverage);
      chosen = traces::select_min_coverage_indices(cov);
      std::sort(chosen.begin(), chosen.end());
    }
    for (auto c : chosen) {
      traces::PathRecord rec = prog.paths[c];
      std::size_t k = keep == 0 ? rec.blended.concrete_count : std::min(keep, rec.blended.concrete_count);
      rec.blended = traces::downsample_concretes(rec.blended, k, substream_seed(seed, "reduce", hash_string(prog.program_id) ^ c));
      r.paths.push_back(std::move(rec));
    }
    r.executions = r.concretes_used();
    r.coverage_preserved = prog.coverage_preserved && r.coverage() == prog.coverage();
    st.executions_before += prog.executions;
    st.executions_after += r.executions;
    st.paths_before += prog.paths.size();
    st.paths_after += r.paths.size();
    st.coverage_preserved = st.coverage_preserved && r.coverage_preserved;
    out.programs.push_back(std::move(r));
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace ligerlab::data

#endif  // LIGERLAB_DATASETS_HPP
