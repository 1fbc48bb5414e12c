#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "ligerlab/datasets.hpp"
#include "ligerlab/seqdec.hpp"

using namespace ligerlab;
using namespace ligerlab::data;
using minilang::Value;

namespace {

using Array = Value::Array;

// Expected return value (if any) and final array for each family.
std::pair<std::optional<std::int64_t>, std::optional<Array>> oracle(const std::string& label, const std::vector<Value>& in) {
  auto count = [&](auto pred) {
    std::int64_t n = 0;
    for (auto x : in[0].as_array()) n += pred(x) ? 1 : 0;
    return n;
  };
  if (label == "sum_two_numbers") return {in[0].as_int() + in[1].as_int(), std::nullopt};
  Array a = in[0].as_array();
  if (label == "sort_ascending" || label == "sort_array_ascending") {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j)
        if (a[j] < a[i]) std::swap(a[i], a[j]);
    return {std::nullopt, a};
  }
  if (label == "sort_descending" || label == "sort_array_descending") {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j)
        if (a[j] > a[i]) std::swap(a[i], a[j]);
    return {std::nullopt, a};
  }
  if (label == "reverse_array") return {std::nullopt, Array(a.rbegin(), a.rend())};
  if (label == "compute_prefix_sum") {
    std::int64_t s = 0;
    for (auto& x : a) x = s += x;
    return {std::nullopt, a};
  }
  std::int64_t best = a[0], worst = a[0], best_i = 0, sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > best) best = a[i], best_i = static_cast<std::int64_t>(i);
    worst = std::min(worst, a[i]);
    sum += a[i];
  }
  std::optional<std::int64_t> r;
  if (label == "count_positive" || label == "count_positive_numbers") r = count([](auto x) { return x > 0; });
  else if (label == "count_negative") r = count([](auto x) { return x < 0; });
  else if (label == "count_even_numbers") r = count([](auto x) { return x % 2 == 0; });
  else if (label == "find_max" || label == "find_max_value") r = best;
  else if (label == "find_min" || label == "find_min_value") r = worst;
  else if (label == "find_max_index") r = best_i;
  else if (label == "find_max_diff") r = best - worst;
  else if (label == "sum_array_elements") r = sum;
  else ADD_FAILURE() << "no oracle for " << label;
  return {r, a};
}

void check_against_oracle(const Corpus& c, std::size_t inputs_per_program) {
  for (const auto& e : c.manifest.entries) {
    auto p = minilang::parse(c.source(e.program_id));
    for (const auto& in : minilang::random_inputs(p, inputs_per_program, e.seed, c.manifest.spec.inputs)) {
      auto t = minilang::execute(p, in);
      ASSERT_TRUE(t.ok()) << e.program_id;
      auto [ret, arr] = oracle(e.label, in);
      if (ret) {
        EXPECT_EQ(t.return_value, Value::integer(*ret)) << e.program_id << "\n" << c.source(e.program_id);
      }
      if (arr) {
        EXPECT_EQ(t.final_state().values[0], Value::array(*arr)) << e.program_id << "\n" << c.source(e.program_id);
      }
    }
  }
}

const Corpus& classification() {
  static const Corpus c = gen_classification_corpus(CorpusSpec::classification(3));
  return c;
}

const Corpus& naming() {
  static const Corpus c = gen_naming_corpus(CorpusSpec::naming(3));
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("ligerlab_ds_" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(Corpus, DeterministicPerSeed) {
  auto again = gen_classification_corpus(CorpusSpec::classification(3));
  EXPECT_EQ(again.manifest.to_json().dump(), classification().manifest.to_json().dump());
  EXPECT_EQ(again.sources, classification().sources);
  auto other = gen_classification_corpus(CorpusSpec::classification(4, 20));
  auto small = gen_classification_corpus(CorpusSpec::classification(3, 20));
  EXPECT_NE(other.sources, small.sources);
}

TEST(Corpus, ClassificationShapeAndSplits) {
  const auto& m = classification().manifest;
  EXPECT_EQ(m.entries.size(), 6u * 200u);
  for (const auto& label : default_class_labels()) {
    std::map<Split, std::size_t> n;
    for (const auto& e : m.entries)
      if (e.label == label) ++n[e.split];
    EXPECT_EQ(n[Split::Train], 120u);
    EXPECT_EQ(n[Split::Valid], 40u);
    EXPECT_EQ(n[Split::Test], 40u);
  }
  EXPECT_EQ(split_sizes(7).first, 1u);
  EXPECT_EQ(split_sizes(7).second, 1u);
}

TEST(Corpus, EveryVariantMatchesOracle) {
  check_against_oracle(classification(), 6);
  check_against_oracle(naming(), 6);
}

TEST(Corpus, SortVariantsSortTheWorkedArray) {
  for (const auto& e : classification().manifest.entries) {
    if (e.label != "sort_ascending") continue;
    auto t = minilang::execute(minilang::parse(classification().source(e.program_id)), {Value::array({8, 5, 1, 4, 3})});
    EXPECT_EQ(t.final_state().values[0], Value::array({1, 3, 4, 5, 8}));
  }
}

TEST(Corpus, VariantsDifferInTokensButAgreeOnInputs) {
  const auto& c = classification();
  std::vector<const ManifestEntry*> maxes;
  for (const auto& e : c.manifest.entries)
    if (e.label == "find_max") maxes.push_back(&e);
  auto p = minilang::parse(c.source(maxes[0]->program_id));
  auto q = minilang::parse(c.source(maxes[1]->program_id));
  EXPECT_NE(p.tokens, q.tokens);
  for (const auto& in : minilang::random_inputs(p, 20, 5, c.manifest.spec.inputs))
    EXPECT_EQ(observe(p, in), observe(q, in));
}

TEST(Corpus, NamingPoolShape) {
  const auto& m = naming().manifest;
  EXPECT_EQ(m.spec.labels.size(), 12u);
  EXPECT_EQ(m.entries.size(), 600u);
  auto vocab = names::NameVocab::from_names(m.spec.labels);
  for (const auto& name : m.spec.labels) {
    auto ids = vocab.encode_name(name);
    EXPECT_GE(ids.size(), 2u) << name;
    for (auto id : ids) EXPECT_NE(id, names::NameVocab::kUnkId);
  }
  std::map<Split, std::size_t> n;
  for (const auto& e : m.entries) ++n[e.split];
  EXPECT_EQ(n[Split::Train], 360u);
  EXPECT_EQ(n[Split::Valid], 120u);
  EXPECT_EQ(n[Split::Test], 120u);
}

TEST(Corpus, NoLeakage) {
  for (const Corpus* c : {&classification(), &naming()}) {
    std::map<std::string, Split> split_of_source;
    std::set<std::string> ids;
    for (const auto& e : c->manifest.entries) {
      EXPECT_TRUE(ids.insert(e.program_id).second);
      const auto& src = c->source(e.program_id);
      auto [it, fresh] = split_of_source.try_emplace(src, e.split);
      EXPECT_TRUE(fresh || it->second == e.split);
      EXPECT_EQ(minilang::parse(src).name, "f");
      for (const auto& w : names::split_subwords(e.label))
        if (w.size() > 3) {
          EXPECT_EQ(src.find(w), std::string::npos) << e.program_id;
        }
    }
  }
}

TEST(Corpus, ClassSeparation) {
  EXPECT_NO_THROW(check_class_separation(default_class_labels(), {-20, 20, 1, 4}));
  EXPECT_THROW(check_class_separation({"find_max", "find_max_value"}, {-20, 20, 1, 4}), Error);
  auto bad = CorpusSpec::classification(1, 5);
  bad.labels = {"find_max"};
  EXPECT_THROW(bad.validate(), Error);
  bad.labels = {"find_max", "find_max"};
  EXPECT_THROW(bad.validate(), Error);
  bad.labels = {"find_max", "bogo_sort"};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Manifest, JsonRoundTripAndFiles) {
  auto c = gen_naming_corpus(CorpusSpec::naming(9, 3));
  auto dir = temp_dir("files");
  save_corpus(c, dir);
  auto back = load_corpus(dir);
  EXPECT_EQ(back.manifest.to_json(), c.manifest.to_json());
  EXPECT_EQ(back.sources, c.sources);
  EXPECT_TRUE(std::filesystem::exists(dir / c.manifest.entries[0].source_path));
  auto j = c.manifest.to_json();
  j["entries"].push_back(j["entries"][0]);
  EXPECT_THROW(DatasetManifest::from_json(j), Error);
  std::filesystem::remove_all(dir);
}

TEST(Tracing, StraightLineProgramHasOnePath) {
  auto p = minilang::parse("fn f(x: int, y: int) { s: int = x + y; return s; }");
  for (std::size_t paths : {1u, 6u, 18u}) {
    TraceBudget b;
    b.max_paths = paths;
    auto out = trace_program("s", p, b, {-20, 20, 1, 4}, 3);
    ASSERT_TRUE(out.traces);
    EXPECT_EQ(out.traces->paths.size(), 1u);
    EXPECT_EQ(out.traces->paths[0].blended.concrete_count, b.n_eps);
  }
}

TEST(Tracing, BudgetContractOnCorpus) {
  auto c = gen_classification_corpus(CorpusSpec::classification(5, 10));
  auto store = trace_corpus(c, c.manifest.spec.budget, 5, 1);
  EXPECT_TRUE(store.dropped.empty());
  EXPECT_EQ(store.programs.size(), c.manifest.entries.size());
  for (const auto& pt : store.programs) {
    EXPECT_LE(pt.paths.size(), c.manifest.spec.budget.max_paths);
    std::set<traces::PathKey> keys;
    for (const auto& path : pt.paths) {
      EXPECT_EQ(path.blended.concrete_count, c.manifest.spec.budget.n_eps);
      EXPECT_TRUE(keys.insert(path.blended.path_key).second);
    }
    EXPECT_GE(pt.executions, pt.concretes_used());
  }
}

TEST(Tracing, FailingProgramsAreDropped) {
  TraceBudget b;
  b.step_limit = 200;
  auto crash = trace_program("c", minilang::parse("fn f(a: int[]) { return a[10]; }"), b, {-5, 5, 1, 4}, 1);
  EXPECT_FALSE(crash.traces);
  EXPECT_NE(crash.drop_reason.find("runtime"), std::string::npos);
  auto spin = trace_program("s", minilang::parse("fn f(a: int[]) { while (true) { } }"), b, {-5, 5, 1, 4}, 1);
  EXPECT_FALSE(spin.traces);
  EXPECT_NE(spin.drop_reason.find("step limit"), std::string::npos);
}

TEST(Tracing, StoreBytesDeterministicAndThreadIndependent) {
  auto c = gen_naming_corpus(CorpusSpec::naming(2, 2));
  auto a = store_to_jsonl(trace_corpus(c, c.manifest.spec.budget, 11, 1));
  auto b = store_to_jsonl(trace_corpus(c, c.manifest.spec.budget, 11, 3));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, store_to_jsonl(trace_corpus(c, c.manifest.spec.budget, 12, 1)));
  EXPECT_EQ(store_to_jsonl(store_from_jsonl(a)), a);
  auto path = temp_dir("store.jsonl");
  save_store(store_from_jsonl(a), path);
  EXPECT_EQ(read_file(path), a);
  std::filesystem::remove(path);
}

TEST(Reduction, DownsampleAndMinSet) {
  auto c = gen_classification_corpus(CorpusSpec::classification(6, 10));
  auto store = trace_corpus(c, c.manifest.spec.budget, 6, 1);
  ReductionStats two, minset;
  auto r2 = reduce_store(store, 2, false, 1, &two);
  auto rm = reduce_store(store, 2, true, 1, &minset);
  EXPECT_TRUE(two.coverage_preserved);
  EXPECT_TRUE(minset.coverage_preserved);
  EXPECT_EQ(two.paths_after, two.paths_before);
  EXPECT_LE(minset.paths_after, minset.paths_before);
  EXPECT_LT(minset.executions_after, two.executions_after);
  EXPECT_LT(two.executions_after, two.executions_before);
  for (std::size_t i = 0; i < rm.programs.size(); ++i) {
    EXPECT_EQ(rm.programs[i].coverage(), store.programs[i].coverage());
    for (const auto& p : rm.programs[i].paths) EXPECT_EQ(p.blended.concrete_count, 2u);
    EXPECT_EQ(rm.programs[i].executions, rm.programs[i].concretes_used());
  }
  EXPECT_EQ(store_to_jsonl(reduce_store(store, 2, true, 1)), store_to_jsonl(rm));
  ReductionStats none;
  auto same = reduce_store(store, 0, false, 1, &none);
  for (std::size_t i = 0; i < same.programs.size(); ++i) EXPECT_EQ(same.programs[i].paths, store.programs[i].paths);
}
