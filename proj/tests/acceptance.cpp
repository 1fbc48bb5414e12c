// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [criterion ...]   (default: all of 1..11)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gradcheck.hpp"
#include "ligerlab/cli.hpp"

using namespace ligerlab;
namespace fs = std::filesystem;
using gradcheck::random_tensor;
using num::Graph;
using num::ParameterStore;
using num::Tensor;
using num::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared corpora and runs

struct Workspace {
  std::map<std::uint64_t, data::Corpus> classify;
  std::map<std::uint64_t, data::TraceStore> classify_store;
  std::map<std::string, cli::ClassifyRun> runs;
  std::map<std::string, double> run_seconds;

  const data::Corpus& classification(std::uint64_t seed) {
    auto it = classify.find(seed);
    if (it == classify.end()) it = classify.emplace(seed, data::generate_corpus(data::CorpusSpec::classification(seed))).first;
    return it->second;
  }
  const data::TraceStore& store(std::uint64_t seed) {
    auto it = classify_store.find(seed);
    if (it == classify_store.end()) {
      const auto& c = classification(seed);
      it = classify_store.emplace(seed, data::trace_corpus(c, c.manifest.spec.budget, seed)).first;
    }
    return it->second;
  }
  data::TraceStore reduced(std::uint64_t seed, std::size_t keep, bool min_set, data::ReductionStats* st = nullptr) {
    return data::reduce_store(store(seed), keep, min_set, substream_seed(seed, "reduce"), st);
  }

  cli::RunConfig config(std::uint64_t seed, const std::string& ablation) const {
    cli::RunConfig rc;
    rc.seed = seed;
    rc.ablation = ablation;
    return rc;
  }

  /// Trains with CLI defaults; `variant` is "full" or "k<keep>" or "minset<keep>".
  const cli::ClassifyRun& run(std::uint64_t seed, const std::string& ablation, const std::string& variant) {
    std::string key = std::to_string(seed) + "/" + ablation + "/" + variant;
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    data::TraceStore s;
    std::size_t n_eps = store(seed).programs.front().paths.front().blended.concrete_count;
    if (variant == "full") {
      s = store(seed);
    } else if (variant.rfind("minset", 0) == 0) {
      n_eps = std::stoul(variant.substr(6));
      s = reduced(seed, n_eps, true);
    } else {
      n_eps = std::stoul(variant.substr(1));
      s = reduced(seed, n_eps, false);
    }
    auto rc = config(seed, ablation);
    const auto& corpus = classification(seed);
    auto t0 = Clock::now();
    auto r = cli::run_classification(corpus, s, rc.model_config(corpus.manifest.spec.labels.size(), n_eps),
                                     rc.train_config());
    run_seconds[key] = seconds_since(t0);
    std::printf("  trained %-22s test acc %s, best epoch %zu/%zu, %.0f s\n", key.c_str(), fixed(r.test.accuracy).c_str(),
                r.history.best_epoch, r.history.history.size(), run_seconds[key]);
    std::fflush(stdout);
    return runs.emplace(key, std::move(r)).first->second;
  }
};

// ---------------------------------------------------------------------------
// 1. Gradient oracle

Outcome gradient_oracle() {
  auto t0 = Clock::now();
  constexpr int kInstances = 100;
  Rng rng(101);
  using gradcheck::check_inputs;
  using gradcheck::project;
  using Build = gradcheck::Builder;
  std::map<std::string, double> worst;
  auto note = [&](const std::string& op, double err) { worst[op] = std::max(worst[op], err); };

  for (int i = 0; i < kInstances; ++i) {
    std::size_t r = 1 + rng() % 4, k = 1 + rng() % 5, c = 1 + rng() % 5;
    auto seed = static_cast<std::uint64_t>(1000 + i);
    auto op = [&](const std::string& name, std::vector<Tensor> in, Build b) { note(name, check_inputs(std::move(in), b)); };
    op("matmul", {random_tensor(rng, r, k), random_tensor(rng, k, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.matmul(v[0], v[1]), seed); });
    op("matmul_t", {random_tensor(rng, r, k), random_tensor(rng, c, k)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.matmul_t(v[0], v[1]), seed); });
    op("add", {random_tensor(rng, r, c), random_tensor(rng, r, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.add(v[0], v[1]), seed); });
    op("add_row", {random_tensor(rng, r, c), random_tensor(rng, 1, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.add_row(v[0], v[1]), seed); });
    op("mul", {random_tensor(rng, r, c), random_tensor(rng, r, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.mul(v[0], v[1]), seed); });
    double s = std::uniform_real_distribution<double>(-2, 2)(rng);
    op("scale", {random_tensor(rng, r, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.scale(v[0], s), seed); });
    op("tanh", {random_tensor(rng, r, c, 2.0)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.tanh(v[0]), seed); });
    op("sigmoid", {random_tensor(rng, r, c, 3.0)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.sigmoid(v[0]), seed); });
    op("softmax", {random_tensor(rng, r, c, 3.0)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.softmax(v[0]), seed); });
    op("concat_cols", {random_tensor(rng, r, c), random_tensor(rng, r, k)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.concat_cols(v[0], v[1]), seed); });
    op("concat_rows", {random_tensor(rng, r, c), random_tensor(rng, k, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.concat_rows({v[0], v[1]}), seed); });
    std::size_t b = rng() % r, e = b + 1 + rng() % (r - b);
    op("slice_rows", {random_tensor(rng, r, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.slice_rows(v[0], b, e), seed); });
    std::vector<std::size_t> idx(1 + rng() % 5);
    for (auto& x : idx) x = rng() % r;
    op("gather_rows", {random_tensor(rng, r, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.gather_rows(v[0], idx), seed); });
    op("max_elementwise", {random_tensor(rng, 1, c), random_tensor(rng, 1, c), random_tensor(rng, 1, c)},
       [&](Graph& g, const std::vector<Var>& v) { return project(g, g.max_elementwise(v), seed); });
    op("sum", {random_tensor(rng, r, c)}, [&](Graph& g, const std::vector<Var>& v) { return g.sum(v[0]); });
    std::vector<std::size_t> labels(r);
    for (auto& l : labels) l = rng() % (c + 1);
    op("cross_entropy", {random_tensor(rng, r, c + 1, 2.0)},
       [&](Graph& g, const std::vector<Var>& v) { return g.cross_entropy(v[0], labels); });

    // Composite model ops over parameter stores.
    std::size_t in = 1 + rng() % 4, hid = 1 + rng() % 4;
    for (auto cell : {model::CellKind::Vanilla, model::CellKind::Gated}) {
      ParameterStore store;
      auto rnn = model::RnnParams::create(store, "rnn", cell, in, hid);
      store.init_uniform(0.8, seed);
      Tensor x = random_tensor(rng, r, in), h = random_tensor(rng, r, hid);
      note(cell == model::CellKind::Vanilla ? "rnn_step_vanilla" : "rnn_step_gated",
           gradcheck::check_params(store, [&](Graph& g) { return project(g, rnn.step(g, g.constant(x), g.constant(h)), seed); }));
    }
    {
      ParameterStore store;
      auto a1 = model::ScorerParams::create(store, "a1", c, hid, k);
      store.init_uniform(0.8, seed);
      Tensor cand = random_tensor(rng, r, c), ctx = random_tensor(rng, 1, hid);
      note("attention_scores", gradcheck::check_params(store, [&](Graph& g) {
             Var proj = g.matmul_t(g.constant(cand), g.param(a1.Wc));
             return project(g, g.softmax(a1.scores(g, proj, g.constant(ctx))), seed);
           }));
    }
  }

  // End-to-end on a 2-pair blended trace.
  auto prog = minilang::parse("fn f(x: int) {\n  y: int = x + 2;\n  return y;\n}");
  data::TraceBudget budget;
  budget.n_eps = 2;
  budget.max_paths = 1;
  auto traced = data::trace_program("toy", prog, budget, {-9, 9, 1, 3}, 3);
  double end_to_end = 0.0;
  std::size_t pairs = traced.traces ? traced.traces->paths.front().blended.size() : 0;
  if (traced.traces) {
    std::set<std::string> toks;
    for (const auto& s : prog.statements) toks.insert(s.tokens.begin(), s.tokens.end());
    for (int v = -9; v <= 11; ++v) toks.insert(std::to_string(v));
    auto vocab = model::Vocab::from_tokens(toks);
    for (auto a : {model::Ablation::Full, model::Ablation::StaticOnly, model::Ablation::DynamicOnly,
                   model::Ablation::NoAttention}) {
      for (auto cell : {model::CellKind::Vanilla, model::CellKind::Gated}) {
        model::ModelConfig cfg;
        cfg.hidden = 4;
        cfg.embed = 3;
        cfg.n_eps = 2;
        cfg.labels = 3;
        cfg.ablation = a;
        cfg.cell = cell;
        model::Classifier m(cfg, vocab.size());
        m.params().init_uniform(0.6, 21);
        auto ep = model::encode_program(prog, *traced.traces, vocab, cfg);
        ep.label = 2;
        end_to_end = std::max(end_to_end, gradcheck::check_params(m.params(), [&](Graph& g) { return m.loss(g, ep); }));
        if (a == model::Ablation::Full) {
          names::NameModel nm(cfg, vocab.size(), 6);
          nm.params().init_uniform(0.6, 22);
          names::NameSample sample{ep, "yPlus", {3, 4}};
          end_to_end = std::max(end_to_end, gradcheck::check_params(nm.params(), [&](Graph& g) { return nm.loss(g, sample); }));
        }
      }
    }
  }
  double secs = seconds_since(t0);
  double per_op = 0.0;
  std::string worst_op;
  for (const auto& [name, err] : worst)
    if (err >= per_op) {
      per_op = err;
      worst_op = name;
    }
  Outcome o;
  o.pass = per_op < 1e-4 && pairs == 2 && end_to_end < 1e-3 && secs < 60.0;
  o.detail = std::to_string(worst.size()) + " ops x " + std::to_string(kInstances) + " instances, worst " + sci(per_op) +
             " (" + worst_op + "); end-to-end " + std::to_string(pairs) + "-pair toy " + sci(end_to_end) + "; " +
             fixed(secs, 1) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Attention normalization

/// Independent a1 oracle: mu_k = u . tanh(Wc c_k + Wh h + b), alpha = softmax(mu).
std::vector<double> oracle_weights(const ParameterStore& ps, const model::ScorerParams& a1, const Tensor& cand,
                                   const Tensor& ctx) {
  const auto &Wc = ps.value(a1.Wc), &Wh = ps.value(a1.Wh), &b = ps.value(a1.b), &u = ps.value(a1.u);
  std::size_t hid = Wc.rows();
  std::vector<double> mu(cand.rows());
  for (std::size_t k = 0; k < cand.rows(); ++k) {
    double score = 0.0;
    for (std::size_t i = 0; i < hid; ++i) {
      double z = b.at(0, i);
      for (std::size_t j = 0; j < cand.cols(); ++j) z += Wc.at(i, j) * cand.at(k, j);
      for (std::size_t j = 0; j < ctx.cols(); ++j) z += Wh.at(i, j) * ctx.at(0, j);
      score += u.at(0, i) * std::tanh(z);
    }
    mu[k] = score;
  }
  double m = *std::max_element(mu.begin(), mu.end()), total = 0.0;
  for (auto& x : mu) total += (x = std::exp(x - m));
  for (auto& x : mu) x /= total;
  return mu;
}

Outcome attention_normalization() {
  constexpr std::size_t kSteps = 1000, kHidden = 8;
  Rng rng(202);
  std::map<model::Ablation, std::unique_ptr<model::Classifier>> models;
  for (auto a : {model::Ablation::Full, model::Ablation::StaticOnly, model::Ablation::DynamicOnly,
                 model::Ablation::NoAttention}) {
    model::ModelConfig cfg;
    cfg.hidden = kHidden;
    cfg.embed = kHidden;
    cfg.labels = 2;
    cfg.ablation = a;
    models[a] = std::make_unique<model::Classifier>(cfg, 8);
    models[a]->params().init_uniform(1.0, 7);
  }
  std::size_t sum_bad = 0, nonpositive = 0, first_bad = 0, ablation_bad = 0, oracle_bad = 0;
  double max_sum_dev = 0.0, max_oracle_dev = 0.0;
  auto exact_output = [](const Tensor& out, const std::vector<double>& w, const Tensor& cand) {
    double dev = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cand.rows(); ++k) acc += w[k] * cand.at(k, j);
      dev = std::max(dev, std::abs(acc - out.at(0, j)));
    }
    return dev;
  };
  for (std::size_t step = 0; step < kSteps; ++step) {
    std::size_t n = 1 + rng() % 5;
    Tensor stmt = random_tensor(rng, 1, kHidden, 2.0), states = random_tensor(rng, n, kHidden, 2.0),
           prev = random_tensor(rng, 1, kHidden, 2.0);
    Tensor both = Tensor::matrix(n + 1, kHidden);
    for (std::size_t j = 0; j < kHidden; ++j) {
      both.at(0, j) = stmt.at(0, j);
      for (std::size_t r = 0; r < n; ++r) both.at(r + 1, j) = states.at(r, j);
    }
    for (auto& [a, m] : models) {
      Graph g(&m->params());
      Var hs = g.constant(stmt), hz = g.constant(states), hp = g.constant(prev);
      auto first = m->encoder().fuse_step(g, hs, hz, Var{});
      auto later = m->encoder().fuse_step(g, hs, hz, hp);
      const auto& ps = m->params();
      const auto& a1 = m->encoder().scorer();
      switch (a) {
        case model::Ablation::Full: {
          const auto& w = later.weights;
          double sum = std::accumulate(w.begin(), w.end(), 0.0);
          max_sum_dev = std::max(max_sum_dev, std::abs(sum - 1.0));
          if (std::abs(sum - 1.0) > 1e-9 || w.size() != n + 1) ++sum_bad;
          for (double x : w) nonpositive += x > 0.0 ? 0 : 1;
          auto ref = oracle_weights(ps, a1, both, prev);
          double dev = 0.0;
          for (std::size_t k = 0; k < ref.size() && k < w.size(); ++k) dev = std::max(dev, std::abs(ref[k] - w[k]));
          dev = std::max(dev, exact_output(g.value(later.output), w, both));
          max_oracle_dev = std::max(max_oracle_dev, dev);
          if (dev > 1e-12) ++oracle_bad;
          for (double x : first.weights) first_bad += x == 1.0 / static_cast<double>(n + 1) ? 0 : 1;
          if (first.weights.size() != n + 1) ++first_bad;
          break;
        }
        case model::Ablation::StaticOnly:
          for (const auto* f : {&first, &later})
            if (f->weights != std::vector<double>{1.0} || g.value(f->output).data != stmt.data) ++ablation_bad;
          break;
        case model::Ablation::DynamicOnly: {
          const auto& w = later.weights;
          double sum = std::accumulate(w.begin(), w.end(), 0.0);
          if (w.size() != n || std::abs(sum - 1.0) > 1e-9) ++ablation_bad;
          for (double x : w) nonpositive += x > 0.0 ? 0 : 1;
          auto ref = oracle_weights(ps, a1, states, prev);
          for (std::size_t k = 0; k < ref.size() && k < w.size(); ++k)
            if (std::abs(ref[k] - w[k]) > 1e-12) ++ablation_bad;
          for (double x : first.weights) first_bad += x == 1.0 / static_cast<double>(n) ? 0 : 1;
          break;
        }
        case model::Ablation::NoAttention:
          for (const auto* f : {&first, &later}) {
            if (f->weights.size() != n + 1) ++ablation_bad;
            for (double x : f->weights) ablation_bad += x == 1.0 / static_cast<double>(n + 1) ? 0 : 1;
            if (exact_output(g.value(f->output), f->weights, both) > 1e-12) ++ablation_bad;
          }
          break;
      }
    }
  }
  Outcome o;
  o.pass = sum_bad == 0 && nonpositive == 0 && first_bad == 0 && ablation_bad == 0 && oracle_bad == 0;
  o.detail = std::to_string(kSteps) + " steps; max |sum-1| " + sci(max_sum_dev) + ", non-positive " +
             std::to_string(nonpositive) + ", non-uniform first steps " + std::to_string(first_bad) +
             ", ablation mismatches " + std::to_string(ablation_bad) + ", max oracle deviation " + sci(max_oracle_dev);
  return o;
}

// ---------------------------------------------------------------------------
// 3. Pooling / order invariance

struct Prepared {
  model::Vocab vocab;
  model::ModelConfig cfg;
  std::unique_ptr<model::Classifier> model;
};

Prepared untrained_classifier(Workspace& ws, std::uint64_t seed) {
  Prepared p;
  const auto& corpus = ws.classification(seed);
  const auto& store = ws.store(seed);
  p.vocab = cli::build_vocab(corpus, store);
  auto rc = ws.config(seed, "full");
  p.cfg = rc.model_config(corpus.manifest.spec.labels.size(), corpus.manifest.spec.budget.n_eps);
  p.model = std::make_unique<model::Classifier>(p.cfg, p.vocab.size());
  p.model->params().init_uniform(rc.train_config().init_limit, rc.train_config().seed);
  return p;
}

Outcome order_invariance(Workspace& ws) {
  constexpr std::size_t kPrograms = 100;
  const auto& corpus = ws.classification(1);
  const auto& store = ws.store(1);
  auto prep = untrained_classifier(ws, 1);
  Rng rng(303);
  std::vector<std::size_t> order(store.programs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);
  std::size_t checked = 0, multi = 0, embed_diff = 0, label_diff = 0;
  for (std::size_t i = 0; i < order.size() && checked < kPrograms; ++i) {
    const auto& pt = store.programs[order[i]];
    auto prog = minilang::parse(corpus.source(pt.program_id));
    auto permuted = pt;
    if (pt.paths.size() > 1) {
      ++multi;
      while (permuted.paths == pt.paths) shuffle_in_place(permuted.paths, rng);
    }
    auto a = model::encode_program(prog, pt, prep.vocab, prep.cfg);
    auto b = model::encode_program(prog, permuted, prep.vocab, prep.cfg);
    Graph ga(&prep.model->params()), gb(&prep.model->params());
    auto ha = ga.value(prep.model->encoder().encode(ga, a).program_embedding).data;
    auto hb = gb.value(prep.model->encoder().encode(gb, b).program_embedding).data;
    if (ha != hb) ++embed_diff;
    if (prep.model->predict(a) != prep.model->predict(b)) ++label_diff;
    ++checked;
  }
  Outcome o;
  o.pass = checked == kPrograms && multi > 0 && embed_diff == 0 && label_diff == 0;
  o.detail = std::to_string(checked) + " programs (" + std::to_string(multi) + " multi-path); H_P differs in " +
             std::to_string(embed_diff) + ", label differs in " + std::to_string(label_diff);
  return o;
}

// ---------------------------------------------------------------------------
// 4. Transform oracle

Outcome transform_oracle(Workspace& ws) {
  constexpr std::size_t kPrograms = 200, kInputs = 20;
  auto naming = data::generate_corpus(data::CorpusSpec::naming(4));
  const auto& entries = naming.manifest.entries;
  std::size_t stride = entries.size() / kPrograms;
  std::map<std::string, std::size_t> applied, failed;
  std::size_t programs = 0;
  for (std::size_t i = 0; i < kPrograms; ++i) {
    const auto& e = entries[i * stride];
    auto prog = minilang::parse(naming.source(e.program_id));
    auto inputs = minilang::random_inputs(prog, kInputs, substream_seed(404, "equiv", e.seed), naming.manifest.spec.inputs);
    ++programs;
    std::vector<transforms::TransformKind> kinds = transforms::TransformKind::all();
    kinds.push_back(transforms::TransformKind::loop_unroll(3));
    for (const auto& k : kinds) {
      auto r = transforms::apply_transform(prog, k);
      if (!r.applied) continue;
      std::string name = k.name() + (k.kind == transforms::TransformKind::Kind::LoopUnroll ? std::to_string(k.factor) : "");
      ++applied[name];
      if (!transforms::check_equivalence(prog, r.program, inputs)) ++failed[name];
    }
  }
  std::size_t total_failed = 0;
  std::string summary;
  for (const auto& [name, n] : applied) {
    total_failed += failed[name];
    summary += (summary.empty() ? "" : ", ") + name + " " + std::to_string(n - failed[name]) + "/" + std::to_string(n);
  }

  const auto& corpus = ws.classification(1);
  auto prep = untrained_classifier(ws, 1);
  const auto& spec = corpus.manifest.spec;
  transforms::Predictor predict = [&](const std::string& id, const minilang::Program& p) -> std::optional<std::size_t> {
    auto out = data::trace_program(id, p, spec.budget, spec.inputs, substream_seed(1, "inputs", hash_string(id)));
    if (!out.traces) return std::nullopt;
    return prep.model->predict(model::encode_program(p, *out.traces, prep.vocab, prep.cfg));
  };
  std::vector<transforms::StabilityItem> items;
  for (const auto& e : corpus.manifest.entries)
    if (e.split == data::Split::Test && items.size() < 60) items.push_back({e.program_id, minilang::parse(corpus.source(e.program_id))});
  auto identity = transforms::measure_stability(predict, items, transforms::TransformKind::identity());

  Outcome o;
  o.pass = programs == kPrograms && total_failed == 0 && applied.size() >= 4 && identity.applicable == items.size() &&
           identity.fraction() == 0.0;
  o.detail = std::to_string(programs) + " programs x " + std::to_string(kInputs) + " inputs; equivalent " + summary +
             "; identity stability fraction " + fixed(identity.fraction(), 6) + " over " +
             std::to_string(identity.applicable);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Coverage-minimal selection

Outcome min_coverage(Workspace& ws) {
  using minilang::BranchArm;
  using minilang::Coverage;
  Coverage A{{1, true}, {1, false}}, B{{1, false}}, C{{2, true}};
  std::vector<int> sa{1}, sb{2}, sc{3};
  auto ka = traces::path_key_of(sa), kb = traces::path_key_of(sb), kc = traces::path_key_of(sc);
  auto picked = traces::select_min_coverage_set({{ka, A}, {kb, B}, {kc, C}});
  bool forced = picked.size() == 2 && picked[0] == ka && picked[1] == kc;

  std::size_t multi = 0, bad = 0, paths_before = 0, paths_after = 0;
  auto check_store = [&](const data::TraceStore& store) {
    for (const auto& p : store.programs) {
      if (p.paths.size() < 2) continue;
      ++multi;
      std::vector<Coverage> cov;
      for (const auto& r : p.paths) cov.push_back(r.coverage);
      auto idx = traces::select_min_coverage_indices(cov);
      Coverage u;
      for (auto i : idx) u.insert(cov[i].begin(), cov[i].end());
      if (u != p.coverage() || idx.size() > p.paths.size()) ++bad;
      paths_before += p.paths.size();
      paths_after += idx.size();
    }
  };
  check_store(ws.store(1));
  auto naming = data::generate_corpus(data::CorpusSpec::naming(1));
  check_store(data::trace_corpus(naming, naming.manifest.spec.budget, 1));
  Outcome o;
  o.pass = forced && multi > 0 && bad == 0;
  o.detail = std::string("hand-built example ") + (forced ? "[A, C]" : "wrong") + "; " + std::to_string(multi) +
             " multi-path programs, violations " + std::to_string(bad) + ", paths " + std::to_string(paths_before) +
             " -> " + std::to_string(paths_after);
  return o;
}

// ---------------------------------------------------------------------------
// 6-8. Desk-scale classification

Outcome desk_classification(Workspace& ws) {
  const auto& r = ws.run(1, "full", "full");
  double minutes = ws.run_seconds["1/full/full"] / 60.0;
  Outcome o;
  o.pass = r.test.accuracy >= 0.95 && r.history.history.size() <= 30 && minutes < 45.0;
  o.detail = "test accuracy " + fixed(r.test.accuracy) + " (macro-F1 " + fixed(r.test.macro_f1) + "), " +
             std::to_string(r.history.history.size()) + " epochs, " + fixed(minutes, 1) + " min";
  return o;
}

Outcome concrete_robustness(Workspace& ws) {
  std::size_t majority = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    double full5 = ws.run(seed, "full", "full").test.accuracy;
    double full2 = ws.run(seed, "full", "k2").test.accuracy;
    double dyn5 = ws.run(seed, "dynamic", "full").test.accuracy;
    double dyn2 = ws.run(seed, "dynamic", "k2").test.accuracy;
    double df = full5 - full2, dd = dyn5 - dyn2;
    bool ok = df <= 0.03 && dd > df;
    majority += ok ? 1 : 0;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": full drop " +
              fixed(100 * df, 2) + " pt, dynamic drop " + fixed(100 * dd, 2) + " pt" + (ok ? "" : " (no)");
  }
  Outcome o;
  o.pass = majority >= 2;
  o.detail = detail + "; seeds satisfying both " + std::to_string(majority) + "/3";
  return o;
}

Outcome minset_efficiency(Workspace& ws) {
  data::ReductionStats st;
  ws.reduced(1, 2, true, &st);
  double full = ws.run(1, "full", "full").test.accuracy;
  double minset = ws.run(1, "full", "minset2").test.accuracy;
  double reduction = st.executions_before ? 1.0 - static_cast<double>(st.executions_after) / st.executions_before : 0.0;
  Outcome o;
  o.pass = minset >= full - 0.03 && st.executions_after < st.executions_before && st.coverage_preserved;
  o.detail = "min-set accuracy " + fixed(minset) + " vs full " + fixed(full) + "; executions " +
             std::to_string(st.executions_before) + " -> " + std::to_string(st.executions_after) + " (" +
             fixed(100 * reduction, 1) + "% fewer), paths " + std::to_string(st.paths_before) + " -> " +
             std::to_string(st.paths_after) + ", coverage preserved " + (st.coverage_preserved ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 9. Sub-token metric

Outcome subtoken_metric() {
  struct Case {
    const char *pred, *gold;
    double p, r, f;
  };
  const Case cases[] = {{"diffCompute", "computeDiff", 1.0, 1.0, 1.0},
                        {"compute", "computeDiff", 1.0, 0.5, 0.667},
                        {"computeFileDiff", "computeDiff", 0.667, 1.0, 0.8}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    auto prf = names::subtoken_prf(c.pred, c.gold);
    ok = ok && std::abs(prf.precision - c.p) <= 1e-3 && std::abs(prf.recall - c.r) <= 1e-3 && std::abs(prf.f1 - c.f) <= 1e-3;
    detail += (detail.empty() ? "" : ", ") + std::string(c.pred) + " (" + fixed(prf.precision, 3) + "," +
              fixed(prf.recall, 3) + "," + fixed(prf.f1, 3) + ")";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 10. Name prediction

Outcome name_prediction() {
  auto corpus = data::generate_corpus(data::CorpusSpec::naming(1));
  auto store = data::trace_corpus(corpus, corpus.manifest.spec.budget, 1);
  auto run = [&](const std::string& ablation) {
    cli::RunConfig rc;
    rc.subcommand = "name";
    rc.seed = 1;
    rc.ablation = ablation;
    rc.epochs = 40;
    auto t0 = Clock::now();
    auto r = cli::run_naming(corpus, store, rc.model_config(1, corpus.manifest.spec.budget.n_eps), rc.train_config(),
                             rc.max_name_length);
    std::printf("  trained name/%-9s test micro-F1 %s, best epoch %zu/%zu, %.0f s\n", ablation.c_str(),
                fixed(r.test.micro().f1).c_str(), r.history.best_epoch, r.history.history.size(), seconds_since(t0));
    std::fflush(stdout);
    return std::make_pair(r.test.micro().f1, r.history.history.size());
  };
  auto [full, full_epochs] = run("full");
  auto [stat, stat_epochs] = run("static");
  Outcome o;
  o.pass = full >= 0.85 && full_epochs <= 40 && stat < full;
  o.detail = std::to_string(corpus.manifest.spec.labels.size()) + " names; full micro-F1 " + fixed(full) + " in " +
             std::to_string(full_epochs) + " epochs, static_only " + fixed(stat);
  (void)stat_epochs;
  return o;
}

// ---------------------------------------------------------------------------
// 11. Determinism

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = data::read_file(e.path());
  return files;
}

bool pipeline(const fs::path& dir, std::string& log) {
  fs::create_directories(dir);
  auto cwd = fs::current_path();
  fs::current_path(dir);
  std::ostringstream out, err;
  const std::vector<std::vector<std::string>> steps = {
      {"gen", "--corpus", "c", "--variants", "12", "--seed", "5", "--report", "r/gen"},
      {"trace", "--corpus", "c", "--traces", "t.jsonl", "--seed", "5", "--report", "r/trace"},
      {"reduce", "--traces", "t.jsonl", "--output", "t2.jsonl", "--keep-concretes", "2", "--min-set", "--report", "r/reduce"},
      {"train", "--corpus", "c", "--traces", "t.jsonl", "--ckpt", "m.ckpt", "--epochs", "2", "--report", "r/train"},
      {"eval", "--corpus", "c", "--traces", "t.jsonl", "--ckpt", "m.ckpt", "--report", "r/eval"},
      {"ablate", "--corpus", "c", "--traces", "t2.jsonl", "--ablation", "dynamic", "--epochs", "2", "--report", "r/ablate"},
      {"stability", "--corpus", "c", "--traces", "t.jsonl", "--ckpt", "m.ckpt", "--report", "r/stability"},
      {"gen", "--corpus", "n", "--task", "name", "--variants", "4", "--seed", "6", "--report", "r/ngen"},
      {"trace", "--corpus", "n", "--traces", "nt.jsonl", "--seed", "6", "--report", "r/ntrace"},
      {"name", "--corpus", "n", "--traces", "nt.jsonl", "--ckpt", "n.ckpt", "--epochs", "2", "--report", "r/name"}};
  bool ok = true;
  for (const auto& s : steps)
    if (cli::run(s, out, err) != 0) {
      ok = false;
      log = s.front() + ": " + err.str();
      break;
    }
  fs::current_path(cwd);
  return ok;
}

Outcome determinism() {
  auto root = fs::temp_directory_path() / ("ligerlab_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::string log;
  bool ran = pipeline(root / "a", log) && pipeline(root / "b", log);
  Outcome o;
  if (!ran) {
    o.detail = "pipeline failed: " + log;
  } else {
    auto a = snapshot(root / "a"), b = snapshot(root / "b");
    std::size_t differ = 0;
    std::string names;
    for (const auto& [name, bytes] : a) {
      auto it = b.find(name);
      if (it != b.end() && it->second == bytes) continue;
      ++differ;
      names += " " + name;
    }
    o.pass = a.size() == b.size() && differ == 0 && a.count("c/manifest.json") && a.count("t.jsonl") &&
             a.count("m.ckpt") && a.count("r/eval/eval_report.json");
    o.detail = std::to_string(a.size()) + " files (manifests, trace stores, checkpoints, reports) compared, " +
               std::to_string(differ) + " differ" + (differ ? ":" + names : "");
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  Workspace ws;
  const std::vector<std::pair<int, std::pair<const char*, std::function<Outcome()>>>> criteria = {
      {1, {"gradient oracle", [] { return gradient_oracle(); }}},
      {2, {"attention normalization", [] { return attention_normalization(); }}},
      {3, {"pooling and order invariance", [&] { return order_invariance(ws); }}},
      {4, {"transform oracle", [&] { return transform_oracle(ws); }}},
      {5, {"coverage-minimal selection", [&] { return min_coverage(ws); }}},
      {9, {"sub-token metric", [] { return subtoken_metric(); }}},
      {11, {"determinism", [] { return determinism(); }}},
      {6, {"desk-scale classification", [&] { return desk_classification(ws); }}},
      {7, {"directional robustness", [&] { return concrete_robustness(ws); }}},
      {8, {"min-set efficiency", [&] { return minset_efficiency(ws); }}},
      {10, {"name prediction", [] { return name_prediction(); }}},
  };
  std::map<int, std::pair<std::string, Outcome>> results;
  for (const auto& [id, c] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, c.first, o.detail.c_str());
    std::fflush(stdout);
    results[id] = {c.first, o};
  }
  std::size_t failed = 0;
  std::printf("\nsummary\n");
  for (const auto& [id, r] : results) {
    std::printf("%s %2d %s\n", r.second.pass ? "PASS" : "FAIL", id, r.first.c_str());
    failed += r.second.pass ? 0 : 1;
  }
  std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed ? 1 : 0;
}
