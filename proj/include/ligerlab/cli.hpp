#ifndef LIGERLAB_CLI_HPP
#define LIGERLAB_CLI_HPP

// Operator surface: gen, trace, train, eval, ablate, reduce, stability and
// name subcommands, plus the experiment drivers they share.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ligerlab/datasets.hpp"
#include "ligerlab/embedder.hpp"
#include "ligerlab/seqdec.hpp"
#include "ligerlab/transforms.hpp"

namespace ligerlab::cli {

namespace fs = std::filesystem;

struct RunConfig {
  std::string subcommand;
  std::string corpus;
  std::string traces;
  std::string ckpt;
  std::string report = "reports";
  std::string output;
  std::string task = "classify";
  std::uint64_t seed = 1;
  std::string ablation = "full";
  std::size_t keep_concretes = 0;
  bool min_set = false;
  std::size_t epochs = 30;
  std::size_t batch = 8;
  std::size_t hidden = 64;
  std::size_t embed = 64;
  double lr = 3e-3;
  std::size_t patience = 0;  // 0 selects the task default
  std::string cell = "gated";
  std::size_t variants = 0;  // 0 selects the task default
  std::size_t max_name_length = 8;

  nlohmann::json to_json() const {
    return {{"subcommand", subcommand}, {"corpus", corpus},     {"traces", traces},
            {"ckpt", ckpt},             {"report", report},     {"output", output},
            {"task", task},             {"seed", seed},         {"ablation", ablation},
            {"keep_concretes", keep_concretes}, {"min_set", min_set}, {"epochs", epochs},
            {"batch", batch},           {"hidden", hidden},     {"embed", embed},
            {"lr", lr},                 {"patience", patience},  {"cell", cell},         {"variants", variants}, {"max_name_length", max_name_length}};
  }

  model::ModelConfig model_config(std::size_t labels, std::size_t n_eps) const {
    model::ModelConfig c;
    c.hidden = hidden;
    c.embed = embed;
    c.ablation = model::parse_ablation(ablation);
    c.cell = cell == "gated" ? model::CellKind::Gated : model::CellKind::Vanilla;
    c.n_eps = n_eps;
    c.labels = labels;
    return c;
  }
  model::TrainConfig train_config() const {
    model::TrainConfig t;
    t.epochs = epochs;
    t.batch = batch;
    t.lr = lr;
    t.patience = patience ? patience : subcommand == "name" ? epochs : t.patience;
    t.seed = substream_seed(seed, "init");
    t.threads = worker_threads();
    return t;
  }
};

// ---------------------------------------------------------------------------
// Experiment drivers

/// Vocabulary over statement tokens and state values of the training split.
inline model::Vocab build_vocab(const data::Corpus& corpus, const data::TraceStore& store) {
  std::set<std::string> tokens;
  for (const auto& e : corpus.manifest.entries) {
    if (e.split != data::Split::Train) continue;
    const auto* pt = store.find(e.program_id);
    if (!pt) continue;
    auto prog = minilang::parse(corpus.source(e.program_id));
    for (const auto& s : prog.statements) tokens.insert(s.tokens.begin(), s.tokens.end());
    for (const auto& path : pt->paths)
      for (const auto& pair : path.blended.pairs)
        for (const auto& st : pair.states)
          for (auto& t : model::state_tokens(st)) tokens.insert(t);
  }
  return model::Vocab::from_tokens(tokens);
}

struct SplitData {
  std::vector<model::EncodedProgram> items;
  std::vector<std::string> labels;  // gold label or name per item
};

/// Encodes the traced programs of one split; dropped programs are skipped.
inline SplitData encode_split(const data::Corpus& corpus, const data::TraceStore& store, const model::Vocab& vocab,
                              const model::ModelConfig& cfg, data::Split split) {
  SplitData out;
  std::map<std::string, const traces::ProgramTraces*> by_id;
  for (const auto& p : store.programs) by_id[p.program_id] = &p;
  for (const auto& e : corpus.manifest.entries) {
    if (e.split != split) continue;
    auto it = by_id.find(e.program_id);
    if (it == by_id.end()) continue;
    auto prog = minilang::parse(corpus.source(e.program_id));
    auto ep = model::encode_program(prog, *it->second, vocab, cfg);
    ep.label = corpus.manifest.spec.task == data::Task::Classify ? corpus.manifest.label_index(e.label) : 0;
    out.items.push_back(std::move(ep));
    out.labels.push_back(e.label);
  }
  return out;
}

inline std::uint64_t model_hash(const model::ModelConfig& cfg, std::uint64_t vocab_hash, std::uint64_t extra) {
  Fnv1a h;
  h.u64(cfg.hash()).u64(vocab_hash).u64(extra);
  return h.value();
}

struct ClassifyRun {
  model::Vocab vocab;
  model::ModelConfig config;
  std::unique_ptr<model::Classifier> model;
  model::TrainResult history;
  model::ClassificationScore test;
  std::vector<std::string> test_ids;
  std::vector<std::size_t> test_gold, test_pred;
};

inline void evaluate_test(ClassifyRun& run, const data::Corpus& corpus, const data::TraceStore& store, int threads) {
  auto test = encode_split(corpus, store, run.vocab, run.config, data::Split::Test);
  run.test_ids.clear();
  run.test_gold.clear();
  for (const auto& ep : test.items) {
    run.test_ids.push_back(ep.program_id);
    run.test_gold.push_back(ep.label);
  }
  run.test = model::evaluate(*run.model, test.items, threads, &run.test_pred);
}

/// Trains a classifier on the train split (early stopping on valid) and
/// scores it on the test split.
inline ClassifyRun run_classification(const data::Corpus& corpus, const data::TraceStore& store,
                                      const model::ModelConfig& cfg, const model::TrainConfig& tc) {
  if (corpus.manifest.spec.task != data::Task::Classify) throw Error("corpus is not a classification corpus");
  ClassifyRun run;
  run.vocab = build_vocab(corpus, store);
  run.config = cfg;
  run.config.labels = corpus.manifest.spec.labels.size();
  auto train = encode_split(corpus, store, run.vocab, run.config, data::Split::Train);
  auto valid = encode_split(corpus, store, run.vocab, run.config, data::Split::Valid);
  run.model = std::make_unique<model::Classifier>(run.config, run.vocab.size());
  run.history = model::train_classifier(*run.model, train.items, valid.items, tc);
  evaluate_test(run, corpus, store, tc.threads);
  return run;
}

struct NameRun {
  model::Vocab vocab;
  names::NameVocab name_vocab;
  model::ModelConfig config;
  std::unique_ptr<names::NameModel> model;
  names::NameTrainResult history;
  names::NameEvaluation test;
};

inline std::vector<names::NameSample> name_samples(const SplitData& d, const names::NameVocab& nv) {
  std::vector<names::NameSample> out;
  for (std::size_t i = 0; i < d.items.size(); ++i) out.push_back({d.items[i], d.labels[i], nv.encode_name(d.labels[i])});
  return out;
}

inline names::NameVocab build_name_vocab(const data::Corpus& corpus) {
  std::vector<std::string> train_names;
  for (const auto& e : corpus.manifest.entries)
    if (e.split == data::Split::Train) train_names.push_back(e.label);
  return names::NameVocab::from_names(train_names);
}

inline NameRun run_naming(const data::Corpus& corpus, const data::TraceStore& store, const model::ModelConfig& cfg,
                          const model::TrainConfig& tc, std::size_t max_len) {
  if (corpus.manifest.spec.task != data::Task::Name) throw Error("corpus is not a naming corpus");
  NameRun run;
  run.vocab = build_vocab(corpus, store);
  run.name_vocab = build_name_vocab(corpus);
  run.config = cfg;
  auto train = name_samples(encode_split(corpus, store, run.vocab, cfg, data::Split::Train), run.name_vocab);
  auto valid = name_samples(encode_split(corpus, store, run.vocab, cfg, data::Split::Valid), run.name_vocab);
  auto test = name_samples(encode_split(corpus, store, run.vocab, cfg, data::Split::Test), run.name_vocab);
  run.model = std::make_unique<names::NameModel>(cfg, run.vocab.size(), run.name_vocab.size());
  run.history = names::train_name_model(*run.model, run.name_vocab, train, valid, tc, max_len);
  run.test = names::evaluate_names(*run.model, run.name_vocab, test, max_len, tc.threads);
  return run;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { data::write_file(p, j.dump(2) + "\n"); }

inline std::string metrics_csv(const model::TrainResult& r) {
  std::string out = "epoch,loss,acc,f1\n";
  for (const auto& m : r.history)
    out += std::to_string(m.epoch) + "," + fmt(m.train_loss) + "," + fmt(m.valid_accuracy) + "," + fmt(m.valid_macro_f1) + "\n";
  return out;
}

inline std::string name_metrics_csv(const names::NameTrainResult& r) {
  std::string out = "epoch,loss,f1\n";
  for (const auto& m : r.history) out += std::to_string(m.epoch) + "," + fmt(m.train_loss) + "," + fmt(m.valid_f1) + "\n";
  return out;
}

inline std::string predictions_tsv(const ClassifyRun& run, const std::vector<std::string>& labels) {
  std::string out = "program_id\tgold\tpredicted\n";
  for (std::size_t i = 0; i < run.test_ids.size(); ++i)
    out += run.test_ids[i] + "\t" + labels[run.test_gold[i]] + "\t" + labels[run.test_pred[i]] + "\n";
  return out;
}

inline std::string name_predictions_tsv(const names::NameEvaluation& ev) {
  std::string out = "program_id\tgold_name\tpredicted_subwords\tP\tR\tF1\n";
  for (const auto& p : ev.predictions)
    out += p.program_id + "\t" + p.gold_name + "\t" + names::join_subwords(p.predicted, " ") + "\t" + fmt(p.prf.precision) +
           "\t" + fmt(p.prf.recall) + "\t" + fmt(p.prf.f1) + "\n";
  return out;
}

inline bool store_coverage_preserved(const data::TraceStore& s) {
  for (const auto& p : s.programs)
    if (!p.coverage_preserved) return false;
  return true;
}

inline nlohmann::json eval_report(const ClassifyRun& run, const data::TraceStore& store) {
  return {{"accuracy", fmt(run.test.accuracy)},
          {"macro_f1", fmt(run.test.macro_f1)},
          {"test_programs", run.test_ids.size()},
          {"executions", store.executions()},
          {"coverage_preserved", store_coverage_preserved(store)}};
}

// ---------------------------------------------------------------------------
// Checkpoints with a JSON sidecar holding vocabularies and configuration

inline nlohmann::json checkpoint_meta(const std::string& task, const model::ModelConfig& cfg, const model::Vocab& vocab,
                                      const std::vector<std::string>& labels, const names::NameVocab* nv,
                                      std::uint64_t seed) {
  nlohmann::json j = {{"task", task},
                      {"model", cfg.to_json()},
                      {"vocab", vocab.tokens()},
                      {"vocab_hash", hex64(vocab.hash())},
                      {"labels", labels},
                      {"seed", seed}};
  if (nv) j["name_vocab"] = nv->words();
  return j;
}

inline std::uint64_t meta_hash(const model::ModelConfig& cfg, const model::Vocab& vocab, const names::NameVocab* nv) {
  return model_hash(cfg, vocab.hash(), nv ? nv->hash() : 0);
}

inline void save_model(const fs::path& path, const num::ParameterStore& params, const nlohmann::json& meta,
                       std::uint64_t hash, std::uint64_t seed) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  num::save_checkpoint(path.string(), params, {hash, seed});
  write_json(path.string() + ".json", meta);
}

inline nlohmann::json load_meta(const fs::path& ckpt) {
  try {
    return nlohmann::json::parse(data::read_file(ckpt.string() + ".json"));
  } catch (const nlohmann::json::exception& ex) {
    throw Error("unparseable checkpoint sidecar for '" + ckpt.string() + "': " + ex.what());
  }
}

/// Rebuilds the classifier stored at `ckpt` after checking that the data's
/// vocabulary matches the one it was trained with.
inline ClassifyRun load_classifier(const fs::path& ckpt, const data::Corpus& corpus, const data::TraceStore& store) {
  auto meta = load_meta(ckpt);
  if (meta.at("task") != "classify") throw Error("checkpoint '" + ckpt.string() + "' is not a classifier");
  ClassifyRun run;
  run.config = model::ModelConfig::from_json(meta.at("model"));
  run.vocab = model::Vocab(meta.at("vocab").get<std::vector<std::string>>());
  auto data_vocab = build_vocab(corpus, store);
  if (data_vocab.hash() != run.vocab.hash())
    throw Error("vocabulary hash mismatch: checkpoint " + meta.at("vocab_hash").get<std::string>() + ", data " +
                hex64(data_vocab.hash()));
  if (meta.at("labels").get<std::vector<std::string>>() != corpus.manifest.spec.labels)
    throw Error("label set of checkpoint does not match the corpus");
  run.model = std::make_unique<model::Classifier>(run.config, run.vocab.size());
  auto header = num::load_checkpoint(ckpt.string(), run.model->params());
  if (header.config_hash != meta_hash(run.config, run.vocab, nullptr))
    throw Error("checkpoint config hash mismatch for '" + ckpt.string() + "'");
  return run;
}

// ---------------------------------------------------------------------------
// Subcommands

inline void write_config(const RunConfig& rc) {
  write_json(fs::path(rc.report) / (rc.subcommand + "_config.json"), rc.to_json());
}

inline void require(const std::string& value, const std::string& flag, const std::string& cmd) {
  if (value.empty()) throw Error(cmd + ": " + flag + " is required");
}

inline void require_exists(const std::string& path, const std::string& flag) {
  if (!fs::exists(path)) throw Error(flag + " '" + path + "' does not exist");
}

inline data::Corpus open_corpus(const RunConfig& rc) {
  require(rc.corpus, "--corpus", rc.subcommand);
  require_exists(rc.corpus, "--corpus");
  return data::load_corpus(rc.corpus);
}

inline data::TraceStore open_store(const RunConfig& rc) {
  require(rc.traces, "--traces", rc.subcommand);
  require_exists(rc.traces, "--traces");
  return data::load_store(rc.traces);
}

inline int cmd_gen(const RunConfig& rc, std::ostream& log) {
  require(rc.corpus, "--corpus", "gen");
  auto task = data::parse_task(rc.task);
  auto spec = task == data::Task::Classify ? data::CorpusSpec::classification(rc.seed)
                                           : data::CorpusSpec::naming(rc.seed);
  if (rc.variants) spec.variants_per_label = rc.variants;
  auto corpus = data::generate_corpus(spec);
  data::save_corpus(corpus, rc.corpus);
  write_config(rc);
  log << "generated " << corpus.manifest.entries.size() << " programs into " << rc.corpus << "\n";
  return 0;
}

inline int cmd_trace(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  require(rc.traces, "--traces", "trace");
  auto store = data::trace_corpus(corpus, corpus.manifest.spec.budget, rc.seed);
  data::save_store(store, rc.traces);
  auto dropped = nlohmann::json::array();
  for (const auto& d : store.dropped) {
    log << "dropped " << d.program_id << ": " << d.reason << "\n";
    dropped.push_back({{"program_id", d.program_id}, {"reason", d.reason}});
  }
  write_json(fs::path(rc.report) / "trace_report.json",
             {{"programs", corpus.manifest.entries.size()},
              {"retained", store.programs.size()},
              {"executions", store.executions()},
              {"dropped", dropped}});
  write_config(rc);
  log << "traced " << store.programs.size() << " programs (" << store.executions() << " executions)\n";
  return 0;
}

// Shared by train and ablate: fits, checkpoints and writes metrics.
inline ClassifyRun train_and_report(const RunConfig& rc, const data::Corpus& corpus, const data::TraceStore& store,
                                    std::ostream& log) {
  auto cfg = rc.model_config(corpus.manifest.spec.labels.size(), corpus.manifest.spec.budget.n_eps);
  auto run = run_classification(corpus, store, cfg, rc.train_config());
  data::write_file(fs::path(rc.report) / "metrics.csv", metrics_csv(run.history));
  if (!rc.ckpt.empty())
    save_model(rc.ckpt, run.model->params(),
               checkpoint_meta("classify", run.config, run.vocab, corpus.manifest.spec.labels, nullptr, rc.seed),
               meta_hash(run.config, run.vocab, nullptr), rc.seed);
  log << "best epoch " << run.history.best_epoch << ", valid accuracy " << fmt(run.history.best_valid_accuracy) << "\n";
  return run;
}

inline void write_eval(const RunConfig& rc, const ClassifyRun& run, const data::Corpus& corpus,
                       const data::TraceStore& store, std::ostream& log) {
  data::write_file(fs::path(rc.report) / "predictions.tsv", predictions_tsv(run, corpus.manifest.spec.labels));
  write_json(fs::path(rc.report) / "eval_report.json", eval_report(run, store));
  log << "test accuracy " << fmt(run.test.accuracy) << ", macro-F1 " << fmt(run.test.macro_f1) << "\n";
}

inline int cmd_train(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  auto store = open_store(rc);
  require(rc.ckpt, "--ckpt", "train");
  train_and_report(rc, corpus, store, log);
  write_config(rc);
  return 0;
}

inline int cmd_eval(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  auto store = open_store(rc);
  require(rc.ckpt, "--ckpt", "eval");
  require_exists(rc.ckpt, "--ckpt");
  auto run = load_classifier(rc.ckpt, corpus, store);
  evaluate_test(run, corpus, store, worker_threads());
  write_eval(rc, run, corpus, store, log);
  write_config(rc);
  return 0;
}

inline int cmd_ablate(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  auto store = open_store(rc);
  auto run = train_and_report(rc, corpus, store, log);
  write_eval(rc, run, corpus, store, log);
  write_config(rc);
  return 0;
}

inline int cmd_reduce(const RunConfig& rc, std::ostream& log) {
  auto store = open_store(rc);
  require(rc.output, "--output", "reduce");
  data::ReductionStats st;
  auto reduced = data::reduce_store(store, rc.keep_concretes, rc.min_set, substream_seed(rc.seed, "reduce"), &st);
  data::save_store(reduced, rc.output);
  double ratio = st.executions_before ? 1.0 - static_cast<double>(st.executions_after) / static_cast<double>(st.executions_before) : 0.0;
  write_json(fs::path(rc.report) / "reduce_report.json",
             {{"keep_concretes", rc.keep_concretes},
              {"min_set", rc.min_set},
              {"executions_before", st.executions_before},
              {"executions_after", st.executions_after},
              {"execution_reduction", fmt(ratio)},
              {"paths_before", st.paths_before},
              {"paths_after", st.paths_after},
              {"coverage_preserved", st.coverage_preserved}});
  write_config(rc);
  log << "executions " << st.executions_before << " -> " << st.executions_after << ", coverage preserved "
      << (st.coverage_preserved ? "true" : "false") << "\n";
  return 0;
}

/// Prediction-stability rows for every transform over the test split.
inline std::vector<transforms::StabilityReport> stability(const ClassifyRun& run, const data::Corpus& corpus,
                                                          const data::TraceStore& store, std::uint64_t seed) {
  const auto& spec = corpus.manifest.spec;
  std::map<std::string, std::uint64_t> seeds;
  for (const auto& e : corpus.manifest.entries) seeds[e.program_id] = e.seed;
  transforms::Predictor predict = [&](const std::string& id, const minilang::Program& p) -> std::optional<std::size_t> {
    auto out = data::trace_program(id, p, spec.budget, spec.inputs, substream_seed(seed, "inputs", seeds.at(id)));
    if (!out.traces) return std::nullopt;
    return run.model->predict(model::encode_program(p, *out.traces, run.vocab, run.config));
  };
  std::vector<transforms::StabilityItem> items;
  for (const auto& e : corpus.manifest.entries)
    if (e.split == data::Split::Test && store.find(e.program_id))
      items.push_back({e.program_id, minilang::parse(corpus.source(e.program_id))});
  std::vector<transforms::StabilityReport> out;
  for (const auto& k : transforms::TransformKind::all()) out.push_back(transforms::measure_stability(predict, items, k));
  return out;
}

inline int cmd_stability(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  auto store = open_store(rc);
  require(rc.ckpt, "--ckpt", "stability");
  require_exists(rc.ckpt, "--ckpt");
  auto run = load_classifier(rc.ckpt, corpus, store);
  std::string csv = "transform,applicable,changed,fraction\n";
  for (const auto& r : stability(run, corpus, store, rc.seed)) {
    csv += r.transform + "," + std::to_string(r.applicable) + "," + std::to_string(r.changed) + "," + fmt(r.fraction()) + "\n";
    log << r.transform << ": " << r.changed << "/" << r.applicable << " predictions changed\n";
  }
  data::write_file(fs::path(rc.report) / "stability.csv", csv);
  write_config(rc);
  return 0;
}

inline int cmd_name(const RunConfig& rc, std::ostream& log) {
  auto corpus = open_corpus(rc);
  auto store = open_store(rc);
  auto cfg = rc.model_config(1, corpus.manifest.spec.budget.n_eps);
  auto run = run_naming(corpus, store, cfg, rc.train_config(), rc.max_name_length);
  data::write_file(fs::path(rc.report) / "metrics.csv", name_metrics_csv(run.history));
  data::write_file(fs::path(rc.report) / "predictions.tsv", name_predictions_tsv(run.test));
  auto micro = run.test.micro();
  write_json(fs::path(rc.report) / "name_report.json",
             {{"precision", fmt(micro.precision)}, {"recall", fmt(micro.recall)}, {"f1", fmt(micro.f1)},
              {"test_programs", run.test.predictions.size()}});
  if (!rc.ckpt.empty())
    save_model(rc.ckpt, run.model->params(),
               checkpoint_meta("name", run.config, run.vocab, corpus.manifest.spec.labels, &run.name_vocab, rc.seed),
               meta_hash(run.config, run.vocab, &run.name_vocab), rc.seed);
  write_config(rc);
  log << "test sub-token P " << fmt(micro.precision) << " R " << fmt(micro.recall) << " F1 " << fmt(micro.f1) << "\n";
  return 0;
}

inline int dispatch(const RunConfig& rc, std::ostream& log) {
  if (rc.subcommand == "gen") return cmd_gen(rc, log);
  if (rc.subcommand == "trace") return cmd_trace(rc, log);
  if (rc.subcommand == "train") return cmd_train(rc, log);
  if (rc.subcommand == "eval") return cmd_eval(rc, log);
  if (rc.subcommand == "ablate") return cmd_ablate(rc, log);
  if (rc.subcommand == "reduce") return cmd_reduce(rc, log);
  if (rc.subcommand == "stability") return cmd_stability(rc, log);
  if (rc.subcommand == "name") return cmd_name(rc, log);
  throw Error("unknown subcommand '" + rc.subcommand + "'");
}

/// Parses `args` (without the program name) and runs the subcommand.
/// Returns the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"ligerlab: blended-trace program embeddings"};
  app.require_subcommand(1);
  RunConfig rc;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--corpus", rc.corpus, "corpus directory");
    sub->add_option("--traces", rc.traces, "blended-trace store (JSON lines)");
    sub->add_option("--ckpt", rc.ckpt, "checkpoint path");
    sub->add_option("--report", rc.report, "report directory");
    sub->add_option("--seed", rc.seed, "root seed");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--ablation", rc.ablation, "full|static|dynamic|noattn")
        ->check(CLI::IsMember({"full", "static", "dynamic", "noattn"}));
    sub->add_option("--epochs", rc.epochs)->check(CLI::PositiveNumber);
    sub->add_option("--batch", rc.batch)->check(CLI::PositiveNumber);
    sub->add_option("--hidden", rc.hidden)->check(CLI::PositiveNumber);
    sub->add_option("--embed", rc.embed)->check(CLI::PositiveNumber);
    sub->add_option("--lr", rc.lr)->check(CLI::PositiveNumber);
    sub->add_option("--patience", rc.patience, "early-stopping patience (0: task default)");
    sub->add_option("--cell", rc.cell, "gated|vanilla")->check(CLI::IsMember({"gated", "vanilla"}));
  };
  std::vector<std::pair<std::string, CLI::App*>> subs;
  auto gen = app.add_subcommand("gen", "generate a synthetic corpus");
  add_common(gen);
  gen->add_option("--task", rc.task, "classify|name")->check(CLI::IsMember({"classify", "name"}));
  gen->add_option("--variants", rc.variants, "variants per label");
  subs.emplace_back("gen", gen);
  auto trace = app.add_subcommand("trace", "collect blended traces");
  add_common(trace);
  subs.emplace_back("trace", trace);
  const std::pair<const char*, const char*> model_subs[] = {
      {"train", "train a classifier and write a checkpoint"},
      {"eval", "score a checkpoint on the test split"},
      {"ablate", "train and evaluate one ablation"},
      {"stability", "measure prediction stability under transforms"},
      {"name", "train and evaluate the name decoder"}};
  for (const auto& [name, help] : model_subs) {
    auto sub = app.add_subcommand(name, help);
    add_common(sub);
    add_model(sub);
    if (std::string(name) == "name") sub->add_option("--max-name-length", rc.max_name_length)->check(CLI::PositiveNumber);
    subs.emplace_back(name, sub);
  }
  auto reduce = app.add_subcommand("reduce", "reduce a trace store");
  add_common(reduce);
  reduce->add_option("--keep-concretes", rc.keep_concretes, "concrete runs kept per path (0 keeps all)");
  reduce->add_flag("--min-set", rc.min_set, "keep a coverage-minimal set of paths");
  reduce->add_option("--output", rc.output, "reduced store path");
  subs.emplace_back("reduce", reduce);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, log, err);
  }
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) rc.subcommand = name;
  try {
    return dispatch(rc, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ligerlab::cli

#endif  // LIGERLAB_CLI_HPP
