#ifndef LIGERLAB_EMBEDDER_HPP
#define LIGERLAB_EMBEDDER_HPP

// The blended-trace program encoder: vocabulary embedding, the fusion layer
// (statement RNN, state RNN, attention over the two feature dimensions), the
// executions RNN over fused steps, max-pooling into a program embedding, and
// a softmax classifier head. Ablation modes drop one dimension or the
// attention.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ligerlab/minilang.hpp"
#include "ligerlab/numcore.hpp"
#include "ligerlab/trace_model.hpp"
#include "ligerlab/util.hpp"

namespace ligerlab::model {

using num::Graph;
using num::Tensor;
using num::Var;

// ---------------------------------------------------------------------------
// Vocabulary over code tokens and state values

inline constexpr const char* kPad = "<pad>";
inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kBottom = "<bot>";
inline constexpr const char* kBegin = "<begin>";
inline constexpr const char* kEnd = "<end>";
inline constexpr std::int64_t kValueClamp = 64;

inline void append_value_tokens(const minilang::Value& v, std::vector<std::string>& out) {
  auto int_token = [](std::int64_t x) -> std::string {
    if (x < -kValueClamp || x > kValueClamp) return kUnk;
    return std::to_string(x);
  };
  if (v.is_bottom()) out.push_back(kBottom);
  else if (v.is_int()) out.push_back(int_token(v.as_int()));
  else if (v.is_bool()) out.push_back(v.as_bool() ? "true" : "false");
  else {
    out.push_back("[");
    for (auto x : v.as_array()) out.push_back(int_token(x));
    out.push_back("]");
  }
}

/// Value tokens of a whole state, variables in declaration order.
inline std::vector<std::string> state_tokens(const minilang::ProgramState& s) {
  std::vector<std::string> out;
  for (const auto& v : s.values) append_value_tokens(v, out);
  return out;
}

class Vocab {
 public:
  Vocab() {
    for (const char* s : {kPad, kUnk, kBottom, kBegin, kEnd}) add(s);
  }
  explicit Vocab(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
    if (tokens.size() < 5 || tokens[0] != kPad || tokens[1] != kUnk)
      throw Error("vocabulary must start with the special tokens");
  }

  /// Adds every token in sorted order after the specials.
  static Vocab from_tokens(const std::set<std::string>& tokens) {
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  std::size_t add(const std::string& t) {
    auto [it, inserted] = index_.try_emplace(t, tokens_.size());
    if (inserted) tokens_.push_back(t);
    return it->second;
  }
  std::size_t index(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? unk() : it->second;
  }
  bool contains(const std::string& t) const { return index_.count(t) > 0; }
  std::size_t unk() const { return 1; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::uint64_t hash() const {
    Fnv1a h;
    for (const auto& t : tokens_) h.str(t);
    return h.value();
  }
  std::vector<std::size_t> encode(const std::vector<std::string>& toks) const {
    std::vector<std::size_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(index(t));
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class Ablation { Full, StaticOnly, DynamicOnly, NoAttention };

inline std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::StaticOnly: return "static";
    case Ablation::DynamicOnly: return "dynamic";
    case Ablation::NoAttention: return "noattn";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "static" || s == "static_only") return Ablation::StaticOnly;
  if (s == "dynamic" || s == "dynamic_only") return Ablation::DynamicOnly;
  if (s == "noattn" || s == "no_attention") return Ablation::NoAttention;
  throw Error("unknown ablation '" + s + "' (expected full|static|dynamic|noattn)");
}

enum class CellKind { Vanilla, Gated };

struct ModelConfig {
  std::size_t hidden = 100;
  std::size_t embed = 100;
  Ablation ablation = Ablation::Full;
  std::size_t n_eps = 5;
  std::size_t max_trace_length = 200;
  std::size_t max_paths = 18;
  std::size_t labels = 2;
  CellKind cell = CellKind::Vanilla;

  void validate() const {
    if (hidden == 0 || embed == 0 || n_eps == 0 || max_trace_length == 0 || max_paths == 0 || labels == 0)
      throw Error("model config: dimensions and limits must be positive");
  }

  nlohmann::json to_json() const {
    return {{"hidden", hidden},
            {"embed", embed},
            {"ablation", ablation_name(ablation)},
            {"n_eps", n_eps},
            {"max_trace_length", max_trace_length},
            {"max_paths", max_paths},
            {"labels", labels},
            {"cell", cell == CellKind::Vanilla ? "vanilla" : "gated"}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.hidden = j.at("hidden");
    c.embed = j.at("embed");
    c.ablation = parse_ablation(j.at("ablation"));
    c.n_eps = j.at("n_eps");
    c.max_trace_length = j.at("max_trace_length");
    c.max_paths = j.at("max_paths");
    c.labels = j.at("labels");
    c.cell = j.value("cell", "vanilla") == "gated" ? CellKind::Gated : CellKind::Vanilla;
    return c;
  }
  std::uint64_t hash() const { return hash_string(to_json().dump()); }
};

// ---------------------------------------------------------------------------
// Recurrent cells

/// Parameter indices of one recurrent layer. Vanilla cells follow
/// h_t = tanh(W x_t + V h_{t-1}); gated cells add update/reset gates.
struct RnnParams {
  CellKind kind = CellKind::Vanilla;
  std::size_t W = 0, V = 0;
  std::size_t Wz = 0, Vz = 0, Wr = 0, Vr = 0;

  static RnnParams create(num::ParameterStore& store, const std::string& prefix, CellKind kind,
                          std::size_t in, std::size_t hidden) {
    RnnParams p;
    p.kind = kind;
    p.W = store.add(prefix + ".W", {hidden, in});
    p.V = store.add(prefix + ".V", {hidden, hidden});
    if (kind == CellKind::Gated) {
      p.Wz = store.add(prefix + ".Wz", {hidden, in});
      p.Vz = store.add(prefix + ".Vz", {hidden, hidden});
      p.Wr = store.add(prefix + ".Wr", {hidden, in});
      p.Vr = store.add(prefix + ".Vr", {hidden, hidden});
    }
    return p;
  }

  /// Input projections x·W^T (one per gate), computed once per batch or
  /// once per vocabulary row.
  struct Inputs {
    Var w, z, r;
  };

  Inputs project(Graph& g, Var x) const {
    Inputs in{g.matmul_t(x, g.param(W)), {}, {}};
    if (kind == CellKind::Gated) {
      in.z = g.matmul_t(x, g.param(Wz));
      in.r = g.matmul_t(x, g.param(Wr));
    }
    return in;
  }

  static Inputs gather(Graph& g, const Inputs& table, const std::vector<std::size_t>& rows) {
    Inputs in{g.gather_rows(table.w, rows), {}, {}};
    if (table.z.valid()) {
      in.z = g.gather_rows(table.z, rows);
      in.r = g.gather_rows(table.r, rows);
    }
    return in;
  }

  /// One step from projected inputs; h is (B x hidden).
  Var step_projected(Graph& g, const Inputs& x, Var h) const {
    if (kind == CellKind::Vanilla) return g.tanh(g.add(x.w, g.matmul_t(h, g.param(V))));
    Var z = g.sigmoid(g.add(x.z, g.matmul_t(h, g.param(Vz))));
    Var r = g.sigmoid(g.add(x.r, g.matmul_t(h, g.param(Vr))));
    Var n = g.tanh(g.add(x.w, g.matmul_t(g.mul(r, h), g.param(V))));
    // h' = n + z * (h - n)
    Var diff = g.add(h, g.scale(n, -1.0));
    return g.add(n, g.mul(z, diff));
  }

  /// One step for a batch: x is (B x in), h is (B x hidden).
  Var step(Graph& g, Var x, Var h) const { return step_projected(g, project(g, x), h); }
};

/// Final hidden states of `rnn` over each token sequence (one row each).
/// Sequences sharing a prefix share its hidden states: the sequences are
/// merged into a prefix trie that is evaluated one depth at a time.
inline Var encode_sequences(Graph& g, const RnnParams& rnn, Var embedding,
                            const std::vector<std::vector<std::size_t>>& seqs, std::size_t hidden) {
  if (seqs.empty()) throw Error("encode_sequences: no sequences");
  for (const auto& s : seqs)
    if (s.empty()) throw Error("encode_sequences: empty sequence");
  struct Level {
    std::vector<std::size_t> tokens, parents;
  };
  std::vector<Level> levels;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> child;  // (depth, parent, token) -> row
  std::vector<std::pair<std::size_t, std::size_t>> terminal;         // (depth, row) per sequence
  for (const auto& s : seqs) {
    std::size_t parent = 0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (levels.size() <= t) levels.emplace_back();
      auto& lv = levels[t];
      auto [it, fresh] = child.try_emplace({t, parent, s[t]}, lv.tokens.size());
      if (fresh) {
        lv.tokens.push_back(s[t]);
        lv.parents.push_back(parent);
      }
      parent = it->second;
    }
    terminal.emplace_back(s.size() - 1, parent);
  }
  // project only the vocabulary rows that occur
  std::map<std::size_t, std::size_t> compact;
  for (const auto& lv : levels)
    for (auto tok : lv.tokens) compact.try_emplace(tok, 0);
  std::vector<std::size_t> used;
  for (auto& [tok, idx] : compact) {
    idx = used.size();
    used.push_back(tok);
  }
  for (auto& lv : levels)
    for (auto& tok : lv.tokens) tok = compact.at(tok);
  RnnParams::Inputs table = rnn.project(g, g.gather_rows(embedding, std::move(used)));
  std::vector<Var> states;
  std::vector<std::size_t> offset;
  std::size_t total = 0;
  for (std::size_t t = 0; t < levels.size(); ++t) {
    const auto& lv = levels[t];
    Var prev = t == 0 ? g.constant(Tensor::matrix(lv.tokens.size(), hidden)) : g.gather_rows(states.back(), lv.parents);
    states.push_back(rnn.step_projected(g, RnnParams::gather(g, table, lv.tokens), prev));
    offset.push_back(total);
    total += lv.tokens.size();
  }
  std::vector<std::size_t> rows;
  rows.reserve(seqs.size());
  for (auto [depth, row] : terminal) rows.push_back(offset[depth] + row);
  Var all = states.size() == 1 ? states[0] : g.concat_rows(states);
  return g.gather_rows(all, std::move(rows));
}

// ---------------------------------------------------------------------------
// Encoder

/// a1: one tanh hidden layer over (candidate ⊕ flow state), then a scalar.
struct ScorerParams {
  std::size_t Wc = 0, Wh = 0, b = 0, u = 0;
  static ScorerParams create(num::ParameterStore& store, const std::string& prefix, std::size_t cand,
                             std::size_t ctx, std::size_t hidden) {
    return {store.add(prefix + ".Wc", {hidden, cand}), store.add(prefix + ".Wh", {hidden, ctx}),
            store.add(prefix + ".b", {1, hidden}), store.add(prefix + ".u", {1, hidden})};
  }
  /// Scores (1 x n) for candidates whose Wc-projections are `projected` (n x hidden).
  Var scores(Graph& g, Var projected, Var context) const {
    Var ctx = g.add(g.matmul_t(context, g.param(Wh)), g.param(b));
    Var hid = g.tanh(g.add_row(projected, ctx));
    return g.matmul_t(g.param(u), hid);
  }
};

/// Token ids of one program's blended traces, with statements and states
/// de-duplicated so each distinct one is encoded once.
struct EncodedProgram {
  std::string program_id;
  std::size_t label = 0;
  std::vector<std::vector<std::size_t>> statement_seqs;
  std::vector<std::vector<std::size_t>> state_seqs;
  struct Path {
    std::vector<std::size_t> statements;           // row into statement_seqs per step
    std::vector<std::vector<std::size_t>> states;  // rows into state_seqs per step
  };
  std::vector<Path> paths;
};

inline EncodedProgram encode_program(const minilang::Program& prog, const traces::ProgramTraces& pt,
                                     const Vocab& vocab, const ModelConfig& cfg) {
  if (pt.paths.empty()) throw Error("program '" + pt.program_id + "' has no traces");
  EncodedProgram ep;
  ep.program_id = pt.program_id;
  std::map<minilang::StatementId, std::size_t> stmt_rows;
  std::map<std::vector<std::size_t>, std::size_t> state_rows;
  std::size_t n_paths = std::min(cfg.max_paths, pt.paths.size());
  for (std::size_t pi = 0; pi < n_paths; ++pi) {
    const auto& bt = pt.paths[pi].blended;
    EncodedProgram::Path path;
    std::size_t len = std::min(cfg.max_trace_length, bt.pairs.size());
    for (std::size_t j = 0; j < len; ++j) {
      const auto& pair = bt.pairs[j];
      if (pair.statement < 0 || static_cast<std::size_t>(pair.statement) >= prog.statements.size())
        throw Error("trace of '" + pt.program_id + "' references unknown statement " +
                    std::to_string(pair.statement));
      auto [sit, s_new] = stmt_rows.try_emplace(pair.statement, ep.statement_seqs.size());
      if (s_new) ep.statement_seqs.push_back(vocab.encode(prog.statements[static_cast<std::size_t>(pair.statement)].tokens));
      path.statements.push_back(sit->second);
      std::vector<std::size_t> rows;
      for (const auto& st : pair.states) {
        auto ids = vocab.encode(state_tokens(st));
        if (ids.empty()) ids.push_back(vocab.index(kBottom));
        auto [it, inserted] = state_rows.try_emplace(ids, ep.state_seqs.size());
        if (inserted) ep.state_seqs.push_back(std::move(ids));
        rows.push_back(it->second);
      }
      path.states.push_back(std::move(rows));
    }
    ep.paths.push_back(std::move(path));
  }
  return ep;
}

struct FuseResult {
  Var output;
  std::vector<double> weights;  // statement weight first (when present), then states
};

struct EncoderOutput {
  Var program_embedding;                   // H_P (1 x hidden)
  std::vector<Var> trace_embeddings;       // H^e_i per path
  std::vector<std::vector<Var>> prefixes;  // H^e_{i_j} per path and step
  std::vector<std::vector<std::vector<double>>> attention;  // per path, step
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& cfg, std::size_t vocab_size, num::ParameterStore& store) : cfg_(cfg) {
    cfg.validate();
    emb_ = store.add("embedding", {vocab_size, cfg.embed});
    rnn1_ = RnnParams::create(store, "rnn1", cfg.cell, cfg.embed, cfg.hidden);
    rnn2_ = RnnParams::create(store, "rnn2", cfg.cell, cfg.embed, cfg.hidden);
    rnn3_ = RnnParams::create(store, "rnn3", cfg.cell, cfg.hidden, cfg.hidden);
    a1_ = ScorerParams::create(store, "a1", cfg.hidden, cfg.hidden, cfg.hidden);
  }

  const ModelConfig& config() const { return cfg_; }
  const RnnParams& statement_rnn() const { return rnn1_; }
  const RnnParams& state_rnn() const { return rnn2_; }
  const RnnParams& flow_rnn() const { return rnn3_; }
  const ScorerParams& scorer() const { return a1_; }
  std::size_t embedding() const { return emb_; }

  Var encode_statement(Graph& g, const std::vector<std::size_t>& tokens) const {
    if (tokens.empty()) throw Error("encode_statement: empty token sequence");
    return encode_sequences(g, rnn1_, g.param(emb_), {tokens}, cfg_.hidden);
  }
  Var encode_state(Graph& g, const std::vector<std::size_t>& value_tokens) const {
    if (value_tokens.empty()) throw Error("encode_state: empty state");
    return encode_sequences(g, rnn2_, g.param(emb_), {value_tokens}, cfg_.hidden);
  }

  /// Fuses one ordered pair. `h_states` stacks the state vectors as rows;
  /// `flow_prev` is invalid for the first pair of a trace.
  FuseResult fuse_step(Graph& g, Var h_stmt, Var h_states, Var flow_prev) const {
    std::size_t n_states = h_states.valid() ? g.value(h_states).rows() : 0;
    if (h_stmt.valid() && g.value(h_stmt).cols() != cfg_.hidden) throw Error("fuse_step: statement vector has wrong dimension");
    if (n_states && g.value(h_states).cols() != cfg_.hidden) throw Error("fuse_step: state vectors have wrong dimension");
    if (flow_prev.valid() && g.value(flow_prev).cols() != cfg_.hidden) throw Error("fuse_step: flow state has wrong dimension");
    Var cand;
    Var proj;
    switch (cfg_.ablation) {
      case Ablation::StaticOnly:
        return {h_stmt, {1.0}};
      case Ablation::DynamicOnly:
        if (!n_states) throw Error("fuse_step: dynamic mode needs state vectors");
        cand = h_states;
        break;
      default:
        if (!n_states) throw Error("fuse_step: no state vectors");
        cand = g.concat_rows({h_stmt, h_states});
        break;
    }
    if (cfg_.ablation != Ablation::NoAttention && flow_prev.valid())
      proj = g.matmul_t(cand, g.param(a1_.Wc));
    return weigh(g, cand, proj, flow_prev);
  }

  /// Runs the whole encoder over one program.
  EncoderOutput encode(Graph& g, const EncodedProgram& ep, bool record_attention = false) const {
    if (ep.paths.empty()) throw Error("encode: program has no blended traces");
    Var emb = g.param(emb_);
    const bool use_stmt = cfg_.ablation != Ablation::DynamicOnly;
    const bool use_states = cfg_.ablation != Ablation::StaticOnly;
    const bool attend = cfg_.ablation == Ablation::Full || cfg_.ablation == Ablation::DynamicOnly;
    Var S, Z, PS, PZ;
    if (use_stmt) S = encode_sequences(g, rnn1_, emb, ep.statement_seqs, cfg_.hidden);
    if (use_states) Z = encode_sequences(g, rnn2_, emb, ep.state_seqs, cfg_.hidden);
    if (attend) {
      Var Wc = g.param(a1_.Wc);
      if (use_stmt) PS = g.matmul_t(S, Wc);
      PZ = g.matmul_t(Z, Wc);
    }
    EncoderOutput out;
    for (const auto& path : ep.paths) {
      if (path.statements.empty()) throw Error("encode: empty blended trace");
      Var flow;
      std::vector<Var> prefixes;
      std::vector<std::vector<double>> weights;
      for (std::size_t j = 0; j < path.statements.size(); ++j) {
        Var fused;
        if (!use_states) {
          fused = g.gather_rows(S, {path.statements[j]});
          if (record_attention) weights.push_back({1.0});
        } else {
          const auto& rows = path.states[j];
          Var cand, proj;
          if (use_stmt) {
            cand = g.concat_rows({g.gather_rows(S, {path.statements[j]}), g.gather_rows(Z, rows)});
            if (attend && flow.valid())
              proj = g.concat_rows({g.gather_rows(PS, {path.statements[j]}), g.gather_rows(PZ, rows)});
          } else {
            cand = g.gather_rows(Z, rows);
            if (flow.valid()) proj = g.gather_rows(PZ, rows);
          }
          FuseResult fr = weigh(g, cand, proj, flow);
          fused = fr.output;
          if (record_attention) weights.push_back(std::move(fr.weights));
        }
        flow = rnn3_.step(g, fused, flow.valid() ? flow : g.constant(Tensor::matrix(1, cfg_.hidden)));
        prefixes.push_back(flow);
      }
      out.trace_embeddings.push_back(flow);
      out.prefixes.push_back(std::move(prefixes));
      if (record_attention) out.attention.push_back(std::move(weights));
    }
    out.program_embedding = pool_program(g, out.trace_embeddings);
    return out;
  }

  /// Element-wise max over trace embeddings.
  static Var pool_program(Graph& g, const std::vector<Var>& traces) {
    if (traces.empty()) throw Error("pool_program: no trace embeddings");
    if (traces.size() == 1) return traces[0];
    return g.max_elementwise(traces);
  }

 private:
  // Attention (or uniform) weighting of candidate rows. Uniform when there
  // is no previous flow state or attention is ablated.
  FuseResult weigh(Graph& g, Var cand, Var proj, Var flow_prev) const {
    std::size_t n = g.value(cand).rows();
    if (!proj.valid() || !flow_prev.valid()) {
      Var alpha = g.constant(Tensor::matrix(1, n, 1.0 / static_cast<double>(n)));
      return {g.matmul(alpha, cand), std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }
    Var mu = a1_.scores(g, proj, flow_prev);
    Var alpha = g.softmax(mu);
    return {g.matmul(alpha, cand), g.value(alpha).values()};
  }

  ModelConfig cfg_;
  std::size_t emb_ = 0;
  RnnParams rnn1_, rnn2_, rnn3_;
  ScorerParams a1_;
};

// ---------------------------------------------------------------------------
// Classifier

class Classifier {
 public:
  Classifier(const ModelConfig& cfg, std::size_t vocab_size)
      : cfg_(cfg), encoder_(cfg, vocab_size, params_) {
    Z_ = params_.add("classifier.Z", {cfg.labels, cfg.hidden});
  }

  const ModelConfig& config() const { return cfg_; }
  const Encoder& encoder() const { return encoder_; }
  num::ParameterStore& params() { return params_; }
  const num::ParameterStore& params() const { return params_; }

  /// softmax(Z · H_P) logits, shape 1 x labels.
  Var logits(Graph& g, Var program_embedding) const {
    return g.matmul_t(program_embedding, g.param(Z_));
  }

  Var loss(Graph& g, const EncodedProgram& ep) const {
    auto enc = encoder_.encode(g, ep);
    return g.cross_entropy(logits(g, enc.program_embedding), {ep.label});
  }

  std::vector<double> predict_proba(const EncodedProgram& ep) const {
    Graph g(&params_);
    auto enc = encoder_.encode(g, ep);
    return g.value(g.softmax(logits(g, enc.program_embedding))).values();
  }

  std::size_t predict(const EncodedProgram& ep) const {
    auto p = predict_proba(ep);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

 private:
  ModelConfig cfg_;
  num::ParameterStore params_;
  Encoder encoder_;
  std::size_t Z_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::size_t patience = 5;
  double clip = 5.0;
  double init_limit = 0.08;
  std::uint64_t seed = 1;
  int threads = 1;

  nlohmann::json to_json() const {
    return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"patience", patience},
            {"clip", clip}, {"init_limit", init_limit}, {"seed", seed}};
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_accuracy = 0.0;
  double valid_macro_f1 = 0.0;
  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct ClassificationScore {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Accuracy and macro-F1 over the labels that occur in gold or predictions.
inline ClassificationScore score_predictions(const std::vector<std::size_t>& gold,
                                             const std::vector<std::size_t>& pred) {
  if (gold.size() != pred.size()) throw Error("score_predictions: size mismatch");
  ClassificationScore s;
  if (gold.empty()) return s;
  std::map<std::size_t, std::array<double, 3>> counts;  // tp, fp, fn
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) {
      ++correct;
      counts[gold[i]][0] += 1;
    } else {
      counts[pred[i]][1] += 1;
      counts[gold[i]][2] += 1;
    }
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  double f1 = 0.0;
  for (const auto& [label, c] : counts) {
    double denom = 2 * c[0] + c[1] + c[2];
    f1 += denom > 0 ? 2 * c[0] / denom : 0.0;
  }
  s.macro_f1 = f1 / static_cast<double>(counts.size());
  return s;
}

inline ClassificationScore evaluate(const Classifier& model, const std::vector<EncodedProgram>& data,
                                    int threads = 1, std::vector<std::size_t>* predictions = nullptr) {
  std::vector<std::size_t> gold(data.size()), pred(data.size());
  num::parallel_for(data.size(), threads, [&](std::size_t i, std::size_t) {
    gold[i] = data[i].label;
    pred[i] = model.predict(data[i]);
  });
  if (predictions) *predictions = pred;
  return score_predictions(gold, pred);
}

/// Runs mini-batch training with `loss_fn(graph, item)` building a scalar
/// loss. Per-item gradients are reduced in item order so results do not
/// depend on the thread count. Returns the mean batch loss of the epoch.
template <typename Item, typename LossFn>
double train_epoch(num::ParameterStore& params, num::AdamState& adam, const std::vector<Item>& items,
                   const TrainConfig& tc, std::size_t epoch, LossFn&& loss_fn) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(tc.seed, "batching", epoch);
  shuffle_in_place(order, rng);
  num::Gradients total = params.zeros_like();
  std::vector<num::Gradients> per_item;
  std::vector<double> losses;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += tc.batch) {
    std::size_t end = std::min(order.size(), start + tc.batch);
    std::size_t n = end - start;
    if (per_item.size() < n) per_item.resize(n, params.zeros_like());
    losses.assign(n, 0.0);
    num::parallel_for(n, tc.threads, [&](std::size_t k, std::size_t) {
      num::zero(per_item[k]);
      Graph g(&params);
      Var loss = loss_fn(g, items[order[start + k]]);
      losses[k] = g.value(loss).data[0];
      g.backward(loss, &per_item[k]);
    });
    num::zero(total);
    double batch_loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      batch_loss += losses[k];
      for (std::size_t p = 0; p < total.size(); ++p) {
        auto& dst = total[p].data;
        const auto& src = per_item[k][p].data;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
    double inv = 1.0 / static_cast<double>(n);
    for (auto& g : total)
      for (auto& x : g.data) x *= inv;
    num::clip_global_norm(total, tc.clip);
    num::adam_step(params, total, adam);
    loss_sum += batch_loss * inv;
    ++batches;
  }
  return batches ? loss_sum / static_cast<double>(batches) : 0.0;
}

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_valid_accuracy = 0.0;
};

/// Trains `model` in place; the parameters of the best validation epoch are
/// restored at the end. Stops after `patience` epochs without improvement.
inline TrainResult train_classifier(Classifier& model, const std::vector<EncodedProgram>& train,
                                    const std::vector<EncodedProgram>& valid, const TrainConfig& tc) {
  if (train.empty()) throw Error("train_classifier: empty training set");
  auto& params = model.params();
  params.init_uniform(tc.init_limit, tc.seed);
  num::AdamState adam;
  adam.hyper.lr = tc.lr;
  TrainResult result;
  std::vector<Tensor> best;
  double best_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    double loss = train_epoch(params, adam, train, tc, epoch,
                              [&](Graph& g, const EncodedProgram& ep) { return model.loss(g, ep); });
    ClassificationScore vs = valid.empty() ? ClassificationScore{} : evaluate(model, valid, tc.threads);
    result.history.push_back({epoch, loss, vs.accuracy, vs.macro_f1});
    bool improved = !have_best || vs.accuracy > result.best_valid_accuracy ||
                    (vs.accuracy == result.best_valid_accuracy && loss < best_loss && valid.empty());
    if (improved) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_valid_accuracy = vs.accuracy;
      best_loss = loss;
      best.clear();
      for (std::size_t p = 0; p < params.size(); ++p) best.push_back(params.value(p));
    } else if (epoch - result.best_epoch >= tc.patience) {
      break;
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) params.value(p) = best[p];
  return result;
}

}  // namespace ligerlab::model

#endif  // LIGERLAB_EMBEDDER_HPP
