#ifndef LIGERLAB_SEQDEC_HPP
#define LIGERLAB_SEQDEC_HPP

// Method-name prediction: the blended-trace encoder feeds a decoder RNN that
// attends over every prefix embedding of every blended trace and emits
// sub-words greedily. Also the case-insensitive sub-token P/R/F1 metric.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ligerlab/embedder.hpp"
#include "ligerlab/numcore.hpp"

namespace ligerlab::names {

using model::EncodedProgram;
using num::Graph;
using num::Tensor;
using num::Var;

/// Splits an identifier on underscores, digits/letter changes and camelCase
/// humps, lowercasing every piece. "computeFileDiff" -> compute, file, diff.
inline std::vector<std::string> split_subwords(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(lowercase(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    char c = name[i];
    auto uc = static_cast<unsigned char>(c);
    if (c == '_' || c == '-' || std::isspace(uc)) {
      flush();
      continue;
    }
    if (!cur.empty()) {
      auto prev = static_cast<unsigned char>(cur.back());
      bool hump = std::isupper(uc) && (std::islower(prev) || std::isdigit(prev));
      bool acronym_end = std::isupper(uc) && std::isupper(prev) && i + 1 < name.size() &&
                         std::islower(static_cast<unsigned char>(name[i + 1]));
      bool digit_edge = (std::isdigit(uc) != 0) != (std::isdigit(prev) != 0);
      if (hump || acronym_end || digit_edge) flush();
    }
    cur.push_back(c);
  }
  flush();
  return out;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Multiset sub-word overlap counts.
struct MatchCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    matched += o.matched;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }

  PRF prf() const {
    if (predicted == 0 && gold == 0) return {1.0, 1.0, 1.0};
    PRF r;
    r.precision = predicted ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
    r.recall = gold ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
  }
};

inline MatchCounts match_counts(const std::vector<std::string>& predicted,
                                const std::vector<std::string>& gold) {
  std::map<std::string, std::size_t> bag;
  for (const auto& g : gold) ++bag[lowercase(g)];
  MatchCounts m{0, predicted.size(), gold.size()};
  for (const auto& p : predicted) {
    auto it = bag.find(lowercase(p));
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++m.matched;
    }
  }
  return m;
}

inline PRF subtoken_prf(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  return match_counts(predicted, gold).prf();
}

inline PRF subtoken_prf(std::string_view predicted, std::string_view gold) {
  return subtoken_prf(split_subwords(predicted), split_subwords(gold));
}

inline std::string join_subwords(const std::vector<std::string>& words, const std::string& sep = "_") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? sep : "") + words[i];
  return out;
}

class NameVocab {
 public:
  static constexpr std::size_t kBeginId = 0, kEndId = 1, kUnkId = 2;

  NameVocab() : words_{model::kBegin, model::kEnd, model::kUnk} {}
  explicit NameVocab(const std::vector<std::string>& words) : words_(words) {
    if (words_.size() < 3 || words_[0] != model::kBegin || words_[1] != model::kEnd)
      throw Error("name vocabulary must start with the special tokens");
    for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = i;
  }

  static NameVocab from_names(const std::vector<std::string>& names) {
    std::set<std::string> words;
    for (const auto& n : names)
      for (auto& w : split_subwords(n)) words.insert(w);
    NameVocab v;
    for (const auto& w : words) v.words_.push_back(w);
    for (std::size_t i = 0; i < v.words_.size(); ++i) v.index_[v.words_[i]] = i;
    return v;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  std::size_t index(const std::string& w) const {
    auto it = index_.find(lowercase(w));
    return it == index_.end() ? kUnkId : it->second;
  }
  std::vector<std::size_t> encode_name(std::string_view name) const {
    std::vector<std::size_t> out;
    for (const auto& w : split_subwords(name)) out.push_back(index(w));
    return out;
  }
  std::uint64_t hash() const {
    Fnv1a h;
    for (const auto& w : words_) h.str(w);
    return h.value();
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

struct NameSample {
  EncodedProgram program;
  std::string gold_name;
  std::vector<std::size_t> gold;  // sub-word ids
};

struct AttentionResult {
  Var context;
  std::vector<double> weights;
};

struct DecodeResult {
  std::vector<std::size_t> ids;
  std::vector<std::vector<double>> attention;  // one distribution per emitted step
};

class NameModel {
 public:
  NameModel(const model::ModelConfig& cfg, std::size_t vocab_size, std::size_t name_vocab_size)
      : cfg_(cfg), encoder_(cfg, vocab_size, params_), name_vocab_size_(name_vocab_size) {
    const std::size_t h = cfg.hidden, e = cfg.embed;
    name_emb_ = params_.add("decoder.embedding", {name_vocab_size, e});
    bridge_ = params_.add("decoder.bridge.W", {h, h});
    bridge_b_ = params_.add("decoder.bridge.b", {1, h});
    rnn_ = model::RnnParams::create(params_, "decoder.rnn", cfg.cell, e + h, h);
    a2_ = model::ScorerParams::create(params_, "a2", h, h, h);
    out_ = params_.add("decoder.out.W", {name_vocab_size, 2 * h});
    out_b_ = params_.add("decoder.out.b", {1, name_vocab_size});
  }

  const model::ModelConfig& config() const { return cfg_; }
  const model::Encoder& encoder() const { return encoder_; }
  num::ParameterStore& params() { return params_; }
  const num::ParameterStore& params() const { return params_; }

  /// c_t as the a2-weighted sum over all annotation rows.
  AttentionResult attention_context(Graph& g, Var decoder_prev, Var annotations) const {
    if (g.value(annotations).rows() == 0) throw Error("attention_context: no annotations");
    Var proj = g.matmul_t(annotations, g.param(a2_.Wc));
    return attend(g, decoder_prev, annotations, proj);
  }

  /// Teacher-forced cross entropy over gold sub-words followed by END.
  Var loss(Graph& g, const NameSample& s) const {
    Encoded enc = run_encoder(g, s.program);
    Var h = enc.initial;
    std::vector<Var> logit_rows;
    std::vector<std::size_t> targets;
    std::size_t prev = NameVocab::kBeginId;
    for (std::size_t t = 0; t <= s.gold.size(); ++t) {
      std::size_t target = t < s.gold.size() ? s.gold[t] : NameVocab::kEndId;
      auto [logits, next, weights] = step(g, enc, h, prev);
      (void)weights;
      logit_rows.push_back(logits);
      targets.push_back(target);
      h = next;
      prev = target;
    }
    return g.cross_entropy(g.concat_rows(logit_rows), std::move(targets));
  }

  /// Greedy decoding until END or `max_len` sub-words.
  DecodeResult decode(const EncodedProgram& ep, std::size_t max_len) const {
    if (max_len == 0) throw Error("decode: max_len must be at least 1");
    Graph g(&params_);
    Encoded enc = run_encoder(g, ep);
    DecodeResult out;
    Var h = enc.initial;
    std::size_t prev = NameVocab::kBeginId;
    for (std::size_t t = 0; t < max_len; ++t) {
      auto [logits, next, weights] = step(g, enc, h, prev);
      const auto& row = g.value(logits).data;
      std::size_t best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      out.attention.push_back(std::move(weights));
      if (best == NameVocab::kEndId) break;
      out.ids.push_back(best);
      h = next;
      prev = best;
    }
    return out;
  }

 private:
  struct Encoded {
    Var annotations;
    Var projected;
    Var initial;
  };

  struct StepOut {
    Var logits;
    Var hidden;
    std::vector<double> weights;
  };

  Encoded run_encoder(Graph& g, const EncodedProgram& ep) const {
    auto enc = encoder_.encode(g, ep);
    std::vector<Var> rows;
    for (const auto& path : enc.prefixes) rows.insert(rows.end(), path.begin(), path.end());
    Encoded out;
    out.annotations = rows.size() == 1 ? rows[0] : g.concat_rows(rows);
    out.projected = g.matmul_t(out.annotations, g.param(a2_.Wc));
    out.initial = g.tanh(g.add(g.matmul_t(enc.program_embedding, g.param(bridge_)), g.param(bridge_b_)));
    return out;
  }

  AttentionResult attend(Graph& g, Var decoder_prev, Var annotations, Var projected) const {
    Var alpha = g.softmax(a2_.scores(g, projected, decoder_prev));
    return {g.matmul(alpha, annotations), g.value(alpha).values()};
  }

  StepOut step(Graph& g, const Encoded& enc, Var h_prev, std::size_t prev_word) const {
    auto att = attend(g, h_prev, enc.annotations, enc.projected);
    Var x = g.concat_cols(g.gather_rows(g.param(name_emb_), {prev_word}), att.context);
    Var h = rnn_.step(g, x, h_prev);
    Var logits = g.add(g.matmul_t(g.concat_cols(h, att.context), g.param(out_)), g.param(out_b_));
    return {logits, h, std::move(att.weights)};
  }

  model::ModelConfig cfg_;
  num::ParameterStore params_;
  model::Encoder encoder_;
  std::size_t name_vocab_size_;
  std::size_t name_emb_ = 0, bridge_ = 0, bridge_b_ = 0, out_ = 0, out_b_ = 0;
  model::RnnParams rnn_;
  model::ScorerParams a2_;
};

struct NamePrediction {
  std::string program_id;
  std::string gold_name;
  std::vector<std::string> predicted;
  PRF prf;
};

struct NameEvaluation {
  std::vector<NamePrediction> predictions;
  MatchCounts totals;
  PRF micro() const { return totals.prf(); }
};

inline NameEvaluation evaluate_names(const NameModel& m, const NameVocab& vocab,
                                     const std::vector<NameSample>& data, std::size_t max_len,
                                     int threads = 1) {
  NameEvaluation ev;
  ev.predictions.resize(data.size());
  std::vector<MatchCounts> counts(data.size());
  num::parallel_for(data.size(), threads, [&](std::size_t i, std::size_t) {
    auto dec = m.decode(data[i].program, max_len);
    NamePrediction p;
    p.program_id = data[i].program.program_id;
    p.gold_name = data[i].gold_name;
    for (auto id : dec.ids) p.predicted.push_back(vocab.word(id));
    auto gold = split_subwords(data[i].gold_name);
    counts[i] = match_counts(p.predicted, gold);
    p.prf = counts[i].prf();
    ev.predictions[i] = std::move(p);
  });
  for (const auto& c : counts) ev.totals += c;
  return ev;
}

struct NameEpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  friend bool operator==(const NameEpochMetrics&, const NameEpochMetrics&) = default;
};

struct NameTrainResult {
  std::vector<NameEpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_valid_f1 = 0.0;
};

inline NameTrainResult train_name_model(NameModel& m, const NameVocab& vocab,
                                        const std::vector<NameSample>& train,
                                        const std::vector<NameSample>& valid,
                                        const model::TrainConfig& tc, std::size_t max_len) {
  if (train.empty()) throw Error("train_name_model: empty training set");
  auto& params = m.params();
  params.init_uniform(tc.init_limit, tc.seed);
  num::AdamState adam;
  adam.hyper.lr = tc.lr;
  NameTrainResult result;
  std::vector<Tensor> best;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    double loss = model::train_epoch(params, adam, train, tc, epoch,
                                     [&](Graph& g, const NameSample& s) { return m.loss(g, s); });
    double f1 = valid.empty() ? 0.0 : evaluate_names(m, vocab, valid, max_len, tc.threads).micro().f1;
    result.history.push_back({epoch, loss, f1});
    if (best.empty() || f1 > result.best_valid_f1) {
      result.best_epoch = epoch;
      result.best_valid_f1 = f1;
      best.clear();
      for (std::size_t p = 0; p < params.size(); ++p) best.push_back(params.value(p));
    } else if (epoch - result.best_epoch >= tc.patience) {
      break;
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) params.value(p) = best[p];
  return result;
}

}  // namespace ligerlab::names

#endif  // LIGERLAB_SEQDEC_HPP
