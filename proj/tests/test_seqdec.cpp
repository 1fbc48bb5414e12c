#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "gradcheck.hpp"
#include "ligerlab/seqdec.hpp"

using namespace ligerlab;
using namespace ligerlab::names;
using model::EncodedProgram;
using model::ModelConfig;

namespace {

void expect_prf(const PRF& r, double p, double rc, double f) {
  EXPECT_NEAR(r.precision, p, 1e-3);
  EXPECT_NEAR(r.recall, rc, 1e-3);
  EXPECT_NEAR(r.f1, f, 1e-3);
}

ModelConfig small_config() {
  ModelConfig c;
  c.hidden = 6;
  c.embed = 6;
  c.n_eps = 2;
  return c;
}

EncodedProgram toy_program(std::size_t key, std::size_t noise, std::size_t n_paths = 1) {
  EncodedProgram ep;
  ep.program_id = "p" + std::to_string(key) + "_" + std::to_string(noise);
  ep.statement_seqs = {{4 + key, 10}, {11 + noise % 3}};
  ep.state_seqs = {{14 + noise % 4}, {14 + (noise + 1) % 4}};
  for (std::size_t p = 0; p < n_paths; ++p) ep.paths.push_back({{0, 1, 0}, {{0, 1}, {1, 0}, {0, 0}}});
  return ep;
}

}  // namespace

TEST(Subwords, Splitting) {
  EXPECT_EQ(split_subwords("computeFileDiff"), (std::vector<std::string>{"compute", "file", "diff"}));
  EXPECT_EQ(split_subwords("sort_array_Asc"), (std::vector<std::string>{"sort", "array", "asc"}));
  EXPECT_EQ(split_subwords("parseHTTPResponse"), (std::vector<std::string>{"parse", "http", "response"}));
  EXPECT_TRUE(split_subwords("").empty());
}

TEST(SubtokenMetric, WorkedExamples) {
  expect_prf(subtoken_prf("diffCompute", "computeDiff"), 1.0, 1.0, 1.0);
  expect_prf(subtoken_prf("compute", "computeDiff"), 1.0, 0.5, 0.667);
  expect_prf(subtoken_prf("computeFileDiff", "computeDiff"), 0.667, 1.0, 0.8);
}

TEST(SubtokenMetric, EmptyNames) {
  expect_prf(subtoken_prf("", ""), 1.0, 1.0, 1.0);
  expect_prf(subtoken_prf("", "computeDiff"), 0.0, 0.0, 0.0);
  expect_prf(subtoken_prf("compute", ""), 0.0, 0.0, 0.0);
}

TEST(SubtokenMetric, MultisetCounting) {
  expect_prf(subtoken_prf("getGetName", "getName"), 2.0 / 3.0, 1.0, 0.8);
  expect_prf(subtoken_prf("GETNAME", "getname"), 1.0, 1.0, 1.0);
}

TEST(SubtokenMetric, SymmetryAndBoundsProperty) {
  const std::vector<std::string> pool{"get", "set", "max", "min", "sort", "sum", "count"};
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    std::vector<std::string> pred, gold;
    for (std::size_t k = rng() % 4; k > 0; --k) pred.push_back(pool[rng() % pool.size()]);
    for (std::size_t k = 1 + rng() % 3; k > 0; --k) gold.push_back(pool[rng() % pool.size()]);
    auto base = subtoken_prf(pred, gold);
    auto p2 = pred, g2 = gold;
    std::reverse(p2.begin(), p2.end());
    std::rotate(g2.begin(), g2.begin() + 1, g2.end());
    auto shuffled = subtoken_prf(p2, g2);
    EXPECT_EQ(base.precision, shuffled.precision);
    EXPECT_EQ(base.recall, shuffled.recall);
    EXPECT_EQ(base.f1, shuffled.f1);
    for (double x : {base.precision, base.recall, base.f1}) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_EQ(base.f1 == 0.0, match_counts(pred, gold).matched == 0);
  }
}

TEST(NameVocabTest, SpecialsAndEncoding) {
  auto v = NameVocab::from_names({"findMax", "find_min", "sumElems"});
  EXPECT_EQ(v.word(NameVocab::kBeginId), model::kBegin);
  EXPECT_EQ(v.word(NameVocab::kEndId), model::kEnd);
  EXPECT_EQ(v.size(), 3u + 5u);
  auto ids = v.encode_name("maxFind");
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(v.word(ids[0]), "max");
  EXPECT_EQ(v.index("unseen"), NameVocab::kUnkId);
  EXPECT_EQ(NameVocab(v.words()).hash(), v.hash());
  EXPECT_THROW(NameVocab(std::vector<std::string>{"a", "b", "c"}), Error);
}

TEST(Decoder, AttentionContextClosedForms) {
  NameModel m(small_config(), 20, 8);
  m.params().init_uniform(0.5, 2);
  Graph g(&m.params());
  Rng rng(4);
  auto prev = g.constant(gradcheck::random_tensor(rng, 1, 6));
  auto row = gradcheck::random_tensor(rng, 1, 6);
  Tensor rows = Tensor::matrix(3, 6);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 6; ++c) rows.at(r, c) = row.data[c];
  auto same = g.constant(rows);
  auto uniform = m.attention_context(g, prev, same);
  for (double w : uniform.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-12);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(g.value(uniform.context).data[c], row.data[c], 1e-12);
  auto single = m.attention_context(g, prev, g.constant(row));
  EXPECT_EQ(single.weights, std::vector<double>{1.0});
  EXPECT_EQ(g.value(single.context).data, row.data);
  auto many = m.attention_context(g, prev, g.constant(gradcheck::random_tensor(rng, 7, 6, 2.0)));
  EXPECT_NEAR(std::accumulate(many.weights.begin(), many.weights.end(), 0.0), 1.0, 1e-9);
  for (double w : many.weights) EXPECT_GT(w, 0.0);
}

TEST(Decoder, JointAttentionAndLengthBound) {
  NameModel m(small_config(), 20, 8);
  m.params().init_uniform(0.5, 3);
  auto ep = toy_program(1, 2, 3);
  std::size_t annotations = 0;
  for (const auto& p : ep.paths) annotations += p.statements.size();
  for (std::size_t max_len : {1u, 2u, 5u}) {
    auto d = m.decode(ep, max_len);
    EXPECT_LE(d.ids.size(), max_len);
    for (const auto& w : d.attention) {
      ASSERT_EQ(w.size(), annotations);
      EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
    }
  }
  EXPECT_THROW(m.decode(ep, 0), Error);
}

TEST(Decoder, ImmediateEndGivesEmptyName) {
  NameModel m(small_config(), 20, 8);
  m.params().init_uniform(0.5, 3);
  m.params().value(m.params().index("decoder.out.b")).data[NameVocab::kEndId] = 100.0;
  auto d = m.decode(toy_program(0, 0), 4);
  EXPECT_TRUE(d.ids.empty());
  EXPECT_EQ(d.attention.size(), 1u);
}

TEST(GradCheck, NameLoss) {
  auto cfg = small_config();
  cfg.hidden = 3;
  cfg.embed = 3;
  for (auto cell : {model::CellKind::Vanilla, model::CellKind::Gated}) {
    cfg.cell = cell;
    NameModel m(cfg, 20, 6);
    m.params().init_uniform(0.6, 5);
    NameSample s{toy_program(1, 1, 2), "maxFind", {3, 4}};
    double err = gradcheck::check_params(m.params(), [&](Graph& g) { return m.loss(g, s); });
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Training, ReproducesNamesOnHeldOutClones) {
  const std::vector<std::string> names{"findMax", "sortArray", "countPositive"};
  auto vocab = NameVocab::from_names(names);
  auto sample = [&](std::size_t key, std::size_t noise) {
    return NameSample{toy_program(key, noise), names[key], vocab.encode_name(names[key])};
  };
  std::vector<NameSample> train, valid, test;
  for (std::size_t n = 0; n < 8; ++n)
    for (std::size_t k = 0; k < names.size(); ++k) train.push_back(sample(k, n));
  for (std::size_t k = 0; k < names.size(); ++k) {
    valid.push_back(sample(k, 9));
    test.push_back(sample(k, 10));
  }
  auto cfg = small_config();
  cfg.hidden = 12;
  cfg.embed = 12;
  cfg.cell = model::CellKind::Gated;
  NameModel m(cfg, 20, vocab.size());
  model::TrainConfig tc;
  tc.epochs = 60;
  tc.batch = 4;
  tc.lr = 1e-2;
  tc.patience = 60;
  auto r = train_name_model(m, vocab, train, valid, tc, 4);
  EXPECT_LE(r.history.size(), tc.epochs);
  auto ev = evaluate_names(m, vocab, test, 4);
  EXPECT_DOUBLE_EQ(ev.micro().f1, 1.0);
  for (const auto& p : ev.predictions) EXPECT_EQ(join_subwords(p.predicted), join_subwords(split_subwords(p.gold_name)));
}
