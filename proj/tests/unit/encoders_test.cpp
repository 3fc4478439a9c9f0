#include "i3gn/encoders.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <unistd.h>

#include "gradkit/checkpoint.hpp"
#include "gradkit/grad_check.hpp"
#include "support/oracles.hpp"

namespace {

using gradkit::Tape;
using gradkit::Tensor;
using gradkit::Var;
using i3gn::ItemIndex;
using i3gn::ModelConfig;
using i3gn::Variant;
namespace gk = gradkit;

ModelConfig small_config(Variant v = Variant::kFull, std::size_t d = 4, std::size_t heads = 2) {
  ModelConfig c;
  c.dim = d;
  c.heads = heads;
  c.variant = v;
  return c;
}

std::vector<i3gn::ItemSeq> seqs(const std::vector<std::vector<ItemIndex>>& v) {
  return {v.begin(), v.end()};
}

void expect_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

std::vector<double> row(const Var& v, std::size_t r) {
  std::vector<double> out;
  for (std::size_t c = 0; c < v.cols(); ++c) out.push_back(v.value()(r, c));
  return out;
}

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(r, c);
  for (double& x : t.values()) x = n(rng);
  return t;
}

// ---- GGNN -------------------------------------------------------------

TEST(Ggnn, AllZeroWeightsHalveTheState) {
  i3gn::I3gnModel model(small_config(Variant::kIntraOnly), 5, 1);
  for (auto& p : model.params())
    if (p.name.rfind("intra.", 0) == 0) p.value.fill(0.0);
  const std::vector<ItemIndex> prefix{0, 2, 1, 2};
  const auto g = i3gn::build_intra_graph(prefix);
  Tape tape;
  Var h0 = gk::gather_rows(tape.param(model.params(), "embedding"), std::vector<std::size_t>{0, 2, 1});
  i3gn::GgnnWeights w;
  for (auto [field, name] : std::initializer_list<std::pair<Var*, const char*>>{
           {&w.w_out, "intra.w_out"}, {&w.w_in, "intra.w_in"}, {&w.b_out, "intra.b_out"}, {&w.b_in, "intra.b_in"},
           {&w.w_z, "intra.w_z"}, {&w.w_r, "intra.w_r"}, {&w.w_h, "intra.w_h"}, {&w.u_z, "intra.u_z"},
           {&w.u_r, "intra.u_r"}, {&w.u_h, "intra.u_h"}}) {
    *field = tape.param(model.params(), name);
  }
  Var h1 = i3gn::ggnn_encode(g, h0, w, 1);
  for (std::size_t i = 0; i < h0.value().size(); ++i) EXPECT_DOUBLE_EQ(h1.value()[i], 0.5 * h0.value()[i]);
}

class GgnnOracle : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GgnnOracle, MatchesStraightLineEvaluation) {
  ModelConfig cfg = small_config(Variant::kIntraOnly, 6);
  cfg.ggnn_steps = GetParam();
  i3gn::I3gnModel model(cfg, 6, 42, 0.5);
  // v1, v3, v2, v3, v4, v1 with v_k -> index k.
  const std::vector<ItemIndex> prefix{1, 3, 2, 3, 4, 1};
  const auto g = i3gn::build_intra_graph(prefix);
  Tape tape;
  i3gn::GgnnWeights w;
  auto p = [&](const char* n) { return tape.param(model.params(), n); };
  w = {p("intra.w_out"), p("intra.w_in"), p("intra.b_out"), p("intra.b_in"), p("intra.w_z"),
       p("intra.w_r"),   p("intra.w_h"),  p("intra.u_z"),   p("intra.u_r"),  p("intra.u_h")};
  std::vector<std::size_t> slots(g.node_items.begin(), g.node_items.end());
  Var h = i3gn::ggnn_encode(g, gk::gather_rows(p("embedding"), slots), w, cfg.ggnn_steps);

  const auto emb = oracle::mat(model.params(), "embedding");
  oracle::Mat h0;
  for (ItemIndex x : g.node_items) h0.push_back(emb[x]);
  const auto expected = oracle::ggnn(model.params(), g.alias, h0, cfg.ggnn_steps);
  for (std::size_t i = 0; i < g.size(); ++i) expect_near(row(h, i), expected[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Steps, GgnnOracle, ::testing::Values(1, 3));

TEST(Ggnn, SingleNodeSeesOnlyBiases) {
  ModelConfig cfg = small_config(Variant::kIntraOnly, 3);
  i3gn::I3gnModel model(cfg, 2, 3);
  // Identity update gate path: W_z = W_r = W_h = 0 except that the candidate
  // sees a = [b_O, b_I] through W_h = [I | I].
  auto& params = model.params();
  for (const char* n : {"intra.w_z", "intra.w_r", "intra.u_z", "intra.u_r", "intra.u_h"}) params.at(n).value.fill(0.0);
  auto& w_h = params.at("intra.w_h").value;
  w_h.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) w_h(i, i) = w_h(i, 3 + i) = 1.0;
  const std::vector<ItemIndex> prefix{1};
  const auto g = i3gn::build_intra_graph(prefix);
  Tape tape;
  auto p = [&](const char* n) { return tape.param(params, n); };
  i3gn::GgnnWeights w{p("intra.w_out"), p("intra.w_in"), p("intra.b_out"), p("intra.b_in"), p("intra.w_z"),
                      p("intra.w_r"),   p("intra.w_h"),  p("intra.u_z"),   p("intra.u_r"),  p("intra.u_h")};
  Var h0 = gk::gather_rows(p("embedding"), std::vector<std::size_t>{1});
  Var h1 = i3gn::ggnn_encode(g, h0, w, 1);
  const auto& b_o = params.at("intra.b_out").value;
  const auto& b_i = params.at("intra.b_in").value;
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(h1.value()(0, c), 0.5 * h0.value()(0, c) + 0.5 * std::tanh(b_o[c] + b_i[c]), 1e-15);
  }
}

// ---- Readout ------------------------------------------------------------

struct ReadoutFixture {
  gk::ParamStore store;
  explicit ReadoutFixture(std::size_t d, std::uint64_t seed) {
    std::vector<gk::ParamSpec> specs{{"r.q", {d}},        {"r.w_last", {d, d}}, {"r.w_node", {d, d}},
                                     {"r.b", {d}},        {"r.w_out", {d, 2 * d}}};
    store = gk::init_params(specs, seed, 0.7);
  }
  i3gn::ReadoutWeights bind(Tape& t) const {
    return {t.param(store, "r.q"), t.param(store, "r.w_last"), t.param(store, "r.w_node"), t.param(store, "r.b"),
            t.param(store, "r.w_out")};
  }
};

TEST(Readout, SingleNodeWithIdentityCompressionReturnsTheNode) {
  ReadoutFixture f(3, 1);
  auto& w3 = f.store.at("r.w_out").value;
  w3.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) w3(i, i) = 1.0;
  Tape tape;
  Var s = tape.constant(Tensor::row({0.3, -1.2, 2.0}));
  Var out = i3gn::attention_readout(s, f.bind(tape));
  expect_near(row(out, 0), {0.3, -1.2, 2.0}, 0.0);
}

TEST(Readout, ZeroQueryDropsTheGlobalPart) {
  ReadoutFixture f(2, 2);
  f.store.at("r.q").value.fill(0.0);
  Tape tape;
  Var s = tape.constant(Tensor::from_rows({{1.0, 2.0}, {-1.0, 0.5}, {0.25, 4.0}}));
  Var out = i3gn::attention_readout(s, f.bind(tape));
  const auto w3 = oracle::mat(f.store, "r.w_out");
  expect_near(row(out, 0), oracle::matvec(w3, {0.25, 4.0, 0.0, 0.0}), 1e-15);
}

TEST(Readout, MatchesStraightLineEvaluationAndStaysUnnormalized) {
  ReadoutFixture f(4, 9);
  std::mt19937_64 rng(5);
  Tape tape;
  Tensor s_val = random_tensor(rng, 3, 4);
  Var s = tape.constant(s_val);
  Var out = i3gn::attention_readout(s, f.bind(tape));
  oracle::Mat rows;
  for (std::size_t r = 0; r < 3; ++r) rows.push_back(row(s, r));
  expect_near(row(out, 0), oracle::readout(f.store, "r", rows), 1e-12);

  Var alpha = i3gn::readout_attention(s, f.bind(tape));
  double total = 0.0;
  for (double a : alpha.value().values()) total += a;
  EXPECT_GT(std::abs(total - 1.0), 1e-3);
}

// ---- Attention layers ------------------------------------------------------

struct GatFixture {
  gk::ParamStore store;
  GatFixture(std::size_t heads, std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    std::vector<gk::ParamSpec> specs;
    for (std::size_t k = 0; k < heads; ++k) {
      specs.push_back({"h" + std::to_string(k) + ".w", {d_out, d_in}});
      specs.push_back({"h" + std::to_string(k) + ".attn", {2 * d_out, 1}});
    }
    store = gk::init_params(specs, seed, 0.8);
  }
  std::vector<i3gn::GatHead> bind(Tape& t) const {
    std::vector<i3gn::GatHead> heads;
    for (std::size_t k = 0; k < store.size() / 2; ++k) {
      heads.push_back({t.param(store, 2 * k), t.param(store, 2 * k + 1)});
    }
    return heads;
  }
  std::vector<oracle::Head> heads(bool mean = false) const {
    std::vector<oracle::Head> out;
    for (std::size_t k = 0; k < store.size() / 2; ++k) {
      const std::string base = "h" + std::to_string(k);
      out.push_back({oracle::mat(store, base + ".w"), mean ? oracle::Vec{} : oracle::vec(store, base + ".attn")});
    }
    return out;
  }
};

std::vector<std::set<std::size_t>> adjacency_sets(const i3gn::InterGraph& g) {
  std::vector<std::set<std::size_t>> out;
  for (const auto& a : g.adjacency) out.emplace_back(a.begin(), a.end());
  return out;
}

TEST(Gat, IsolatedNodeAttendsOnlyToItself) {
  GatFixture f(2, 3, 3, 4);
  const std::vector<ItemIndex> prefix{7};
  const auto g = i3gn::build_inter_graph(prefix, {});
  Tape tape;
  Var h = tape.constant(Tensor::row({0.5, -0.25, 1.0}));
  const auto heads = f.bind(tape);
  Var wh = gk::matmul_bt(h, heads[0].w);
  Var alpha = i3gn::gat_attention(g, wh, heads[0].attn, 0.2);
  EXPECT_DOUBLE_EQ(alpha.value().item(), 1.0);
  Var out = i3gn::gat_layer(g, h, std::span(heads).first(1), i3gn::HeadMode::kConcat, 0.2);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.value()(0, c), oracle::sigmoid(wh.value()(0, c)));
}

TEST(Gat, IdenticalMutualNeighborsSplitAttentionEvenly) {
  GatFixture f(1, 2, 2, 8);
  const std::vector<ItemIndex> prefix{1, 2};
  const auto g = i3gn::build_inter_graph(prefix, {});
  Tape tape;
  Var h = tape.constant(Tensor::from_rows({{0.3, 0.9}, {0.3, 0.9}}));
  const auto heads = f.bind(tape);
  Var alpha = i3gn::gat_attention(g, gk::matmul_bt(h, heads[0].w), heads[0].attn, 0.2);
  for (double a : alpha.value().values()) EXPECT_DOUBLE_EQ(a, 0.5);
}

TEST(Gat, LayerMatchesStraightLineEvaluation) {
  const std::vector<ItemIndex> prefix{0, 1, 2};
  const std::vector<std::vector<ItemIndex>> nb{{2, 3}, {1, 3, 1}};
  const auto neighbors = seqs(nb);
  const auto g = i3gn::build_inter_graph(prefix, neighbors);
  ASSERT_EQ(g.size(), 4u);
  std::mt19937_64 rng(11);
  const Tensor h_val = random_tensor(rng, 4, 3);
  oracle::Mat h_rows;
  for (std::size_t r = 0; r < 4; ++r) h_rows.push_back({h_val(r, 0), h_val(r, 1), h_val(r, 2)});

  for (auto mode : {i3gn::HeadMode::kConcat, i3gn::HeadMode::kAverage}) {
    for (bool mean : {false, true}) {
      GatFixture f(2, 3, 5, 21);
      Tape tape;
      Var out = i3gn::gat_layer(g, tape.constant(h_val), f.bind(tape), mode, 0.2, mean);
      const auto expected =
          oracle::gat(adjacency_sets(g), h_rows, f.heads(mean), mode == i3gn::HeadMode::kAverage, 0.2);
      ASSERT_EQ(out.rows(), 4u);
      for (std::size_t i = 0; i < 4; ++i) expect_near(row(out, i), expected[i], 1e-12);
    }
  }
}

TEST(Gat, AttentionRowsAreDistributionsOverTheAdjacency) {
  std::mt19937_64 rng(3);
  const std::vector<ItemIndex> prefix{0, 1, 2, 1};
  const std::vector<std::vector<ItemIndex>> nb{{2, 4, 5}, {5, 6}};
  const auto g = i3gn::build_inter_graph(prefix, seqs(nb));
  const auto mask = g.mask();
  GatFixture f(1, 4, 4, 17);
  Tape tape;
  Var alpha = i3gn::gat_attention(g, tape.constant(random_tensor(rng, g.size(), 4)), f.bind(tape)[0].attn, 0.2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double a = alpha.value()(i, j);
      if (mask[i * g.size() + j]) {
        EXPECT_GT(a, 0.0);
        EXPECT_LT(a, 1.0);
      } else {
        EXPECT_EQ(a, 0.0);
      }
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Gat, LayerIsEquivariantUnderNodePermutation) {
  const std::vector<ItemIndex> prefix{0, 1};
  const std::vector<std::vector<ItemIndex>> a{{1, 2}, {3, 0}};
  const std::vector<std::vector<ItemIndex>> b{{3, 0}, {1, 2}};
  const auto ga = i3gn::build_inter_graph(prefix, seqs(a));
  const auto gb = i3gn::build_inter_graph(prefix, seqs(b));
  ASSERT_NE(ga.node_items, gb.node_items);
  std::mt19937_64 rng(2);
  const Tensor emb = random_tensor(rng, 4, 3);
  GatFixture f(3, 3, 3, 5);
  auto run = [&](const i3gn::InterGraph& g) {
    Tape tape;
    Var e = tape.constant(emb);
    Var h = gk::gather_rows(e, std::vector<std::size_t>(g.node_items.begin(), g.node_items.end()));
    Var out = i3gn::gat_layer(g, h, f.bind(tape), i3gn::HeadMode::kAverage, 0.2);
    std::map<ItemIndex, std::vector<double>> by_item;
    for (std::size_t i = 0; i < g.size(); ++i) by_item[g.node_items[i]] = row(out, i);
    return by_item;
  };
  const auto ra = run(ga), rb = run(gb);
  for (const auto& [item, v] : ra) expect_near(v, rb.at(item), 1e-14);
}

TEST(InterEncoder, SingleNodeComposesBothLayers) {
  ModelConfig cfg = small_config(Variant::kInterOnly, 3, 2);
  i3gn::I3gnModel model(cfg, 4, 6);
  const auto& p = model.params();
  const std::vector<ItemIndex> prefix{2};
  const auto g = i3gn::build_inter_graph(prefix, {});
  Tape tape;
  std::vector<i3gn::GatHead> l1, l2;
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string a = "inter.gat0.head" + std::to_string(k), b = "inter.gat1.head" + std::to_string(k);
    l1.push_back({tape.param(p, a + ".w"), tape.param(p, a + ".attn")});
    l2.push_back({tape.param(p, b + ".w"), tape.param(p, b + ".attn")});
  }
  Var h = gk::gather_rows(tape.param(p, "embedding"), std::vector<std::size_t>{2});
  h = i3gn::gat_layer(g, h, l1, i3gn::HeadMode::kConcat, 0.2);
  h = i3gn::gat_layer(g, h, l2, i3gn::HeadMode::kAverage, 0.2);

  const oracle::Vec v = oracle::mat(p, "embedding")[2];
  oracle::Vec hidden;
  for (std::size_t k = 0; k < 2; ++k)
    for (double x : oracle::matvec(oracle::mat(p, "inter.gat0.head" + std::to_string(k) + ".w"), v))
      hidden.push_back(oracle::sigmoid(x));
  oracle::Vec mean(3, 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto y = oracle::matvec(oracle::mat(p, "inter.gat1.head" + std::to_string(k) + ".w"), hidden);
    for (std::size_t c = 0; c < 3; ++c) mean[c] += y[c] / 2;
  }
  for (double& x : mean) x = oracle::sigmoid(x);
  expect_near(row(h, 0), mean, 1e-14);
}

TEST(InterEncoder, OneHeadOneLayerIsAPlainAttentionLayer) {
  ModelConfig cfg = small_config(Variant::kInterOnly, 3, 1);
  cfg.gat_layers = 1;
  i3gn::I3gnModel model(cfg, 6, 12);
  const std::vector<ItemIndex> prefix{0, 1, 2};
  const std::vector<std::vector<ItemIndex>> nb{{2, 3, 4}};
  const auto neighbors = seqs(nb);
  const auto got = model.predict(prefix, neighbors);
  const auto expected = oracle::forward(model.params(), cfg, prefix, nb);
  expect_near(got, expected.probs, 1e-12);
  EXPECT_EQ(model.params().at("inter.gat0.head0.w").value.shape(), (gk::Shape{3, 3}));
}

// ---- Fusion, scoring and loss ------------------------------------------------

struct FusionFixture {
  gk::ParamStore store;
  explicit FusionFixture(std::size_t d, std::uint64_t seed = 1) {
    std::vector<gk::ParamSpec> specs{{"f.w_inter", {d, d}}, {"f.w_intra", {d, d}}, {"f.b", {d}}};
    store = gk::init_params(specs, seed, 1.0);
  }
  i3gn::FusionWeights bind(Tape& t) const {
    return {t.param(store, "f.w_inter"), t.param(store, "f.w_intra"), t.param(store, "f.b")};
  }
};

TEST(Fusion, ZeroGateGivesTheMidpoint) {
  FusionFixture f(2);
  for (auto& p : f.store) p.value.fill(0.0);
  Tape tape;
  Var out = i3gn::fuse(tape.constant(Tensor::row({1.0, -2.0})), tape.constant(Tensor::row({3.0, 0.0})), f.bind(tape));
  expect_near(row(out, 0), {2.0, -1.0}, 1e-15);
}

TEST(Fusion, SaturatedGateSelectsTheInterVector) {
  FusionFixture f(2);
  f.store.at("f.w_inter").value.fill(0.0);
  f.store.at("f.w_intra").value.fill(0.0);
  double previous_gap = 1e9;
  for (double bias : {0.0, 2.0, 8.0, 40.0}) {
    f.store.at("f.b").value.fill(bias);
    Tape tape;
    Var out = i3gn::fuse(tape.constant(Tensor::row({1.0, -2.0})), tape.constant(Tensor::row({3.0, 0.0})),
                         f.bind(tape));
    const double gap = std::abs(out.value()[0] - 3.0) + std::abs(out.value()[1]);
    EXPECT_LT(gap, previous_gap);
    previous_gap = gap;
  }
  EXPECT_LT(previous_gap, 1e-12);
}

TEST(Fusion, EqualInputsPassThroughAndOutputsStayBetweenInputs) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    FusionFixture f(5, trial);
    Tape tape;
    const Tensor a = random_tensor(rng, 1, 5), b = random_tensor(rng, 1, 5);
    Var same = i3gn::fuse(tape.constant(a), tape.constant(a), f.bind(tape));
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(same.value()[c], a[c], 1e-15);
    Var out = i3gn::fuse(tape.constant(a), tape.constant(b), f.bind(tape));
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_GE(out.value()[c], std::min(a[c], b[c]));
      EXPECT_LE(out.value()[c], std::max(a[c], b[c]));
    }
  }
}

TEST(Score, TwoItemExample) {
  Tape tape;
  Var probs = i3gn::score(tape.constant(Tensor::row({1.0, 0.0})), tape.constant(Tensor::from_rows({{1, 0}, {0, 1}})));
  const double e = std::exp(1.0);
  EXPECT_NEAR(probs.value()[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(probs.value()[1], 1 / (e + 1), 1e-15);
  EXPECT_NEAR(probs.value()[0], 0.731, 5e-4);
}

TEST(Score, ZeroSessionVectorIsUniformAndRandomInputsSumToOne) {
  std::mt19937_64 rng(8);
  Tape tape;
  Var emb = tape.constant(random_tensor(rng, 7, 3));
  Var uniform = i3gn::score(tape.constant(Tensor::row({0, 0, 0})), emb);
  for (double p : uniform.value().values()) EXPECT_DOUBLE_EQ(p, 1.0 / 7);
  for (int trial = 0; trial < 20; ++trial) {
    Var p = i3gn::score(tape.constant(random_tensor(rng, 1, 3)), emb);
    const auto v = p.value().values();
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Loss, PerfectPredictionIsNearZero) {
  Tape tape;
  Var p = tape.constant(Tensor::row({0.0, 1.0, 0.0}));
  EXPECT_LT(i3gn::loss(p, 1, i3gn::LossKind::kBinarySum).value().item(), 1e-9);
  EXPECT_LT(i3gn::loss(p, 1, i3gn::LossKind::kCategorical).value().item(), 1e-9);
}

TEST(Loss, UniformTwoItemsGivesTwoLnTwo) {
  Tape tape;
  Var p = tape.constant(Tensor::row({0.5, 0.5}));
  for (std::size_t target : {0u, 1u}) {
    EXPECT_NEAR(i3gn::loss(p, target, i3gn::LossKind::kBinarySum).value().item(), 2 * std::log(2.0), 1e-15);
    EXPECT_NEAR(i3gn::loss(p, target, i3gn::LossKind::kBinarySum).value().item(), 1.386, 5e-4);
  }
}

TEST(Loss, DecreasesAsTargetProbabilityGrows) {
  for (auto kind : {i3gn::LossKind::kBinarySum, i3gn::LossKind::kCategorical}) {
    double previous = 1e300;
    for (double pt = 0.05; pt < 0.999; pt += 0.05) {
      const double rest = (1 - pt) / 4;
      Tape tape;
      Var p = tape.constant(Tensor::row({rest, rest, pt, rest, rest}));
      const double l = i3gn::loss(p, 2, kind).value().item();
      EXPECT_LT(l, previous);
      previous = l;
    }
  }
}

TEST(Loss, TargetOutsideVocabularyThrows) {
  i3gn::I3gnModel model(small_config(), 4, 1);
  Tape tape;
  const std::vector<ItemIndex> prefix{0, 1};
  EXPECT_THROW(model.loss(tape, prefix, {}, 4), std::out_of_range);
  Var p = tape.constant(Tensor::row({0.5, 0.5}));
  EXPECT_THROW(i3gn::loss(p, 2, i3gn::LossKind::kBinarySum), std::out_of_range);
}

// ---- Full model ---------------------------------------------------------------

TEST(ParameterSpecs, ShapesFollowTheLayout) {
  ModelConfig cfg = small_config(Variant::kFull, 4, 3);
  const auto specs = i3gn::parameter_specs(cfg, 10);
  std::map<std::string, gk::Shape> shapes;
  for (const auto& s : specs) shapes[s.name] = s.shape;
  EXPECT_EQ(shapes.at("embedding"), (gk::Shape{10, 4}));
  EXPECT_EQ(shapes.at("intra.w_z"), (gk::Shape{4, 8}));
  EXPECT_EQ(shapes.at("intra.readout.w_out"), (gk::Shape{4, 8}));
  EXPECT_EQ(shapes.at("inter.gat0.head2.w"), (gk::Shape{4, 4}));
  EXPECT_EQ(shapes.at("inter.gat1.head2.w"), (gk::Shape{4, 12}));
  EXPECT_EQ(shapes.at("inter.gat1.head0.attn"), (gk::Shape{8, 1}));
  EXPECT_EQ(shapes.at("fusion.b"), (gk::Shape{4}));
  for (const auto& s : specs) {
    const bool inter = s.name.rfind("inter.", 0) == 0;
    EXPECT_EQ(s.group, inter ? gk::ParamGroup::kInter : gk::ParamGroup::kIntraShared) << s.name;
  }
}

TEST(ParameterSpecs, VariantsCreateOnlyWhatTheyUse) {
  auto names = [](Variant v) {
    std::set<std::string> out;
    for (const auto& s : i3gn::parameter_specs(small_config(v), 5)) out.insert(s.name);
    return out;
  };
  const auto intra = names(Variant::kIntraOnly);
  EXPECT_TRUE(std::none_of(intra.begin(), intra.end(), [](const std::string& n) {
    return n.rfind("inter.", 0) == 0 || n.rfind("fusion.", 0) == 0;
  }));
  const auto inter = names(Variant::kInterOnly);
  EXPECT_TRUE(std::none_of(inter.begin(), inter.end(), [](const std::string& n) {
    return n.rfind("intra.", 0) == 0 || n.rfind("fusion.", 0) == 0;
  }));
  const auto avg = names(Variant::kAvgPool);
  EXPECT_FALSE(avg.count("inter.gat0.head0.w"));
  EXPECT_FALSE(avg.count("inter.readout.w_out"));
  EXPECT_FALSE(names(Variant::kMeanGat).count("inter.gat0.head0.attn"));
  EXPECT_TRUE(names(Variant::kMeanGat).count("inter.gat0.head0.w"));
  EXPECT_FALSE(names(Variant::kMeanReadout).count("inter.readout.q"));
  EXPECT_TRUE(names(Variant::kMeanReadout).count("inter.readout.w_out"));
}

class ForwardOracle : public ::testing::TestWithParam<Variant> {};

TEST_P(ForwardOracle, MatchesStraightLineModel) {
  ModelConfig cfg = small_config(GetParam(), 5, 3);
  i3gn::I3gnModel model(cfg, 9, 42, 0.4);
  const std::vector<ItemIndex> prefix{1, 3, 2, 3, 4};
  const std::vector<std::vector<ItemIndex>> nb{{3, 5, 6}, {4, 1, 7, 7}, {8, 2}};
  const auto got = model.predict(prefix, seqs(nb));
  const auto expected = oracle::forward(model.params(), cfg, prefix, nb);
  expect_near(got, expected.probs, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Variants, ForwardOracle,
                         ::testing::Values(Variant::kFull, Variant::kIntraOnly, Variant::kInterOnly,
                                           Variant::kAvgPool, Variant::kMeanGat, Variant::kMeanReadout));

TEST(Forward, SharedReadoutAndSeparateEmbeddingMatchTheOracle) {
  ModelConfig cfg = small_config(Variant::kFull, 4, 2);
  cfg.shared_readout = true;
  cfg.separate_inter_embedding = true;
  i3gn::I3gnModel model(cfg, 6, 7, 0.4);
  EXPECT_FALSE(model.params().find("inter.readout.q"));
  EXPECT_EQ(model.params().at("inter.embedding").group, gk::ParamGroup::kInter);
  const std::vector<ItemIndex> prefix{0, 1, 2};
  const std::vector<std::vector<ItemIndex>> nb{{2, 5}};
  expect_near(model.predict(prefix, seqs(nb)), oracle::forward(model.params(), cfg, prefix, nb).probs, 1e-12);
}

TEST(Forward, EmptyNeighborSetStillRuns) {
  i3gn::I3gnModel model(small_config(), 6, 1);
  const std::vector<ItemIndex> prefix{0, 1, 0};
  const auto probs = model.predict(prefix, {});
  EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-12);
  expect_near(probs, oracle::forward(model.params(), small_config(), prefix, {}).probs, 1e-12);
}

TEST(Forward, IntraOnlyEqualsFullModelWithClosedGate) {
  const ModelConfig full_cfg = small_config(Variant::kFull);
  i3gn::I3gnModel full(full_cfg, 7, 3);
  i3gn::I3gnModel intra(small_config(Variant::kIntraOnly), 7, 99);
  for (auto& p : intra.params()) p.value = full.params().at(p.name).value;
  full.params().at("fusion.w_inter").value.fill(0.0);
  full.params().at("fusion.w_intra").value.fill(0.0);
  full.params().at("fusion.b").value.fill(-1e3);
  const std::vector<ItemIndex> prefix{0, 4, 2};
  const std::vector<std::vector<ItemIndex>> nb{{4, 5}, {2, 6, 0}};
  EXPECT_EQ(full.predict(prefix, seqs(nb)), intra.predict(prefix, seqs(nb)));
}

TEST(Forward, IntraOnlyIgnoresNeighbors) {
  i3gn::I3gnModel model(small_config(Variant::kIntraOnly), 7, 3);
  const std::vector<ItemIndex> prefix{0, 4, 2};
  const std::vector<std::vector<ItemIndex>> a{{4, 5}}, b{{2, 6, 0}, {1, 3}};
  EXPECT_EQ(model.predict(prefix, {}), model.predict(prefix, seqs(a)));
  EXPECT_EQ(model.predict(prefix, seqs(a)), model.predict(prefix, seqs(b)));
}

TEST(Forward, NeighborOrderDoesNotChangePredictions) {
  i3gn::I3gnModel model(small_config(Variant::kFull, 4, 3), 9, 5);
  const std::vector<ItemIndex> prefix{0, 1};
  const std::vector<std::vector<ItemIndex>> a{{1, 2, 3}, {4, 0, 5}, {6, 7}};
  std::vector<std::vector<ItemIndex>> b{a[2], a[0], a[1]};
  ASSERT_NE(i3gn::build_inter_graph(prefix, seqs(a)).node_items, i3gn::build_inter_graph(prefix, seqs(b)).node_items);
  expect_near(model.predict(prefix, seqs(a)), model.predict(prefix, seqs(b)), 1e-14);
}

TEST(Forward, RejectsEmptyPrefixAndUnknownItems) {
  i3gn::I3gnModel model(small_config(), 4, 1);
  Tape tape;
  EXPECT_THROW(model.forward(tape, {}, {}), std::invalid_argument);
  const std::vector<ItemIndex> bad{0, 9};
  EXPECT_THROW(model.forward(tape, bad, {}), std::out_of_range);
}

class ModelGradient : public ::testing::TestWithParam<std::tuple<Variant, i3gn::LossKind>> {};

TEST_P(ModelGradient, MatchesFiniteDifferences) {
  auto [variant, kind] = GetParam();
  ModelConfig cfg = small_config(variant, 3, 2);
  cfg.loss = kind;
  i3gn::I3gnModel model(cfg, 6, 13, 0.5);
  const std::vector<ItemIndex> prefix{0, 1, 2, 1};
  const std::vector<std::vector<ItemIndex>> nb{{2, 3}, {4, 0}};
  const auto neighbors = seqs(nb);
  const auto result = gk::grad_check_params(
      model.params(), [&](Tape& t) { return model.loss(t, prefix, neighbors, 3); });
  EXPECT_LT(result.max_relative_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(
    Variants, ModelGradient,
    ::testing::Combine(::testing::Values(Variant::kFull, Variant::kIntraOnly, Variant::kInterOnly, Variant::kAvgPool,
                                         Variant::kMeanGat, Variant::kMeanReadout),
                       ::testing::Values(i3gn::LossKind::kBinarySum, i3gn::LossKind::kCategorical)));

TEST(ModelCheckpoint, RoundTripsParametersAndConfig) {
  ModelConfig cfg = small_config(Variant::kMeanGat, 3, 2);
  cfg.ggnn_steps = 2;
  i3gn::I3gnModel model(cfg, 5, 4);
  const auto path = std::filesystem::temp_directory_path() / ("i3gn_model_" + std::to_string(::getpid()) + ".ckpt");
  i3gn::save_model(path, model, {{"corpus", "/data"}});
  const auto loaded = i3gn::load_model(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded.model.config().variant, Variant::kMeanGat);
  EXPECT_EQ(loaded.model.config().ggnn_steps, 2u);
  EXPECT_EQ(loaded.extra.at("corpus"), "/data");
  const std::vector<ItemIndex> prefix{1, 2};
  EXPECT_EQ(loaded.model.predict(prefix, {}), model.predict(prefix, {}));
}

TEST(ModelCheckpoint, MismatchedParametersAreRejected) {
  i3gn::I3gnModel model(small_config(Variant::kIntraOnly), 5, 4);
  EXPECT_THROW(i3gn::I3gnModel(small_config(Variant::kFull), 5, model.params()), std::invalid_argument);
  EXPECT_THROW(i3gn::I3gnModel(small_config(Variant::kIntraOnly), 6, model.params()), std::invalid_argument);
}

}  // namespace
