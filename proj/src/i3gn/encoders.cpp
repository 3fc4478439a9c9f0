#include "i3gn/encoders.hpp"

#include <stdexcept>
#include <string>
#include <utility>

#include "gradkit/checkpoint.hpp"

namespace i3gn {

using gradkit::ParamGroup;
using gradkit::ParamSpec;
using gradkit::Tensor;
namespace gk = gradkit;

namespace {

std::vector<std::size_t> as_slots(std::span<const ItemIndex> items) {
  return {items.begin(), items.end()};
}

bool fused(Variant v) { return v != Variant::kIntraOnly && v != Variant::kInterOnly; }

bool inter_has_readout(const ModelConfig& c) { return c.variant != Variant::kAvgPool; }

bool inter_attention_readout(const ModelConfig& c) { return c.variant != Variant::kMeanReadout; }

std::string head_name(std::size_t layer, std::size_t head, const char* field) {
  return "inter.gat" + std::to_string(layer) + ".head" + std::to_string(head) + "." + field;
}

void add_readout(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t d, ParamGroup group,
                 bool attention) {
  if (attention) {
    specs.push_back({prefix + ".q", {d}, group});
    specs.push_back({prefix + ".w_last", {d, d}, group});
    specs.push_back({prefix + ".w_node", {d, d}, group});
    specs.push_back({prefix + ".b", {d}, group});
  }
  specs.push_back({prefix + ".w_out", {d, 2 * d}, group});
}

}  // namespace

Var ggnn_encode(const IntraGraph& g, Var h, const GgnnWeights& w, std::size_t steps) {
  const std::size_t n = g.size();
  if (h.rows() != n) throw gk::ShapeError("ggnn_encode: feature rows differ from graph size");
  Tape& tape = h.tape();
  Var a_out_adj = tape.constant(Tensor({n, n}, g.a_out));
  Var a_in_adj = tape.constant(Tensor({n, n}, g.a_in));
  for (std::size_t t = 0; t < steps; ++t) {
    Var a_out = gk::matmul(a_out_adj, gk::matmul_bt(h, w.w_out)) + w.b_out;
    Var a_in = gk::matmul(a_in_adj, gk::matmul_bt(h, w.w_in)) + w.b_in;
    Var a = gk::concat({a_out, a_in}, 1);
    Var z = gk::sigmoid(gk::matmul_bt(a, w.w_z) + gk::matmul_bt(h, w.u_z));
    Var r = gk::sigmoid(gk::matmul_bt(a, w.w_r) + gk::matmul_bt(h, w.u_r));
    Var candidate = gk::tanh(gk::matmul_bt(a, w.w_h) + gk::matmul_bt(gk::mul(r, h), w.u_h));
    h = gk::mul(gk::one_minus(z), h) + gk::mul(z, candidate);
  }
  return h;
}

Var readout_attention(Var s, const ReadoutWeights& w) {
  const std::size_t m = s.rows();
  Var last = gk::slice_rows(s, m - 1, m);
  Var act = gk::sigmoid(gk::matmul_bt(last, w.w_last) + gk::matmul_bt(s, w.w_node) + w.b);
  return gk::matmul_bt(act, w.q);
}

Var attention_readout(Var s, const ReadoutWeights& w) {
  if (s.rows() == 0) throw gk::ShapeError("attention_readout: no rows");
  const std::size_t m = s.rows();
  Var last = gk::slice_rows(s, m - 1, m);
  Var global = gk::matmul(gk::transpose(readout_attention(s, w)), s);
  return gk::matmul_bt(gk::concat({last, global}, 1), w.w_out);
}

Var mean_readout(Var s, const ReadoutWeights& w) {
  if (s.rows() == 0) throw gk::ShapeError("mean_readout: no rows");
  const std::size_t m = s.rows();
  Var last = gk::slice_rows(s, m - 1, m);
  return gk::matmul_bt(gk::concat({last, gk::mean(s, 0)}, 1), w.w_out);
}

Var gat_attention(const InterGraph& g, Var wh, Var attn, double slope) {
  const std::size_t d = wh.cols();
  if (attn.rows() != 2 * d || attn.cols() != 1) throw gk::ShapeError("gat_attention: attention vector is not 2d x 1");
  Var source = gk::matmul(wh, gk::slice_rows(attn, 0, d));
  Var target = gk::transpose(gk::matmul(wh, gk::slice_rows(attn, d, 2 * d)));
  const auto mask = g.mask();
  return gk::masked_softmax(gk::leaky_relu(source + target, slope), mask);
}

Var mean_attention(Tape& tape, const InterGraph& g) {
  const std::size_t n = g.size();
  Tensor alpha = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = 1.0 / static_cast<double>(g.adjacency[i].size());
    for (std::size_t j : g.adjacency[i]) alpha(i, j) = weight;
  }
  return tape.constant(std::move(alpha));
}

Var gat_layer(const InterGraph& g, Var h, std::span<const GatHead> heads, HeadMode mode, double slope,
              bool fixed_mean) {
  if (heads.empty()) throw std::invalid_argument("gat_layer: no heads");
  if (h.rows() != g.size()) throw gk::ShapeError("gat_layer: feature rows differ from graph size");
  Var fixed;
  if (fixed_mean) fixed = mean_attention(h.tape(), g);
  std::vector<Var> outputs;
  outputs.reserve(heads.size());
  for (const GatHead& head : heads) {
    Var wh = gk::matmul_bt(h, head.w);
    Var alpha = fixed_mean ? fixed : gat_attention(g, wh, head.attn, slope);
    Var out = gk::matmul(alpha, wh);
    outputs.push_back(mode == HeadMode::kConcat ? gk::sigmoid(out) : out);
  }
  if (mode == HeadMode::kConcat) return gk::concat(outputs, 1);
  Var total = outputs.front();
  for (std::size_t k = 1; k < outputs.size(); ++k) total = total + outputs[k];
  return gk::sigmoid(gk::scale(total, 1.0 / static_cast<double>(outputs.size())));
}

Var fuse(Var s_intra, Var s_inter, const FusionWeights& w) {
  Var f = gk::sigmoid(gk::matmul_bt(s_inter, w.w_inter) + gk::matmul_bt(s_intra, w.w_intra) + w.b);
  return gk::mul(f, s_inter) + gk::mul(gk::one_minus(f), s_intra);
}

Var score(Var s_h, Var embedding) { return gk::softmax(gk::matmul_bt(s_h, embedding), 1); }

Var loss(Var probs, std::size_t target, LossKind kind) {
  return kind == LossKind::kBinarySum ? gk::binary_cross_entropy_sum(probs, target)
                                      : gk::categorical_cross_entropy(probs, target);
}

std::vector<ParamSpec> parameter_specs(const ModelConfig& c, std::size_t vocab_size) {
  c.validate();
  if (vocab_size == 0) throw std::invalid_argument("parameter_specs: empty vocabulary");
  const std::size_t d = c.dim;
  const bool intra = c.variant != Variant::kInterOnly;
  const bool inter = c.variant != Variant::kIntraOnly;
  std::vector<ParamSpec> specs;
  specs.push_back({"embedding", {vocab_size, d}, ParamGroup::kIntraShared});
  if (inter && c.separate_inter_embedding) specs.push_back({"inter.embedding", {vocab_size, d}, ParamGroup::kInter});

  if (intra) {
    const auto g = ParamGroup::kIntraShared;
    for (const char* name : {"w_out", "w_in"}) specs.push_back({std::string("intra.") + name, {d, d}, g});
    for (const char* name : {"b_out", "b_in"}) specs.push_back({std::string("intra.") + name, {d}, g});
    for (const char* name : {"w_z", "w_r", "w_h"}) specs.push_back({std::string("intra.") + name, {d, 2 * d}, g});
    for (const char* name : {"u_z", "u_r", "u_h"}) specs.push_back({std::string("intra.") + name, {d, d}, g});
  }
  const bool shared_readout_needed = c.shared_readout && inter && inter_has_readout(c);
  if (intra || shared_readout_needed) {
    add_readout(specs, "intra.readout", d, ParamGroup::kIntraShared,
                intra || inter_attention_readout(c));
  }

  if (inter && c.variant != Variant::kAvgPool) {
    std::size_t width = d;
    for (std::size_t layer = 0; layer < c.gat_layers; ++layer) {
      for (std::size_t k = 0; k < c.heads; ++k) {
        specs.push_back({head_name(layer, k, "w"), {d, width}, ParamGroup::kInter});
        if (c.variant != Variant::kMeanGat) specs.push_back({head_name(layer, k, "attn"), {2 * d, 1}, ParamGroup::kInter});
      }
      width = c.heads * d;
    }
    if (!c.shared_readout) add_readout(specs, "inter.readout", d, ParamGroup::kInter, inter_attention_readout(c));
  }

  if (fused(c.variant)) {
    specs.push_back({"fusion.w_inter", {d, d}, ParamGroup::kIntraShared});
    specs.push_back({"fusion.w_intra", {d, d}, ParamGroup::kIntraShared});
    specs.push_back({"fusion.b", {d}, ParamGroup::kIntraShared});
  }
  return specs;
}

I3gnModel::I3gnModel(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed, double stddev)
    : config_(config), vocab_size_(vocab_size) {
  const auto specs = parameter_specs(config_, vocab_size_);
  params_ = gk::init_params(specs, seed, stddev);
}

I3gnModel::I3gnModel(const ModelConfig& config, std::size_t vocab_size, gk::ParamStore params)
    : config_(config), vocab_size_(vocab_size), params_(std::move(params)) {
  const auto specs = parameter_specs(config_, vocab_size_);
  if (specs.size() != params_.size()) {
    throw std::invalid_argument("model expects " + std::to_string(specs.size()) + " parameter tensors, got " +
                                std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& p = params_[i];
    if (p.name != specs[i].name || p.value.shape() != specs[i].shape || p.group != specs[i].group) {
      throw std::invalid_argument("parameter " + std::to_string(i) + " ('" + p.name + "', " +
                                  gk::shape_string(p.value.shape()) + ") does not match expected '" + specs[i].name +
                                  "', " + gk::shape_string(specs[i].shape));
    }
  }
}

GgnnWeights I3gnModel::ggnn_weights(Tape& tape) const {
  auto p = [&](const char* name) { return tape.param(params_, std::string("intra.") + name); };
  return {p("w_out"), p("w_in"), p("b_out"), p("b_in"), p("w_z"),
          p("w_r"),   p("w_h"),  p("u_z"),   p("u_r"),  p("u_h")};
}

ReadoutWeights I3gnModel::readout_weights(Tape& tape, const char* prefix) const {
  auto p = [&](const char* name) -> Var {
    const auto index = params_.find(std::string(prefix) + "." + name);
    return index ? tape.param(params_, *index) : Var{};
  };
  return {p("q"), p("w_last"), p("w_node"), p("b"), p("w_out")};
}

Var I3gnModel::intra_session(Tape& tape, ItemSeq prefix, Var embedding) const {
  const IntraGraph g = build_intra_graph(prefix);
  Var h = gk::gather_rows(embedding, as_slots(g.node_items));
  h = ggnn_encode(g, h, ggnn_weights(tape), config_.ggnn_steps);
  return attention_readout(gk::gather_rows(h, g.alias), readout_weights(tape, "intra.readout"));
}

Var I3gnModel::inter_session(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors, Var embedding) const {
  const InterGraph g = build_inter_graph(prefix, neighbors);
  Var h = gk::gather_rows(embedding, as_slots(g.node_items));
  if (config_.variant == Variant::kAvgPool) return gk::mean(h, 0);

  std::vector<GatHead> heads(config_.heads);
  for (std::size_t layer = 0; layer < config_.gat_layers; ++layer) {
    const bool fixed = config_.variant == Variant::kMeanGat;
    for (std::size_t k = 0; k < config_.heads; ++k) {
      heads[k].w = tape.param(params_, head_name(layer, k, "w"));
      if (!fixed) heads[k].attn = tape.param(params_, head_name(layer, k, "attn"));
    }
    const HeadMode mode = layer + 1 == config_.gat_layers ? HeadMode::kAverage : HeadMode::kConcat;
    h = gat_layer(g, h, heads, mode, config_.leaky_slope, fixed);
  }
  Var s = gk::gather_rows(h, g.session_slots);
  const ReadoutWeights w = readout_weights(tape, config_.shared_readout ? "intra.readout" : "inter.readout");
  return config_.variant == Variant::kMeanReadout ? mean_readout(s, w) : attention_readout(s, w);
}

ForwardResult I3gnModel::forward(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors) const {
  if (prefix.empty()) throw std::invalid_argument("forward: empty prefix");
  for (ItemIndex item : prefix) {
    if (item >= vocab_size_) throw std::out_of_range("forward: item " + std::to_string(item) + " outside vocabulary");
  }
  for (ItemSeq nb : neighbors) {
    for (ItemIndex item : nb) {
      if (item >= vocab_size_) throw std::out_of_range("forward: neighbor item outside vocabulary");
    }
  }
  ForwardResult r;
  Var embedding = tape.param(params_, "embedding");
  if (uses_intra()) r.s_intra = intra_session(tape, prefix, embedding);
  if (uses_inter()) {
    Var inter_embedding = config_.separate_inter_embedding ? tape.param(params_, "inter.embedding") : embedding;
    r.s_inter = inter_session(tape, prefix, neighbors, inter_embedding);
  }
  if (!r.s_inter.valid()) {
    r.s_h = r.s_intra;
  } else if (!r.s_intra.valid()) {
    r.s_h = r.s_inter;
  } else {
    FusionWeights w{tape.param(params_, "fusion.w_inter"), tape.param(params_, "fusion.w_intra"),
                    tape.param(params_, "fusion.b")};
    r.s_h = fuse(r.s_intra, r.s_inter, w);
  }
  r.probs = score(r.s_h, embedding);
  return r;
}

Var I3gnModel::loss(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors, ItemIndex target) const {
  if (target >= vocab_size_) throw std::out_of_range("loss: target " + std::to_string(target) + " outside vocabulary");
  return i3gn::loss(forward(tape, prefix, neighbors).probs, target, config_.loss);
}

std::vector<double> I3gnModel::predict(ItemSeq prefix, std::span<const ItemSeq> neighbors) const {
  Tape tape;
  const auto values = forward(tape, prefix, neighbors).probs.value().values();
  return {values.begin(), values.end()};
}

void save_model(const std::filesystem::path& path, const I3gnModel& model, const nlohmann::json& extra) {
  gk::Checkpoint ckpt;
  ckpt.metadata = nlohmann::json{{"format", "i3gn-model"},
                                 {"model", to_json(model.config())},
                                 {"vocab_size", model.vocab_size()},
                                 {"extra", extra}}
                      .dump();
  ckpt.params = model.params();
  gk::save_checkpoint(path, ckpt);
}

LoadedModel load_model(const std::filesystem::path& path) {
  gk::Checkpoint ckpt = gk::load_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw gk::CheckpointError(path.string() + ": metadata is not JSON: " + e.what());
  }
  if (meta.value("format", "") != "i3gn-model") throw gk::CheckpointError(path.string() + ": not a model checkpoint");
  const ModelConfig config = model_config_from_json(meta.at("model"));
  const auto vocab_size = meta.at("vocab_size").get<std::size_t>();
  return {I3gnModel(config, vocab_size, std::move(ckpt.params)), meta.value("extra", nlohmann::json::object())};
}

}  // namespace i3gn
