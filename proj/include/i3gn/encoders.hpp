#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "gradkit/ops.hpp"
#include "gradkit/param_store.hpp"
#include "gradkit/tape.hpp"
#include "i3gn/config.hpp"
#include "i3gn/corpus.hpp"
#include "i3gn/graphs.hpp"
#include "json.hpp"

// Model core. Node features are rows: a node vector v is a 1 x d row and a
// node matrix H is n x d. A weight W written as "W v" in column notation is
// stored d_out x d_in and applied as H W^T (gradkit::matmul_bt).

namespace i3gn {

using gradkit::Tape;
using gradkit::Var;

struct GgnnWeights {
  Var w_out, w_in;  // d x d
  Var b_out, b_in;  // d
  Var w_z, w_r, w_h;  // d x 2d
  Var u_z, u_r, u_h;  // d x d
};

struct ReadoutWeights {
  Var q;       // d
  Var w_last;  // d x d, applied to the last click
  Var w_node;  // d x d, applied to every click
  Var b;       // d
  Var w_out;   // d x 2d
};

struct GatHead {
  Var w;     // d_out x d_in
  Var attn;  // 2 d_out x 1: source half then target half
};

enum class HeadMode { kConcat, kAverage };

struct FusionWeights {
  Var w_inter, w_intra;  // d x d
  Var b;                 // d
};

/// `steps` rounds of gated propagation over `g` starting from `h` (n x d).
Var ggnn_encode(const IntraGraph& g, Var h, const GgnnWeights& w, std::size_t steps);

/// Soft-attention readout of the click rows `s` (one row per click, last
/// row = most recent click). Attention weights are left unnormalized.
Var attention_readout(Var s, const ReadoutWeights& w);
/// Readout variant that replaces the attention sum by the row mean; only
/// `w.w_out` is used.
Var mean_readout(Var s, const ReadoutWeights& w);
/// Unnormalized attention weights of attention_readout, m x 1.
Var readout_attention(Var s, const ReadoutWeights& w);

/// Softmax-normalized attention of one head over each node's adjacency,
/// n x n with zeros off the adjacency. `wh` is the projected input H W^T.
Var gat_attention(const InterGraph& g, Var wh, Var attn, double slope);
/// Fixed attention 1/|adj(i)| on the adjacency.
Var mean_attention(Tape& tape, const InterGraph& g);

/// One attention layer. Concat mode returns sigmoid of each head side by
/// side (n x K d_out); average mode returns sigmoid of the mean pre-
/// activation (n x d_out). With `fixed_mean` the heads' attention vectors
/// are ignored and each neighbor gets weight 1/|adj(i)|.
Var gat_layer(const InterGraph& g, Var h, std::span<const GatHead> heads, HeadMode mode, double slope,
              bool fixed_mean = false);

/// f = sigmoid(s_inter W_f1^T + s_intra W_f2^T + b); f s_inter + (1 - f) s_intra.
Var fuse(Var s_intra, Var s_inter, const FusionWeights& w);

/// Softmax over every item of s_h . embedding_i, 1 x |I|.
Var score(Var s_h, Var embedding);

Var loss(Var probs, std::size_t target, LossKind kind);

/// Parameter layout of a model. Only tensors used by `config.variant` are
/// listed.
std::vector<gradkit::ParamSpec> parameter_specs(const ModelConfig& config, std::size_t vocab_size);

struct ForwardResult {
  Var probs;    // 1 x |I|
  Var s_h;      // 1 x d
  Var s_intra;  // invalid for inter-only variants
  Var s_inter;  // invalid for intra_only
};

class I3gnModel {
 public:
  /// Fresh model with parameters drawn from N(0, stddev^2).
  I3gnModel(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed, double stddev = 0.1);
  /// Adopts `params`; throws std::invalid_argument when names or shapes
  /// differ from parameter_specs(config, vocab_size).
  I3gnModel(const ModelConfig& config, std::size_t vocab_size, gradkit::ParamStore params);

  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  gradkit::ParamStore& params() { return params_; }
  const gradkit::ParamStore& params() const { return params_; }

  /// Builds both graphs and runs the full pipeline on `tape`.
  ForwardResult forward(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors) const;
  Var loss(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors, ItemIndex target) const;
  /// Item probabilities without keeping the tape.
  std::vector<double> predict(ItemSeq prefix, std::span<const ItemSeq> neighbors) const;

  bool uses_intra() const { return config_.variant != Variant::kInterOnly; }
  bool uses_inter() const { return config_.variant != Variant::kIntraOnly; }

 private:
  GgnnWeights ggnn_weights(Tape& tape) const;
  ReadoutWeights readout_weights(Tape& tape, const char* prefix) const;
  Var intra_session(Tape& tape, ItemSeq prefix, Var embedding) const;
  Var inter_session(Tape& tape, ItemSeq prefix, std::span<const ItemSeq> neighbors, Var embedding) const;

  ModelConfig config_;
  std::size_t vocab_size_;
  gradkit::ParamStore params_;
};

/// Model checkpoint: gradkit checkpoint whose metadata holds
/// {"format": "i3gn-model", "model": ModelConfig, "vocab_size": n, "extra": ...}.
void save_model(const std::filesystem::path& path, const I3gnModel& model,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  I3gnModel model;
  nlohmann::json extra;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace i3gn
