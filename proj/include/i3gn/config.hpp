#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "i3gn/neighbor_index.hpp"
#include "json.hpp"

namespace i3gn {

/// Model ablations.
enum class Variant {
  kFull,         // both encoders fused by the gate
  kIntraOnly,    // gated-graph branch only
  kInterOnly,    // attention branch only
  kAvgPool,      // inter branch = mean of all inter-graph node embeddings
  kMeanGat,      // attention weights fixed to 1/|adj(i)|
  kMeanReadout,  // inter readout uses the mean of session node vectors
};

enum class LossKind {
  kBinarySum,    // -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)]
  kCategorical,  // -log p_target
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
std::string_view loss_name(LossKind k);
LossKind parse_loss(std::string_view name);
std::string_view norm_name(LengthNorm n);
LengthNorm parse_norm(std::string_view name);

struct ModelConfig {
  std::size_t dim = 100;
  std::size_t heads = 8;
  std::size_t gat_layers = 2;
  std::size_t ggnn_steps = 1;
  Variant variant = Variant::kFull;
  double leaky_slope = 0.2;
  LossKind loss = LossKind::kBinarySum;
  /// Inter readout reuses the intra readout weights.
  bool shared_readout = false;
  /// Inter encoder gets its own embedding table (in the inter LR group).
  bool separate_inter_embedding = false;

  /// Throws std::invalid_argument on zero sizes.
  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double lr_decay = 0.1;
  std::size_t decay_every_intra = 3;
  std::size_t decay_every_inter = 5;
  double init_stddev = 0.1;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  /// Trailing share of training sessions held out for early stopping; 0
  /// disables validation.
  double validation_fraction = 0.05;
  /// Stop after this many epochs without a validation Recall@10 gain; 0
  /// disables early stopping.
  std::size_t early_stop_patience = 3;

  void validate() const;
};

/// Ingest and filtering settings of the preprocess stage.
struct PreprocessConfig {
  std::size_t min_support = 5;
  std::size_t min_len = 2;
  double test_days = 1.0;
  std::string fraction = "1";
  std::string delimiter = ",";
  bool header = false;
  /// Column references: a decimal string is a 0-based position, anything
  /// else a header name. An empty event column disables type filtering.
  std::string session_column = "0";
  std::string timestamp_column = "1";
  std::string item_column = "2";
  std::string event_column;
  std::vector<std::string> keep_events;

  void validate() const;
};

/// Resolved configuration of one CLI run.
struct RunConfig {
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  RetrievalOptions retrieval;
  std::map<std::string, std::string> paths;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RetrievalOptions& c);
nlohmann::json to_json(const PreprocessConfig& c);
nlohmann::json to_json(const RunConfig& c);

// Each reader starts from `base` and overrides only the keys present.
// Unknown keys throw std::invalid_argument.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
RetrievalOptions retrieval_from_json(const nlohmann::json& j, RetrievalOptions base = {});
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j, PreprocessConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

}  // namespace i3gn
