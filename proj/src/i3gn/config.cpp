#include "i3gn/config.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace i3gn {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 6> kVariants = {{
    {Variant::kFull, "full"},
    {Variant::kIntraOnly, "intra_only"},
    {Variant::kInterOnly, "inter_only"},
    {Variant::kAvgPool, "avg_pool"},
    {Variant::kMeanGat, "mean_gat"},
    {Variant::kMeanReadout, "mean_readout"},
}};

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known, const char* section) {
  if (!j.is_object()) throw std::invalid_argument(std::string(section) + " config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string("unknown ") + section + " config key '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (auto [value, name] : kVariants)
    if (value == v) return name;
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (auto [value, n] : kVariants)
    if (n == name) return value;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

std::string_view loss_name(LossKind k) { return k == LossKind::kBinarySum ? "binary_sum" : "categorical"; }

LossKind parse_loss(std::string_view name) {
  if (name == "binary_sum") return LossKind::kBinarySum;
  if (name == "categorical") return LossKind::kCategorical;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string_view norm_name(LengthNorm n) { return n == LengthNorm::kDistinct ? "distinct" : "raw"; }

LengthNorm parse_norm(std::string_view name) {
  if (name == "distinct") return LengthNorm::kDistinct;
  if (name == "raw") return LengthNorm::kRaw;
  throw std::invalid_argument("unknown similarity length norm '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (dim == 0 || heads == 0 || gat_layers == 0 || ggnn_steps == 0) {
    throw std::invalid_argument("model dim, heads, gat_layers and ggnn_steps must be positive");
  }
  if (leaky_slope < 0) throw std::invalid_argument("leaky_slope must be non-negative");
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || threads == 0) {
    throw std::invalid_argument("epochs, batch_size and threads must be positive");
  }
  if (!(lr > 0) || !(lr_decay > 0) || decay_every_intra == 0 || decay_every_inter == 0 || !(init_stddev > 0)) {
    throw std::invalid_argument("learning-rate schedule and init_stddev must be positive");
  }
  if (validation_fraction < 0 || validation_fraction >= 1) {
    throw std::invalid_argument("validation_fraction must lie in [0, 1)");
  }
}

void PreprocessConfig::validate() const {
  if (min_len == 0) throw std::invalid_argument("min_len must be positive");
  if (!(test_days > 0)) throw std::invalid_argument("test_days must be positive");
  if (delimiter.size() != 1) throw std::invalid_argument("delimiter must be a single character");
  if (session_column.empty() || timestamp_column.empty() || item_column.empty()) {
    throw std::invalid_argument("session, timestamp and item columns must be set");
  }
}

nlohmann::json to_json(const PreprocessConfig& c) {
  return {{"min_support", c.min_support},       {"min_len", c.min_len},
          {"test_days", c.test_days},           {"fraction", c.fraction},
          {"delimiter", c.delimiter},           {"header", c.header},
          {"session_column", c.session_column}, {"timestamp_column", c.timestamp_column},
          {"item_column", c.item_column},       {"event_column", c.event_column},
          {"keep_events", c.keep_events}};
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"heads", c.heads},
          {"gat_layers", c.gat_layers},
          {"ggnn_steps", c.ggnn_steps},
          {"variant", variant_name(c.variant)},
          {"leaky_slope", c.leaky_slope},
          {"loss", loss_name(c.loss)},
          {"shared_readout", c.shared_readout},
          {"separate_inter_embedding", c.separate_inter_embedding}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_decay", c.lr_decay},
          {"decay_every_intra", c.decay_every_intra},
          {"decay_every_inter", c.decay_every_inter},
          {"init_stddev", c.init_stddev},
          {"seed", c.seed},
          {"threads", c.threads},
          {"validation_fraction", c.validation_fraction},
          {"early_stop_patience", c.early_stop_patience}};
}

nlohmann::json to_json(const RetrievalOptions& c) {
  return {{"k", c.k}, {"m", c.m}, {"threshold", c.threshold}, {"length_norm", norm_name(c.norm)}};
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"preprocess", to_json(c.preprocess)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"retrieval", to_json(c.retrieval)},
          {"paths", c.paths}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  reject_unknown(j, {"dim", "heads", "gat_layers", "ggnn_steps", "variant", "leaky_slope", "loss", "shared_readout",
                     "separate_inter_embedding"},
                 "model");
  read(j, "dim", c.dim);
  read(j, "heads", c.heads);
  read(j, "gat_layers", c.gat_layers);
  read(j, "ggnn_steps", c.ggnn_steps);
  read(j, "leaky_slope", c.leaky_slope);
  read(j, "shared_readout", c.shared_readout);
  read(j, "separate_inter_embedding", c.separate_inter_embedding);
  std::string name;
  if (j.contains("variant")) {
    read(j, "variant", name);
    c.variant = parse_variant(name);
  }
  if (j.contains("loss")) {
    read(j, "loss", name);
    c.loss = parse_loss(name);
  }
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  reject_unknown(j, {"epochs", "batch_size", "lr", "lr_decay", "decay_every_intra", "decay_every_inter",
                     "init_stddev", "seed", "threads", "validation_fraction", "early_stop_patience"},
                 "train");
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "lr_decay", c.lr_decay);
  read(j, "decay_every_intra", c.decay_every_intra);
  read(j, "decay_every_inter", c.decay_every_inter);
  read(j, "init_stddev", c.init_stddev);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "validation_fraction", c.validation_fraction);
  read(j, "early_stop_patience", c.early_stop_patience);
  c.validate();
  return c;
}

RetrievalOptions retrieval_from_json(const nlohmann::json& j, RetrievalOptions c) {
  reject_unknown(j, {"k", "m", "threshold", "length_norm"}, "retrieval");
  read(j, "k", c.k);
  read(j, "m", c.m);
  read(j, "threshold", c.threshold);
  if (j.contains("length_norm")) {
    std::string name;
    read(j, "length_norm", name);
    c.norm = parse_norm(name);
  }
  if (c.k == 0 || c.m == 0) throw std::invalid_argument("retrieval k and m must be positive");
  return c;
}

PreprocessConfig preprocess_config_from_json(const nlohmann::json& j, PreprocessConfig c) {
  reject_unknown(j, {"min_support", "min_len", "test_days", "fraction", "delimiter", "header", "session_column",
                     "timestamp_column", "item_column", "event_column", "keep_events"},
                 "preprocess");
  read(j, "min_support", c.min_support);
  read(j, "min_len", c.min_len);
  read(j, "test_days", c.test_days);
  read(j, "fraction", c.fraction);
  read(j, "delimiter", c.delimiter);
  read(j, "header", c.header);
  read(j, "session_column", c.session_column);
  read(j, "timestamp_column", c.timestamp_column);
  read(j, "item_column", c.item_column);
  read(j, "event_column", c.event_column);
  read(j, "keep_events", c.keep_events);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  reject_unknown(j, {"preprocess", "model", "train", "retrieval", "paths"}, "run");
  if (j.contains("preprocess")) c.preprocess = preprocess_config_from_json(j.at("preprocess"), c.preprocess);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  if (j.contains("retrieval")) c.retrieval = retrieval_from_json(j.at("retrieval"), c.retrieval);
  if (j.contains("paths")) {
    if (!j.at("paths").is_object()) throw std::invalid_argument("paths config must be a JSON object");
    for (const auto& [key, value] : j.at("paths").items()) {
      if (!value.is_string()) throw std::invalid_argument("paths." + key + " must be a string");
      c.paths[key] = value.get<std::string>();
    }
  }
  return c;
}

}  // namespace i3gn
