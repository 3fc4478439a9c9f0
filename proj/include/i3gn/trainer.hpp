#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "gradkit/adam.hpp"
#include "i3gn/config.hpp"
#include "i3gn/corpus.hpp"
#include "i3gn/encoders.hpp"
#include "i3gn/evaluation.hpp"
#include "i3gn/neighbor_index.hpp"
#include "json.hpp"

namespace i3gn {

/// Per-group learning rates for 0-based `epoch`:
/// lr * decay^floor(epoch / period) with each group's own period.
gradkit::GroupLearningRates learning_rates(const TrainConfig& config, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean example loss
  double lr_intra_shared = 0.0;
  double lr_inter = 0.0;
  double wall_seconds = 0.0;
  std::size_t examples = 0;
  std::optional<double> validation_recall10;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  /// Writes epoch_<n>.ckpt and log.jsonl here when set.
  std::optional<std::filesystem::path> out_dir;
  /// Stored in each checkpoint's metadata.
  nlohmann::json checkpoint_extra = nlohmann::json::object();
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  I3gnModel model;
  std::vector<EpochLog> epochs;
  /// Epoch whose parameters `model` holds: the best validation epoch, or
  /// the last one without validation.
  std::size_t best_epoch = 0;
};

/// Splits the fitting set into batches: examples shuffled, grouped by
/// prefix length, each group cut into batches, then the batch order
/// shuffled.
std::vector<std::vector<std::size_t>> make_batches(std::span<const PreparedExample> examples,
                                                   std::size_t batch_size, std::mt19937_64& rng);

/// Mean loss over `batch` and its gradient. Examples are split into
/// contiguous chunks across workers; chunk gradients are summed in worker
/// order.
std::pair<double, gradkit::Gradients> batch_gradient(const I3gnModel& model, const NeighborIndex& index,
                                                     std::span<const PreparedExample> examples,
                                                     std::span<const std::size_t> batch, std::size_t threads);

/// Trains on the training partition of `corpus`. The last
/// `validation_fraction` of training sessions are held out from gradient
/// updates and used for early stopping on Recall@10; they stay retrievable
/// as neighbors.
TrainResult train(const SessionCorpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const RetrievalOptions& retrieval, const TrainOptions& options = {});

}  // namespace i3gn
