#include "i3gn/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "gradkit/tensor.hpp"

namespace i3gn {

namespace fs = std::filesystem;

gradkit::GroupLearningRates learning_rates(const TrainConfig& config, std::size_t epoch) {
  auto decayed = [&](std::size_t period) {
    return config.lr * std::pow(config.lr_decay, static_cast<double>(epoch / period));
  };
  return {decayed(config.decay_every_intra), decayed(config.decay_every_inter)};
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j{{"epoch", epoch},
                   {"loss", loss},
                   {"lr_intra_shared", lr_intra_shared},
                   {"lr_inter", lr_inter},
                   {"wall_seconds", wall_seconds},
                   {"examples", examples}};
  j["validation_recall@10"] = validation_recall10 ? nlohmann::json(*validation_recall10) : nlohmann::json();
  return j;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const PreparedExample> examples,
                                                   std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i : order) by_length[examples[i].prefix.size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [length, group] : by_length) {
    for (std::size_t begin = 0; begin < group.size(); begin += batch_size) {
      const std::size_t end = std::min(group.size(), begin + batch_size);
      batches.emplace_back(group.begin() + static_cast<std::ptrdiff_t>(begin),
                           group.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::pair<double, gradkit::Gradients> batch_gradient(const I3gnModel& model, const NeighborIndex& index,
                                                     std::span<const PreparedExample> examples,
                                                     std::span<const std::size_t> batch, std::size_t threads) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, batch.size()));
  std::vector<gradkit::Gradients> grads(workers, gradkit::Gradients(model.params().size()));
  std::vector<double> losses(workers, 0.0);
  parallel_for(batch.size(), workers, [&](std::size_t i, std::size_t w) {
    const PreparedExample& ex = examples[batch[i]];
    const auto neighbors = neighbor_items(index, ex.neighbors);
    gradkit::Tape tape;
    gradkit::Var loss = model.loss(tape, ex.prefix, neighbors, ex.label);
    tape.backward(loss);
    losses[w] += loss.value().item();
    grads[w].accumulate(tape.param_gradients(model.params()));
  });
  double total = losses[0];
  for (std::size_t w = 1; w < workers; ++w) {
    total += losses[w];
    grads[0].accumulate(grads[w]);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grads[0].scale(inv);
  return {total * inv, std::move(grads[0])};
}

TrainResult train(const SessionCorpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const RetrievalOptions& retrieval, const TrainOptions& options) {
  model_config.validate();
  config.validate();
  const std::size_t n_train = corpus.train_count;
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n_train)));
  if (n_train <= n_val) throw std::invalid_argument("train: no training sessions");
  const auto sessions = corpus.train();

  TrainResult result{I3gnModel(model_config, corpus.vocab.size(), config.seed, config.init_stddev), {}, 0};
  I3gnModel& model = result.model;
  const bool retrieve = model.uses_inter();
  const NeighborIndex index(corpus);
  const auto fit = prepare_examples(index, sessions.first(n_train - n_val), retrieval, retrieve, config.threads);
  const auto validation = prepare_examples(index, sessions.subspan(n_train - n_val), retrieval, retrieve,
                                           config.threads);
  if (fit.empty()) throw std::invalid_argument("train: training sessions yield no examples");

  std::ofstream log;
  if (options.out_dir) {
    fs::create_directories(*options.out_dir);
    log.open(*options.out_dir / "log.jsonl", std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (*options.out_dir / "log.jsonl").string());
  }

  std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  const std::array<std::size_t, 1> cutoff{10};
  std::optional<double> best_recall;
  std::optional<gradkit::ParamStore> best_params;
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto lr = learning_rates(config, epoch);
    const auto batches = make_batches(fit, config.batch_size, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        auto [loss, grads] = batch_gradient(model, index, fit, batches[b], config.threads);
        loss_sum += loss * static_cast<double>(batches[b].size());
        gradkit::adam_step(model.params(), grads, lr);
      } catch (const gradkit::NumericError& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) +
                                 ": non-finite value: " + e.what());
      }
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.loss = loss_sum / static_cast<double>(fit.size());
    entry.lr_intra_shared = lr.intra_shared;
    entry.lr_inter = lr.inter;
    entry.examples = fit.size();
    if (!validation.empty()) {
      entry.validation_recall10 = evaluate_model(model, index, validation, cutoff, config.threads).recall.at(10);
    }
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (options.out_dir) {
      save_model(*options.out_dir / ("epoch_" + std::to_string(entry.epoch) + ".ckpt"), model,
                 options.checkpoint_extra);
      log << entry.to_json().dump() << '\n' << std::flush;
      if (!log) throw std::runtime_error("write to log.jsonl failed");
    }
    result.epochs.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);

    if (!entry.validation_recall10) {
      result.best_epoch = entry.epoch;
      continue;
    }
    if (!best_recall || *entry.validation_recall10 > *best_recall) {
      best_recall = entry.validation_recall10;
      best_params = model.params();
      result.best_epoch = entry.epoch;
      stale = 0;
    } else if (config.early_stop_patience > 0 && ++stale >= config.early_stop_patience) {
      break;
    }
  }

  if (best_params) model.params() = std::move(*best_params);
  if (options.out_dir) save_model(*options.out_dir / "model.ckpt", model, options.checkpoint_extra);
  return result;
}

}  // namespace i3gn
