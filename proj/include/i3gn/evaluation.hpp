#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "i3gn/corpus.hpp"
#include "i3gn/encoders.hpp"
#include "i3gn/neighbor_index.hpp"
#include "json.hpp"

namespace i3gn {

/// One (prefix, next item) case with its retrieved neighbor sessions.
struct PreparedExample {
  SessionId session = 0;
  std::vector<ItemIndex> prefix;
  ItemIndex label = 0;
  NeighborSet neighbors;
};

/// Augments every session and retrieves neighbors from `index` with the
/// session's start time as the cut-off, so only strictly earlier training
/// sessions qualify. Retrieval is skipped when `retrieve` is false.
std::vector<PreparedExample> prepare_examples(const NeighborIndex& index, std::span<const Session> sessions,
                                              const RetrievalOptions& options, bool retrieve = true,
                                              std::size_t threads = 1);

/// Item sequences of the neighbor sessions, in neighbor order.
std::vector<ItemSeq> neighbor_items(const NeighborIndex& index, const NeighborSet& neighbors);

/// 1-based rank of `target`: 1 + #{higher score} + #{equal score at a lower
/// item index}.
std::size_t rank_of(std::span<const double> scores, std::size_t target);

struct EvalReport {
  std::vector<std::size_t> cutoffs;
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> mrr;
  std::size_t cases = 0;

  nlohmann::json to_json() const;
};

/// Aggregates ranks; nullopt marks a case with no recommendation (a miss at
/// every cutoff). Throws std::invalid_argument on an empty case list.
EvalReport report_from_ranks(std::span<const std::optional<std::size_t>> ranks, std::span<const std::size_t> cutoffs);

/// Scores for one case; nullopt means "no recommendation".
using Scorer = std::function<std::optional<std::vector<double>>(const PreparedExample&)>;

/// Ranks every case with `scorer` on `threads` workers. The scorer must be
/// safe to call concurrently.
EvalReport evaluate_scorer(std::span<const PreparedExample> cases, const Scorer& scorer,
                           std::span<const std::size_t> cutoffs, std::size_t threads = 1);

EvalReport evaluate_model(const I3gnModel& model, const NeighborIndex& index, std::span<const PreparedExample> cases,
                          std::span<const std::size_t> cutoffs, std::size_t threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` workers, each taking one
/// contiguous chunk. fn receives (i, worker).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace i3gn
