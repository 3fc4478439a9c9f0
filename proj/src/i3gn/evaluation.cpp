#include "i3gn/evaluation.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>

namespace i3gn {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<PreparedExample> prepare_examples(const NeighborIndex& index, std::span<const Session> sessions,
                                              const RetrievalOptions& options, bool retrieve, std::size_t threads) {
  std::vector<PreparedExample> out;
  std::vector<Timestamp> now;
  for (const Session& s : sessions) {
    for (TrainingExample& ex : augment(s)) {
      out.push_back({ex.session, std::move(ex.prefix), ex.label, {}});
      now.push_back(s.start_time);
    }
  }
  if (retrieve) {
    parallel_for(out.size(), threads,
                 [&](std::size_t i, std::size_t) { out[i].neighbors = index.neighbors(out[i].prefix, options, now[i]); });
  }
  return out;
}

std::vector<ItemSeq> neighbor_items(const NeighborIndex& index, const NeighborSet& neighbors) {
  std::vector<ItemSeq> items;
  items.reserve(neighbors.size());
  for (const Neighbor& n : neighbors.entries) items.emplace_back(index.session(n.session).items);
  return items;
}

std::size_t rank_of(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) throw std::out_of_range("rank_of: target outside score vector");
  const double t = scores[target];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > t || (scores[i] == t && i < target)) ++rank;
  }
  return rank;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t n : cutoffs) {
    j["recall@" + std::to_string(n)] = recall.at(n);
    j["mrr@" + std::to_string(n)] = mrr.at(n);
  }
  j["cases"] = cases;
  return j;
}

EvalReport report_from_ranks(std::span<const std::optional<std::size_t>> ranks, std::span<const std::size_t> cutoffs) {
  if (ranks.empty()) throw std::invalid_argument("evaluation: no test cases");
  if (cutoffs.empty()) throw std::invalid_argument("evaluation: no cutoffs");
  EvalReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  report.cases = ranks.size();
  for (std::size_t n : cutoffs) {
    if (n == 0) throw std::invalid_argument("evaluation: cutoff must be positive");
    double hits = 0.0, reciprocal = 0.0;
    for (const auto& r : ranks) {
      if (r && *r <= n) {
        hits += 1.0;
        reciprocal += 1.0 / static_cast<double>(*r);
      }
    }
    report.recall[n] = hits / static_cast<double>(ranks.size());
    report.mrr[n] = reciprocal / static_cast<double>(ranks.size());
  }
  return report;
}

EvalReport evaluate_scorer(std::span<const PreparedExample> cases, const Scorer& scorer,
                           std::span<const std::size_t> cutoffs, std::size_t threads) {
  std::vector<std::optional<std::size_t>> ranks(cases.size());
  parallel_for(cases.size(), threads, [&](std::size_t i, std::size_t) {
    if (auto scores = scorer(cases[i])) ranks[i] = rank_of(*scores, cases[i].label);
  });
  return report_from_ranks(ranks, cutoffs);
}

EvalReport evaluate_model(const I3gnModel& model, const NeighborIndex& index, std::span<const PreparedExample> cases,
                          std::span<const std::size_t> cutoffs, std::size_t threads) {
  Scorer scorer = [&](const PreparedExample& ex) -> std::optional<std::vector<double>> {
    const auto neighbors = neighbor_items(index, ex.neighbors);
    return model.predict(ex.prefix, neighbors);
  };
  return evaluate_scorer(cases, scorer, cutoffs, threads);
}

}  // namespace i3gn
