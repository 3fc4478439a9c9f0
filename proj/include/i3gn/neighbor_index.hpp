#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "i3gn/corpus.hpp"

namespace i3gn {

/// How l(s) in the cosine denominator is measured.
enum class LengthNorm {
  kDistinct,  // number of distinct items (binary-vector norm)
  kRaw,       // number of clicks
};

struct RetrievalOptions {
  std::size_t k = 120;
  std::size_t m = 1000;
  double threshold = 0.5;
  LengthNorm norm = LengthNorm::kDistinct;
};

struct Neighbor {
  SessionId session = 0;
  double similarity = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Top-k past sessions for one query, by similarity descending and, at
/// equal similarity, newer first.
struct NeighborSet {
  std::vector<Neighbor> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// No-time-limit sentinel for ad-hoc queries.
inline constexpr Timestamp kNoTimeLimit = std::numeric_limits<Timestamp>::max();

/// Cosine similarity of the binary item-presence vectors of `a` and `b`,
/// divided by sqrt(l(a) l(b)).
double similarity(ItemSeq a, ItemSeq b, LengthNorm norm = LengthNorm::kDistinct);

/// Inverted index over the training partition of a corpus. Immutable after
/// construction; concurrent queries are safe.
class NeighborIndex {
 public:
  explicit NeighborIndex(const SessionCorpus& corpus);

  /// Training sessions containing `item`, newest first, one entry per session.
  const std::vector<SessionId>& postings(ItemIndex item) const;

  /// Union of postings of the prefix items, restricted to sessions that
  /// started strictly before `now`, truncated to the `m` most recent.
  std::vector<SessionId> candidates(ItemSeq prefix, std::size_t m, Timestamp now) const;

  NeighborSet neighbors(ItemSeq prefix, const RetrievalOptions& options, Timestamp now) const;

  const SessionCorpus& corpus() const { return *corpus_; }
  const Session& session(SessionId id) const { return corpus_->sessions[id]; }
  std::size_t distinct_count(SessionId id) const { return distinct_[id].size(); }
  /// Sorted distinct items of a training session.
  const std::vector<ItemIndex>& distinct_items(SessionId id) const { return distinct_[id]; }

  /// Recency order: later start first, larger id first on equal start.
  bool more_recent(SessionId a, SessionId b) const;

 private:
  const SessionCorpus* corpus_;
  std::vector<std::vector<SessionId>> postings_;
  std::vector<std::vector<ItemIndex>> distinct_;
  std::vector<SessionId> empty_;
};

}  // namespace i3gn
