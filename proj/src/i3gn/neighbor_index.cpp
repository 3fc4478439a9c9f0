#include "i3gn/neighbor_index.hpp"

#include <algorithm>
#include <cmath>

namespace i3gn {

namespace {

std::vector<ItemIndex> sorted_distinct(ItemSeq items) {
  std::vector<ItemIndex> out(items.begin(), items.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t intersection_size(const std::vector<ItemIndex>& a, const std::vector<ItemIndex>& b) {
  std::size_t n = 0;
  for (auto i = a.begin(), j = b.begin(); i != a.end() && j != b.end();) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

double cosine(std::size_t overlap, std::size_t len_a, std::size_t len_b) {
  return static_cast<double>(overlap) / std::sqrt(static_cast<double>(len_a) * static_cast<double>(len_b));
}

}  // namespace

double similarity(ItemSeq a, ItemSeq b, LengthNorm norm) {
  const auto da = sorted_distinct(a);
  const auto db = sorted_distinct(b);
  const std::size_t la = norm == LengthNorm::kDistinct ? da.size() : a.size();
  const std::size_t lb = norm == LengthNorm::kDistinct ? db.size() : b.size();
  if (la == 0 || lb == 0) return 0.0;
  return cosine(intersection_size(da, db), la, lb);
}

NeighborIndex::NeighborIndex(const SessionCorpus& corpus) : corpus_(&corpus) {
  postings_.resize(corpus.vocab.size());
  distinct_.reserve(corpus.train_count);
  for (const Session& s : corpus.train()) {
    distinct_.push_back(sorted_distinct(s.items));
    for (ItemIndex i : distinct_.back()) postings_[i].push_back(s.id);
  }
  for (auto& list : postings_) {
    std::sort(list.begin(), list.end(), [this](SessionId a, SessionId b) { return more_recent(a, b); });
  }
}

bool NeighborIndex::more_recent(SessionId a, SessionId b) const {
  const Timestamp ta = corpus_->sessions[a].start_time;
  const Timestamp tb = corpus_->sessions[b].start_time;
  return ta != tb ? ta > tb : a > b;
}

const std::vector<SessionId>& NeighborIndex::postings(ItemIndex item) const {
  return item < postings_.size() ? postings_[item] : empty_;
}

std::vector<SessionId> NeighborIndex::candidates(ItemSeq prefix, std::size_t m, Timestamp now) const {
  std::vector<SessionId> out;
  for (ItemIndex item : sorted_distinct(prefix)) {
    for (SessionId id : postings(item)) {
      if (corpus_->sessions[id].start_time < now) out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end(), [this](SessionId a, SessionId b) { return more_recent(a, b); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() > m) out.resize(m);
  return out;
}

NeighborSet NeighborIndex::neighbors(ItemSeq prefix, const RetrievalOptions& options, Timestamp now) const {
  const auto query = sorted_distinct(prefix);
  const std::size_t query_len = options.norm == LengthNorm::kDistinct ? query.size() : prefix.size();
  NeighborSet result;
  // Candidates arrive newest first, so a stable sort on similarity keeps the
  // recency tie rule.
  for (SessionId id : candidates(prefix, options.m, now)) {
    const std::size_t len =
        options.norm == LengthNorm::kDistinct ? distinct_[id].size() : corpus_->sessions[id].items.size();
    const double sim = cosine(intersection_size(query, distinct_[id]), query_len, len);
    if (sim >= options.threshold) result.entries.push_back({id, sim});
  }
  std::stable_sort(result.entries.begin(), result.entries.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  if (result.entries.size() > options.k) result.entries.resize(options.k);
  return result;
}

}  // namespace i3gn
