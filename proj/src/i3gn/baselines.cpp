#include "i3gn/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace i3gn {

std::vector<double> sknn_scores(const NeighborIndex& index, const NeighborSet& neighbors, std::size_t vocab_size) {
  std::vector<double> scores(vocab_size, 0.0);
  for (const Neighbor& n : neighbors.entries) {
    for (ItemIndex item : index.distinct_items(n.session)) scores.at(item) += n.similarity;
  }
  return scores;
}

std::vector<double> pop_scores(const SessionCorpus& corpus) {
  std::vector<double> counts(corpus.vocab.size(), 0.0);
  for (const Session& s : corpus.train())
    for (ItemIndex item : s.items) counts.at(item) += 1.0;
  return counts;
}

ItemKnn::ItemKnn(const SessionCorpus& corpus) : vocab_size_(corpus.vocab.size()), sessions_(vocab_size_) {
  for (const Session& s : corpus.train()) {
    std::vector<ItemIndex> items(s.items.begin(), s.items.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    for (ItemIndex item : items) sessions_.at(item).push_back(static_cast<SessionId>(session_items_.size()));
    session_items_.push_back(std::move(items));
  }
}

double ItemKnn::similarity(ItemIndex a, ItemIndex b) const {
  const auto& sa = sessions_.at(a);
  const auto& sb = sessions_.at(b);
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t overlap = 0;
  auto i = sa.begin(), j = sb.begin();
  while (i != sa.end() && j != sb.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++overlap, ++i, ++j;
    }
  }
  return static_cast<double>(overlap) / std::sqrt(static_cast<double>(sa.size()) * static_cast<double>(sb.size()));
}

std::optional<std::vector<double>> ItemKnn::scores(ItemSeq prefix) const {
  if (prefix.empty()) return std::nullopt;
  const ItemIndex last = prefix.back();
  if (last >= vocab_size_ || sessions_[last].empty()) return std::nullopt;
  // Only items sharing a session with `last` can score above zero.
  std::vector<double> out(vocab_size_, 0.0);
  std::vector<std::uint8_t> seen(vocab_size_, 0);
  for (SessionId s : sessions_[last]) {
    for (ItemIndex item : session_items_[s]) {
      if (seen[item]) continue;
      seen[item] = 1;
      out[item] = similarity(last, item);
    }
  }
  return out;
}

}  // namespace i3gn
