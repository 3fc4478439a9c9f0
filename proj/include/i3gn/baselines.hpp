#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "i3gn/corpus.hpp"
#include "i3gn/neighbor_index.hpp"

namespace i3gn {

/// score(i) = sum of sim(s, j) over neighbor sessions j containing i.
std::vector<double> sknn_scores(const NeighborIndex& index, const NeighborSet& neighbors, std::size_t vocab_size);

/// Training click count of every item.
std::vector<double> pop_scores(const SessionCorpus& corpus);

/// Item-to-item cosine over session-occurrence indicator vectors of the
/// training partition.
class ItemKnn {
 public:
  explicit ItemKnn(const SessionCorpus& corpus);

  double similarity(ItemIndex a, ItemIndex b) const;
  /// similarity(last item of prefix, i) for every item; nullopt when the
  /// last item never occurs in training.
  std::optional<std::vector<double>> scores(ItemSeq prefix) const;

 private:
  std::size_t vocab_size_;
  // Sorted training session ids per item.
  std::vector<std::vector<SessionId>> sessions_;
  std::vector<std::vector<ItemIndex>> session_items_;
};

}  // namespace i3gn
