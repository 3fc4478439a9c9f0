#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "i3gn/corpus.hpp"

namespace i3gn {

/// Directed graph over one session's distinct items.
struct IntraGraph {
  /// Distinct items in order of first click.
  std::vector<ItemIndex> node_items;
  /// Node slot of every click position.
  std::vector<std::size_t> alias;
  /// Row-major n x n normalized out-/in-edge weights.
  std::vector<double> a_out;
  std::vector<double> a_in;
  std::size_t last_slot = 0;

  std::size_t size() const { return node_items.size(); }
  double out_weight(std::size_t from, std::size_t to) const { return a_out[from * size() + to]; }
  double in_weight(std::size_t to, std::size_t from) const { return a_in[to * size() + from]; }
};

/// Undirected graph over a session and its neighbor sessions.
struct InterGraph {
  /// Distinct items over the prefix then each neighbor, in first-seen order.
  std::vector<ItemIndex> node_items;
  /// Sorted neighbor slots of every node; always contains the node itself.
  std::vector<std::vector<std::size_t>> adjacency;
  /// Node slot of every click position of the query prefix.
  std::vector<std::size_t> session_slots;
  std::size_t last_slot = 0;

  std::size_t size() const { return node_items.size(); }
  /// Row-major n x n 0/1 mask of `adjacency`.
  std::vector<std::uint8_t> mask() const;
};

/// Edge multiplicities of consecutive clicks, row-normalized by the node's
/// out-degree (A_out) or in-degree (A_in) counted with multiplicity.
IntraGraph build_intra_graph(ItemSeq prefix);

/// Undirected, deduplicated edges from consecutive clicks of the prefix and
/// every neighbor session, plus a self-loop on each node.
InterGraph build_inter_graph(ItemSeq prefix, std::span<const ItemSeq> neighbors);

}  // namespace i3gn
