#include "i3gn/graphs.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace i3gn {

namespace {

// Assigns slots to items in first-seen order.
class SlotMap {
 public:
  std::size_t slot(ItemIndex item, std::vector<ItemIndex>& nodes) {
    auto [it, inserted] = slots_.try_emplace(item, nodes.size());
    if (inserted) nodes.push_back(item);
    return it->second;
  }

 private:
  std::unordered_map<ItemIndex, std::size_t> slots_;
};

// Divides each row by its sum; all-zero rows stay zero.
void normalize_rows(std::vector<double>& m, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += m[r * n + c];
    if (total == 0.0) continue;
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] /= total;
  }
}

}  // namespace

IntraGraph build_intra_graph(ItemSeq prefix) {
  if (prefix.empty()) throw std::invalid_argument("build_intra_graph: empty prefix");
  IntraGraph g;
  SlotMap slots;
  for (ItemIndex item : prefix) g.alias.push_back(slots.slot(item, g.node_items));
  const std::size_t n = g.size();
  g.a_out.assign(n * n, 0.0);
  g.a_in.assign(n * n, 0.0);
  for (std::size_t k = 1; k < g.alias.size(); ++k) {
    const std::size_t from = g.alias[k - 1], to = g.alias[k];
    g.a_out[from * n + to] += 1.0;
    g.a_in[to * n + from] += 1.0;
  }
  normalize_rows(g.a_out, n);
  normalize_rows(g.a_in, n);
  g.last_slot = g.alias.back();
  return g;
}

InterGraph build_inter_graph(ItemSeq prefix, std::span<const ItemSeq> neighbors) {
  if (prefix.empty()) throw std::invalid_argument("build_inter_graph: empty prefix");
  InterGraph g;
  SlotMap slots;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  auto add_session = [&](ItemSeq items, bool is_query) {
    std::size_t prev = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const std::size_t s = slots.slot(items[k], g.node_items);
      if (is_query) g.session_slots.push_back(s);
      if (k > 0) edges.emplace_back(prev, s);
      prev = s;
    }
  };
  add_session(prefix, true);
  for (ItemSeq nb : neighbors) add_session(nb, false);

  g.adjacency.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.adjacency[i].push_back(i);
  for (auto [a, b] : edges) {
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  }
  for (auto& adj : g.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  g.last_slot = g.session_slots.back();
  return g;
}

std::vector<std::uint8_t> InterGraph::mask() const {
  const std::size_t n = size();
  std::vector<std::uint8_t> m(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : adjacency[i]) m[i * n + j] = 1;
  return m;
}

}  // namespace i3gn
