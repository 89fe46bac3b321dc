#include "assoc_graph.hpp"

#include <algorithm>

namespace ebert {

AssociationGraph AssociationGraph::load(const std::string& edge_path, const std::vector<std::string>& product_ids,
                                        LoadStats* stats) {
  AssociationGraph g;
  for (const auto& id : product_ids) {
    if (g.index_.count(id)) continue;
    g.index_.emplace(id, g.nodes_.size());
    g.nodes_.push_back(id);
  }
  g.adjacency_.resize(g.nodes_.size());

  for_each_line(edge_path, [&](size_t line_no, const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') return;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw_data(edge_path + ":" + std::to_string(line_no) + ": expected product_id<TAB>product_id");
    auto ia = g.index_.find(fields[0]);
    auto ib = g.index_.find(fields[1]);
    if (ia == g.index_.end() || ib == g.index_.end()) {
      ++g.stats_.dropped_unknown;
      return;
    }
    size_t a = ia->second, b = ib->second;
    if (a == b) {
      ++g.stats_.dropped_self_loops;
      return;
    }
    if (g.adjacency_[a].count(b)) {
      ++g.stats_.dropped_duplicates;
      return;
    }
    g.adjacency_[a].insert(b);
    g.adjacency_[b].insert(a);
    g.edges_.emplace_back(std::min(a, b), std::max(a, b));
  });

  g.stats_.nodes = g.nodes_.size();
  g.stats_.edges = g.edges_.size();
  if (stats) *stats = g.stats_;
  return g;
}

size_t AssociationGraph::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw_invalid("association graph: unknown product " + id);
  return it->second;
}

const std::unordered_set<size_t>& AssociationGraph::neighbors(const std::string& id) const {
  return adjacency_[index_of(id)];
}

std::pair<std::string, std::string> AssociationGraph::sample_pair(Rng& rng) const {
  if (edges_.empty()) throw_invalid("association graph: no edges to sample");
  const auto& e = edges_[size_t(rng.uniform_below(edges_.size()))];
  if (rng.uniform() < 0.5) return {nodes_[e.first], nodes_[e.second]};
  return {nodes_[e.second], nodes_[e.first]};
}

std::string AssociationGraph::sample_negative(const std::string& a, Rng& rng) const {
  size_t ia = index_of(a);
  const auto& adj = adjacency_[ia];
  if (adj.size() + 1 >= nodes_.size())
    throw_invalid("association graph: no node outside adj(" + a + ") to sample as negative");

  for (int attempt = 0; attempt < 100; ++attempt) {
    size_t cand = size_t(rng.uniform_below(nodes_.size()));
    if (cand != ia && !adj.count(cand)) return nodes_[cand];
  }
  // Dense neighborhoods: enumerate the complement explicitly.
  std::vector<size_t> complement;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (i != ia && !adj.count(i)) complement.push_back(i);
  if (complement.empty())
    throw_invalid("association graph: no node outside adj(" + a + ") to sample as negative");
  return nodes_[complement[size_t(rng.uniform_below(complement.size()))]];
}

}  // namespace ebert
