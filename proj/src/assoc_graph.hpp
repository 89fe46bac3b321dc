#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "util.hpp"

namespace ebert {

/// Undirected product association graph. Nodes are all products in the
/// corpus; edges come from an ingested list (symmetrized, deduplicated,
/// self-loops and unknown products dropped with counters).
class AssociationGraph {
 public:
  struct LoadStats {
    size_t nodes = 0;
    size_t edges = 0;
    size_t dropped_unknown = 0;
    size_t dropped_self_loops = 0;
    size_t dropped_duplicates = 0;
  };

  /// Edge file: TSV `product_id<TAB>product_id`, `#` comments and blank
  /// lines allowed. Malformed lines are an error with a line number.
  static AssociationGraph load(const std::string& edge_path, const std::vector<std::string>& product_ids,
                               LoadStats* stats = nullptr);

  size_t node_count() const { return nodes_.size(); }
  size_t edge_count() const { return edges_.size(); }
  const LoadStats& stats() const { return stats_; }
  const std::vector<std::string>& nodes() const { return nodes_; }

  bool has_node(const std::string& id) const { return index_.count(id) != 0; }
  const std::unordered_set<size_t>& neighbors(const std::string& id) const;

  /// Uniform over edges, orientation randomized.
  std::pair<std::string, std::string> sample_pair(Rng& rng) const;

  /// Uniform over nodes excluding a and adj(a). Rejection sampling capped at
  /// 100 attempts, then explicit complement enumeration; errors when every
  /// node is excluded.
  std::string sample_negative(const std::string& a, Rng& rng) const;

 private:
  size_t index_of(const std::string& id) const;

  std::vector<std::string> nodes_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<std::unordered_set<size_t>> adjacency_;
  std::vector<std::pair<size_t, size_t>> edges_;
  LoadStats stats_;
};

}  // namespace ebert
