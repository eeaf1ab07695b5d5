#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgmine/paths.hpp"

namespace kgmine {

/// The small graph induced by all l-hop paths between one head/tail pair.
/// Members are node ids (head first, tail second, intermediates in first
/// appearance order); edges join member indices and carry no labels.
struct PathGraph {
  int hop_count = 0;
  std::vector<NodeId> members;
  std::vector<std::pair<int, int>> edges;  // (smaller index, larger index)
  int head_index = 0;
  int tail_index = 1;
};

/// Union of the edges of the given paths, which must all have exactly l hops.
/// With no paths the graph degenerates to the two endpoints and no edges.
PathGraph build_path_graph(const KnowledgeGraph& graph, NodeId a, NodeId b, int l,
                           std::span<const MidPath> paths);

/// One PathGraph per hop count 1..max_hops, built from a single shared
/// enumeration pass (so the cap applies to the pair, not per hop).
std::vector<PathGraph> build_all_hops(const KnowledgeGraph& graph, NodeId a, NodeId b, int max_hops,
                                      std::size_t cap = kDefaultPathCap);

/// Adjacency-list JSON dump for inspection; not a stability contract.
std::string path_graph_debug_json(const PathGraph& g, const KnowledgeGraph& graph);

}  // namespace kgmine
