#include "kgmine/path_graph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace kgmine {

PathGraph build_path_graph(const KnowledgeGraph& graph, NodeId a, NodeId b, int l,
                           std::span<const MidPath> paths) {
  graph.require_node(a);
  graph.require_node(b);
  if (a == b) throw Error("build_path_graph: endpoints must differ");
  if (l < 1) throw Error("build_path_graph: hop count must be positive");

  PathGraph g;
  g.hop_count = l;
  g.members = {a, b};
  g.head_index = 0;
  g.tail_index = 1;

  std::unordered_map<NodeId, int> member_index{{a, 0}, {b, 1}};
  const auto member_of = [&](NodeId v) {
    auto [it, inserted] = member_index.emplace(v, static_cast<int>(g.members.size()));
    if (inserted) g.members.push_back(v);
    return it->second;
  };

  std::unordered_set<std::uint64_t> edge_seen;
  const auto add_edge = [&](int u, int v) {
    const int lo = std::min(u, v);
    const int hi = std::max(u, v);
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(lo)) << 32) |
        static_cast<std::uint32_t>(hi);
    if (edge_seen.insert(key).second) g.edges.emplace_back(lo, hi);
  };

  for (const MidPath& p : paths) {
    if (p.hop_count() != l) {
      throw Error("build_path_graph: path with " + std::to_string(p.hop_count()) +
                  " hops in a " + std::to_string(l) + "-hop graph");
    }
    int prev = g.head_index;
    for (std::size_t i = 1; i < p.elements.size(); i += 2) {
      const int cur = member_of(p.elements[i]);
      add_edge(prev, cur);
      prev = cur;
    }
    add_edge(prev, g.tail_index);
  }
  return g;
}

std::vector<PathGraph> build_all_hops(const KnowledgeGraph& graph, NodeId a, NodeId b, int max_hops,
                                      std::size_t cap) {
  if (max_hops < 1 || max_hops > kMaxHopCeiling) {
    throw Error("build_all_hops: max_hops must be in 1.." + std::to_string(kMaxHopCeiling));
  }
  const PathEnumeration enumeration = enumerate_midpaths(graph, a, b, max_hops, cap);

  std::vector<PathGraph> out;
  out.reserve(static_cast<std::size_t>(max_hops));
  // enumeration is sorted by hop count, so each l is one contiguous range
  std::size_t begin = 0;
  for (int l = 1; l <= max_hops; ++l) {
    std::size_t end = begin;
    while (end < enumeration.paths.size() && enumeration.paths[end].hop_count() == l) ++end;
    out.push_back(build_path_graph(graph, a, b, l,
                                   std::span<const MidPath>(enumeration.paths.data() + begin,
                                                            end - begin)));
    begin = end;
  }
  return out;
}

std::string path_graph_debug_json(const PathGraph& g, const KnowledgeGraph& graph) {
  nlohmann::json j;
  j["hop_count"] = g.hop_count;
  j["head"] = graph.node_name(g.members.at(static_cast<std::size_t>(g.head_index)));
  j["tail"] = graph.node_name(g.members.at(static_cast<std::size_t>(g.tail_index)));
  auto& members = j["members"] = nlohmann::json::array();
  for (const NodeId v : g.members) members.push_back(graph.node_name(v));
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  return j.dump(2);
}

}  // namespace kgmine
