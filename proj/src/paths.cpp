#include "kgmine/paths.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "kgmine/dataset.hpp"

namespace kgmine {

bool operator<(const MidPath& a, const MidPath& b) {
  if (a.elements.size() != b.elements.size()) return a.elements.size() < b.elements.size();
  return std::lexicographical_compare(a.elements.begin(), a.elements.end(), b.elements.begin(),
                                      b.elements.end());
}

std::size_t MidPathHash::operator()(const MidPath& p) const {
  std::size_t h = 0x9e3779b97f4a7c15ull ^ p.elements.size();
  for (const std::int32_t e : p.elements) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(e)) + 0x9e3779b97f4a7c15ull + (h << 6) +
         (h >> 2);
  }
  return h;
}

std::vector<std::string> midpath_element_names(const MidPath& p, const KnowledgeGraph& graph) {
  std::vector<std::string> names;
  names.reserve(p.elements.size());
  for (std::size_t i = 0; i < p.elements.size(); ++i) {
    if (i % 2 == 0) {
      names.push_back(graph.label_name(p.elements[i]));
    } else {
      names.push_back(graph.node_name(p.elements[i]));
    }
  }
  return names;
}

std::string render_midpath(const MidPath& p, const KnowledgeGraph& graph) {
  std::string out;
  const auto names = midpath_element_names(p, graph);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += '-';
    out += names[i];
  }
  return out;
}

MidPath midpath_from_names(const std::vector<std::string>& names, const KnowledgeGraph& graph) {
  if (names.empty() || names.size() % 2 == 0) {
    throw Error("a MidPath needs an odd number of elements, got " + std::to_string(names.size()));
  }
  MidPath p;
  p.elements.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i % 2 == 0) {
      const auto label = graph.find_label(names[i]);
      if (!label) throw Error("unknown edge label '" + names[i] + "'");
      p.elements.push_back(*label);
    } else {
      const auto node = graph.find_node(names[i]);
      if (!node) throw Error("unknown node '" + names[i] + "'");
      p.elements.push_back(*node);
    }
  }
  return p;
}

namespace {

// Depth-first simple-path enumeration. Adjacency lists are sorted by
// (neighbor, label), which fixes the pre-sort emission order and therefore
// makes cap truncation deterministic.
class PathEnumerator {
 public:
  PathEnumerator(const KnowledgeGraph& graph, NodeId a, NodeId b, int max_hops, std::size_t cap,
                 PathEnumeration& out)
      : graph_(graph), target_(b), max_hops_(max_hops), cap_(cap), out_(out) {
    on_path_.push_back(a);
  }

  void run(NodeId start) { visit(start, 0); }

 private:
  bool record(LabelId last_label) {
    if (out_.paths.size() == cap_) {
      // one more path exists beyond the cap, so the result really is cut short
      out_.truncated = true;
      return false;
    }
    elements_.push_back(last_label);
    out_.paths.push_back(MidPath{elements_});
    elements_.pop_back();
    return true;
  }

  bool on_path(NodeId v) const {
    return std::find(on_path_.begin(), on_path_.end(), v) != on_path_.end();
  }

  // Returns false once the cap is reached, which unwinds the whole search.
  bool visit(NodeId u, int edges_used) {
    const auto adj = graph_.adjacency(u);
    if (edges_used + 1 == max_hops_) {
      // Only the final hop remains: jump straight to the target's entries.
      const AdjEntry probe{target_, 0};
      auto it = std::lower_bound(adj.begin(), adj.end(), probe,
                                 [](const AdjEntry& x, const AdjEntry& y) {
                                   return x.neighbor < y.neighbor;
                                 });
      for (; it != adj.end() && it->neighbor == target_; ++it) {
        if (!record(it->label)) return false;
      }
      return true;
    }
    for (const AdjEntry& e : adj) {
      if (e.neighbor == target_) {
        if (!record(e.label)) return false;
        continue;  // the target never serves as an intermediate node
      }
      if (on_path(e.neighbor)) continue;
      elements_.push_back(e.label);
      elements_.push_back(e.neighbor);
      on_path_.push_back(e.neighbor);
      const bool keep_going = visit(e.neighbor, edges_used + 1);
      on_path_.pop_back();
      elements_.pop_back();
      elements_.pop_back();
      if (!keep_going) return false;
    }
    return true;
  }

  const KnowledgeGraph& graph_;
  const NodeId target_;
  const int max_hops_;
  const std::size_t cap_;
  PathEnumeration& out_;
  std::vector<std::int32_t> elements_;
  std::vector<NodeId> on_path_;
};

}  // namespace

PathEnumeration enumerate_midpaths(const KnowledgeGraph& graph, NodeId a, NodeId b, int max_hops,
                                   std::size_t cap) {
  graph.require_node(a);
  graph.require_node(b);
  if (a == b) throw Error("enumerate_midpaths: endpoints must differ");
  if (max_hops < 1 || max_hops > kMaxHopCeiling) {
    throw Error("enumerate_midpaths: max_hops must be in 1.." + std::to_string(kMaxHopCeiling));
  }
  if (cap == 0) throw Error("enumerate_midpaths: cap must be positive");

  PathEnumeration result;
  PathEnumerator(graph, a, b, max_hops, cap, result).run(a);
  std::sort(result.paths.begin(), result.paths.end());
  return result;
}

PathStatistics::MidPathId PathStatistics::intern(const MidPath& p) {
  auto it = ids_.find(p);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<MidPathId>(midpaths_.size());
  midpaths_.push_back(p);
  midpath_totals_.push_back(0);
  ids_.emplace(p, id);
  return id;
}

std::optional<PathStatistics::MidPathId> PathStatistics::find(const MidPath& p) const {
  auto it = ids_.find(p);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void PathStatistics::add_observation(const MidPath& p, RelationId r, std::uint64_t count) {
  if (r < 0) throw Error("negative relation id");
  const MidPathId id = intern(p);
  cooccur_[pack(id, r)] += count;
  midpath_totals_[static_cast<std::size_t>(id)] += count;
  if (static_cast<std::size_t>(r) >= relation_totals_.size()) {
    relation_totals_.resize(static_cast<std::size_t>(r) + 1, 0);
  }
  relation_totals_[static_cast<std::size_t>(r)] += count;
  grand_total_ += count;
}

std::uint64_t PathStatistics::cooccur_count(MidPathId p, RelationId r) const {
  auto it = cooccur_.find(pack(p, r));
  return it == cooccur_.end() ? 0 : it->second;
}

std::uint64_t PathStatistics::cooccur_count(const MidPath& p, RelationId r) const {
  const auto id = find(p);
  return id ? cooccur_count(*id, r) : 0;
}

std::uint64_t PathStatistics::midpath_total(MidPathId p) const {
  if (p < 0 || static_cast<std::size_t>(p) >= midpath_totals_.size()) return 0;
  return midpath_totals_[static_cast<std::size_t>(p)];
}

std::uint64_t PathStatistics::midpath_total(const MidPath& p) const {
  const auto id = find(p);
  return id ? midpath_total(*id) : 0;
}

std::uint64_t PathStatistics::relation_total(RelationId r) const {
  if (r < 0 || static_cast<std::size_t>(r) >= relation_totals_.size()) return 0;
  return relation_totals_[static_cast<std::size_t>(r)];
}

const MidPath& PathStatistics::midpath(MidPathId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= midpaths_.size()) {
    throw Error("invalid midpath id " + std::to_string(id));
  }
  return midpaths_[static_cast<std::size_t>(id)];
}

std::vector<RelationId> PathStatistics::observed_relations() const {
  std::vector<RelationId> out;
  for (std::size_t r = 0; r < relation_totals_.size(); ++r) {
    if (relation_totals_[r] > 0) out.push_back(static_cast<RelationId>(r));
  }
  return out;
}

bool PathStatistics::operator==(const PathStatistics& other) const {
  return midpaths_ == other.midpaths_ && cooccur_ == other.cooccur_ &&
         midpath_totals_ == other.midpath_totals_ && relation_totals_ == other.relation_totals_ &&
         grand_total_ == other.grand_total_ && truncated_pairs_ == other.truncated_pairs_;
}

namespace {

std::uint64_t pack_pair(NodeId a, NodeId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

void check_triplet_linked(const EntityVocabulary& vocab, const Scene& scene, const Triplet& t) {
  if (t.subject < 0 || static_cast<std::size_t>(t.subject) >= vocab.class_count() ||
      t.object < 0 || static_cast<std::size_t>(t.object) >= vocab.class_count()) {
    throw Error("triplet in scene '" + scene.id + "' references an unlinked class");
  }
}

}  // namespace

namespace {

void check_enumeration_args(int max_hops, std::size_t cap) {
  // validated before the parallel region; enumerate_midpaths would throw
  if (max_hops < 1 || max_hops > kMaxHopCeiling) {
    throw Error("accumulate_statistics: max_hops must be in 1.." + std::to_string(kMaxHopCeiling));
  }
  if (cap == 0) throw Error("accumulate_statistics: cap must be positive");
}

}  // namespace

PathStatistics accumulate_statistics(const KnowledgeGraph& graph, const EntityVocabulary& vocab,
                                     const TripletDataset& triplets, int max_hops,
                                     std::size_t cap) {
  check_enumeration_args(max_hops, cap);
  // Phase 1: distinct (subject, object) node pairs, first-appearance order.
  std::unordered_map<std::uint64_t, std::size_t> pair_index;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const Scene& scene : triplets.scenes()) {
    for (const Triplet& t : scene.triplets) {
      check_triplet_linked(vocab, scene, t);
      const NodeId s = vocab.class_node(t.subject);
      const NodeId o = vocab.class_node(t.object);
      if (s == o) continue;  // degenerate pair: no paths by definition
      if (pair_index.emplace(pack_pair(s, o), pairs.size()).second) {
        pairs.emplace_back(s, o);
      }
    }
  }

  std::vector<PathEnumeration> enumerations(pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
    enumerations[static_cast<std::size_t>(i)] =
        enumerate_midpaths(graph, pairs[static_cast<std::size_t>(i)].first,
                           pairs[static_cast<std::size_t>(i)].second, max_hops, cap);
  }

  // Phase 2: count in dataset order so interned ids are schedule-independent.
  PathStatistics stats;
  for (const PathEnumeration& e : enumerations) {
    if (e.truncated) stats.note_truncated_pair();
  }
  for (const Scene& scene : triplets.scenes()) {
    for (const Triplet& t : scene.triplets) {
      const NodeId s = vocab.class_node(t.subject);
      const NodeId o = vocab.class_node(t.object);
      if (s == o) continue;
      const auto& e = enumerations[pair_index.at(pack_pair(s, o))];
      for (const MidPath& p : e.paths) stats.add_observation(p, t.relation);
    }
  }
  return stats;
}

PathStatistics accumulate_statistics_serial(const KnowledgeGraph& graph,
                                            const EntityVocabulary& vocab,
                                            const TripletDataset& triplets, int max_hops,
                                            std::size_t cap) {
  check_enumeration_args(max_hops, cap);
  PathStatistics stats;
  std::unordered_set<std::uint64_t> truncated_seen;
  for (const Scene& scene : triplets.scenes()) {
    for (const Triplet& t : scene.triplets) {
      check_triplet_linked(vocab, scene, t);
      const NodeId s = vocab.class_node(t.subject);
      const NodeId o = vocab.class_node(t.object);
      if (s == o) continue;
      const PathEnumeration e = enumerate_midpaths(graph, s, o, max_hops, cap);
      if (e.truncated && truncated_seen.insert(pack_pair(s, o)).second) {
        stats.note_truncated_pair();
      }
      for (const MidPath& p : e.paths) stats.add_observation(p, t.relation);
    }
  }
  return stats;
}

double conditional_probability(const PathStatistics& stats, const MidPath& p, RelationId r) {
  const std::uint64_t denom = stats.relation_total(r);
  if (denom == 0) {
    throw Error("conditional_probability: relation " + std::to_string(r) + " never observed");
  }
  return static_cast<double>(stats.cooccur_count(p, r)) / static_cast<double>(denom);
}

double marginal_probability(const PathStatistics& stats, const MidPath& p) {
  if (stats.grand_total() == 0) throw Error("marginal_probability: empty statistics");
  return static_cast<double>(stats.midpath_total(p)) / static_cast<double>(stats.grand_total());
}

double midpath_score(const PathStatistics& stats, const MidPath& p, RelationId r) {
  return conditional_probability(stats, p, r) - marginal_probability(stats, p);
}

std::map<RelationId, std::vector<std::pair<MidPath, double>>> top_midpaths_per_relation(
    const PathStatistics& stats, std::size_t top_n) {
  if (top_n == 0) throw Error("top_midpaths_per_relation: top_n must be positive");
  if (stats.grand_total() == 0) throw Error("top_midpaths_per_relation: empty statistics");

  std::map<RelationId, std::vector<PathStatistics::MidPathId>> candidates;
  stats.for_each_cooccur([&](PathStatistics::MidPathId p, RelationId r, std::uint64_t count) {
    if (count > 0) candidates[r].push_back(p);
  });

  std::map<RelationId, std::vector<std::pair<MidPath, double>>> out;
  for (auto& [relation, ids] : candidates) {
    std::vector<std::pair<MidPath, double>> scored;
    scored.reserve(ids.size());
    for (const auto id : ids) {
      const MidPath& p = stats.midpath(id);
      scored.emplace_back(p, midpath_score(stats, p, relation));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    if (scored.size() > top_n) scored.resize(top_n);
    out.emplace(relation, std::move(scored));
  }
  return out;
}

std::string statistics_to_jsonl(const PathStatistics& stats, const KnowledgeGraph& graph,
                                const EntityVocabulary& vocab) {
  struct Row {
    RelationId relation;
    PathStatistics::MidPathId midpath;
    std::uint64_t count;
  };
  std::vector<Row> rows;
  stats.for_each_cooccur([&](PathStatistics::MidPathId p, RelationId r, std::uint64_t count) {
    rows.push_back({r, p, count});
  });
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.relation != y.relation) return x.relation < y.relation;
    return x.midpath < y.midpath;
  });

  std::string out;
  for (const Row& row : rows) {
    nlohmann::json line = {
        {"midpath", midpath_element_names(stats.midpath(row.midpath), graph)},
        {"relation", vocab.relation_name(row.relation)},
        {"count", row.count},
    };
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_statistics(const PathStatistics& stats, const KnowledgeGraph& graph,
                      const EntityVocabulary& vocab, const std::string& path) {
  write_file_atomic(path, statistics_to_jsonl(stats, graph, vocab));
}

PathStatistics load_statistics(const std::string& path, const KnowledgeGraph& graph,
                               const EntityVocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open statistics file: " + path);
  PathStatistics stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto names = parsed.at("midpath").get<std::vector<std::string>>();
    const auto relation_name = parsed.at("relation").get<std::string>();
    const auto count = parsed.at("count").get<std::uint64_t>();
    const auto relation = vocab.find_relation(relation_name);
    if (!relation) {
      throw Error(path + ":" + std::to_string(line_no) + ": unknown relation '" + relation_name +
                  "'");
    }
    stats.add_observation(midpath_from_names(names, graph), *relation, count);
  }
  return stats;
}

}  // namespace kgmine
