#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kgmine/graph.hpp"

namespace kgmine {

class TripletDataset;

/// The intermediate part of a path between a head/tail pair: alternating
/// edge-label and node ids, excluding the endpoints. An h-hop MidPath holds
/// h labels and h-1 intermediate nodes (labels at even positions).
struct MidPath {
  std::vector<std::int32_t> elements;

  int hop_count() const { return static_cast<int>(elements.size() + 1) / 2; }

  friend bool operator==(const MidPath&, const MidPath&) = default;
};

/// Canonical ordering: by hop count, then lexicographic over element ids.
bool operator<(const MidPath& a, const MidPath& b);

struct MidPathHash {
  std::size_t operator()(const MidPath& p) const;
};

/// "RelatedTo-cars-RelatedTo" style rendering with graph names.
std::string render_midpath(const MidPath& p, const KnowledgeGraph& graph);
std::vector<std::string> midpath_element_names(const MidPath& p, const KnowledgeGraph& graph);
MidPath midpath_from_names(const std::vector<std::string>& names, const KnowledgeGraph& graph);

struct PathEnumeration {
  std::vector<MidPath> paths;  // canonical order
  bool truncated = false;      // the per-pair cap cut enumeration short
};

inline constexpr int kMaxHopCeiling = 3;
inline constexpr std::size_t kDefaultPathCap = 4096;

/// All simple undirected paths of 1..max_hops hops between a and b, as
/// MidPaths in canonical order. Enumeration stops deterministically after
/// `cap` paths and sets the truncation flag. Requires a != b and
/// 1 <= max_hops <= 3.
PathEnumeration enumerate_midpaths(const KnowledgeGraph& graph, NodeId a, NodeId b, int max_hops,
                                   std::size_t cap = kDefaultPathCap);

/// MidPath/relation co-occurrence counts over a triplet dataset.
/// Invariants: relation_total(r) = sum_p cooccur(p,r);
/// midpath_total(p) = sum_r cooccur(p,r); grand_total = sum_p midpath_total(p).
class PathStatistics {
 public:
  using MidPathId = std::int32_t;

  MidPathId intern(const MidPath& p);
  std::optional<MidPathId> find(const MidPath& p) const;
  void add_observation(const MidPath& p, RelationId r, std::uint64_t count = 1);

  std::uint64_t cooccur_count(MidPathId p, RelationId r) const;
  std::uint64_t cooccur_count(const MidPath& p, RelationId r) const;
  std::uint64_t midpath_total(MidPathId p) const;
  std::uint64_t midpath_total(const MidPath& p) const;
  std::uint64_t relation_total(RelationId r) const;
  std::uint64_t grand_total() const { return grand_total_; }

  std::size_t midpath_count() const { return midpaths_.size(); }
  const MidPath& midpath(MidPathId id) const;
  /// Relations with at least one observation, ascending.
  std::vector<RelationId> observed_relations() const;

  template <typename Fn>  // fn(MidPathId, RelationId, count)
  void for_each_cooccur(Fn&& fn) const {
    for (const auto& [key, count] : cooccur_) {
      fn(static_cast<MidPathId>(key >> 32), static_cast<RelationId>(key & 0xffffffffu), count);
    }
  }

  /// Number of distinct (head,tail) pairs whose enumeration hit the cap.
  std::size_t truncated_pairs() const { return truncated_pairs_; }
  void note_truncated_pair() { ++truncated_pairs_; }

  bool operator==(const PathStatistics& other) const;

 private:
  static std::uint64_t pack(MidPathId p, RelationId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p)) << 32) |
           static_cast<std::uint32_t>(r);
  }

  std::vector<MidPath> midpaths_;
  std::unordered_map<MidPath, MidPathId, MidPathHash> ids_;
  std::unordered_map<std::uint64_t, std::uint64_t> cooccur_;
  std::vector<std::uint64_t> midpath_totals_;
  std::vector<std::uint64_t> relation_totals_;
  std::uint64_t grand_total_ = 0;
  std::size_t truncated_pairs_ = 0;
};

/// Counts every MidPath of every triplet's (subject, object) pair, over all
/// scenes in the dataset. OpenMP kernel: path enumeration runs in parallel
/// over distinct pairs, counting stays in dataset order so results are
/// independent of scheduling.
PathStatistics accumulate_statistics(const KnowledgeGraph& graph, const EntityVocabulary& vocab,
                                     const TripletDataset& triplets, int max_hops,
                                     std::size_t cap = kDefaultPathCap);

/// Serial reference implementation: one straightforward pass, no pair
/// pre-enumeration. Identical output.
PathStatistics accumulate_statistics_serial(const KnowledgeGraph& graph,
                                            const EntityVocabulary& vocab,
                                            const TripletDataset& triplets, int max_hops,
                                            std::size_t cap = kDefaultPathCap);

/// P(MidPath = p | Relation = r): co-occurrence count over the relation's
/// total observations. The relation must have been observed.
double conditional_probability(const PathStatistics& stats, const MidPath& p, RelationId r);

/// P(MidPath = p): occurrence count over all observations.
double marginal_probability(const PathStatistics& stats, const MidPath& p);

/// Score(p, r) = P(p|r) - P(p); how strongly the MidPath implies the relation.
double midpath_score(const PathStatistics& stats, const MidPath& p, RelationId r);

/// Per relation, the MidPaths that co-occur with it, scored and sorted
/// descending (ties in canonical MidPath order), truncated to top_n.
std::map<RelationId, std::vector<std::pair<MidPath, double>>> top_midpaths_per_relation(
    const PathStatistics& stats, std::size_t top_n);

/// JSON-lines co-occurrence dump: {"midpath":[names...],"relation":...,"count":...}.
std::string statistics_to_jsonl(const PathStatistics& stats, const KnowledgeGraph& graph,
                                const EntityVocabulary& vocab);
void write_statistics(const PathStatistics& stats, const KnowledgeGraph& graph,
                      const EntityVocabulary& vocab, const std::string& path);
PathStatistics load_statistics(const std::string& path, const KnowledgeGraph& graph,
                               const EntityVocabulary& vocab);

}  // namespace kgmine
