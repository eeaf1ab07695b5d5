#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgmine/common.hpp"

namespace kgmine {

/// One adjacency entry: the node at the other end of an edge plus the label
/// of that edge. Multi-edges between the same pair keep one entry per label.
struct AdjEntry {
  NodeId neighbor;
  LabelId label;

  friend bool operator==(const AdjEntry&, const AdjEntry&) = default;
  friend auto operator<=>(const AdjEntry&, const AdjEntry&) = default;
};

class KnowledgeGraph;

/// Accumulates interned nodes, labels and edges, then produces an immutable
/// KnowledgeGraph. Edges are stored undirected; exact duplicates collapse and
/// self-loops are rejected at add time.
class GraphBuilder {
 public:
  NodeId intern_node(std::string_view name);
  LabelId intern_label(std::string_view name);

  /// Adds an undirected edge. Duplicate (head,tail,label) entries collapse at
  /// finalize. Throws on head == tail.
  void add_edge(std::string_view label, std::string_view head, std::string_view tail);

  void reserve(std::size_t nodes, std::size_t edges);

  /// Sorts and deduplicates adjacency and freezes the graph. The number of
  /// collapsed duplicate edges is written to `duplicates_collapsed` if given.
  KnowledgeGraph finalize(std::size_t* duplicates_collapsed = nullptr) &&;

 private:
  std::vector<std::string> node_names_;
  std::vector<std::string> label_names_;
  std::unordered_map<std::string, NodeId> node_ids_;
  std::unordered_map<std::string, LabelId> label_ids_;
  std::vector<std::vector<AdjEntry>> adjacency_;
};

/// Interned node/edge-label store with undirected adjacency. Immutable once
/// built; safe for unrestricted concurrent reads.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;  // empty graph; fill via GraphBuilder

  std::size_t node_count() const { return node_names_.size(); }
  std::size_t label_count() const { return label_names_.size(); }
  std::size_t edge_count() const { return edge_count_; }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<LabelId> find_label(std::string_view name) const;
  const std::string& node_name(NodeId id) const;
  const std::string& label_name(LabelId id) const;

  /// Adjacency entries of `node`, sorted by (neighbor, label).
  std::span<const AdjEntry> adjacency(NodeId node) const;

  /// The set of distinct adjacent node ids, ignoring edge labels. Sorted
  /// ascending. Throws on an invalid id.
  std::span<const NodeId> neighbors(NodeId node) const;

  bool valid_node(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < node_names_.size();
  }
  void require_node(NodeId id) const;

  /// Emits the graph as an edge-list file (one line per distinct undirected
  /// edge), suitable for reloading with load_edges.
  void write_edge_list(const std::string& path) const;

 private:
  friend class GraphBuilder;
  friend KnowledgeGraph load_snapshot(const std::string& path);

  void rebuild_derived();

  std::vector<std::string> node_names_;
  std::vector<std::string> label_names_;
  std::unordered_map<std::string, NodeId> node_ids_;
  std::unordered_map<std::string, LabelId> label_ids_;

  // CSR-style adjacency: entries for node v live in
  // adjacency_[adj_offsets_[v] .. adj_offsets_[v+1]).
  std::vector<AdjEntry> adjacency_;
  std::vector<std::size_t> adj_offsets_;
  std::vector<NodeId> distinct_neighbors_;
  std::vector<std::size_t> neighbor_offsets_;
  std::size_t edge_count_ = 0;
};

struct IngestOptions {
  char comment_char = '#';
  // Capacity hints for large dumps; zero means no pre-reservation.
  std::size_t reserve_nodes = 0;
  std::size_t reserve_edges = 0;
};

struct IngestReport {
  std::size_t lines_total = 0;
  std::size_t edges_added = 0;
  std::size_t duplicates_collapsed = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t skipped_lines = 0;  // comments and blank lines
};

/// Loads a tab-separated edge file: `relation<TAB>head<TAB>tail[<TAB>...]`.
/// Lines starting with the comment char and blank lines are skipped. Node and
/// label ids are assigned in first-appearance order; duplicate edges collapse;
/// self-loop lines are dropped entirely (their names are not interned).
KnowledgeGraph load_edges(const std::string& path, const IngestOptions& options = {},
                          IngestReport* report = nullptr);

/// Per-node k-dimensional feature vectors. Nodes without a stored row fall
/// back to the zero vector.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(int dim) : dim_(dim), zero_(static_cast<std::size_t>(dim), 0.0) {
    if (dim <= 0) throw Error("feature dimension must be positive");
  }

  int dim() const { return dim_; }
  std::size_t stored_rows() const { return row_index_.size(); }

  void set(NodeId node, std::span<const double> values);
  bool has_row(NodeId node) const { return row_index_.count(node) != 0; }

  /// Feature vector of `node`; the zero vector when no row was stored.
  std::span<const double> lookup(NodeId node) const;

 private:
  int dim_ = 0;
  std::unordered_map<NodeId, std::size_t> row_index_;
  std::vector<double> storage_;
  std::vector<double> zero_;
};

struct FeatureLoadReport {
  std::size_t rows_loaded = 0;
  std::size_t unknown_rows = 0;  // rows naming nodes absent from the graph
};

/// Loads a feature file: first line is the integer dimension k, then one row
/// per line `node_name v1 ... vk` (whitespace separated). Rows for unknown
/// nodes are counted and skipped, not fatal.
FeatureTable load_features(const std::string& path, const KnowledgeGraph& graph,
                           FeatureLoadReport* report = nullptr);

/// Class-name normalization used when linking dataset classes to graph nodes:
/// lowercase plus spaces -> underscore, nothing smarter.
struct NameNormalizer {
  bool lowercase = true;
  bool spaces_to_underscore = true;

  std::string operator()(std::string_view name) const;
};

/// The dataset's entity classes and relation names, with each class linked to
/// exactly one graph node.
class EntityVocabulary {
 public:
  std::size_t class_count() const { return classes_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  const std::string& class_name(ClassId id) const { return classes_.at(static_cast<std::size_t>(id)); }
  const std::string& relation_name(RelationId id) const {
    return relations_.at(static_cast<std::size_t>(id));
  }
  std::optional<ClassId> find_class(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  NodeId class_node(ClassId id) const { return class_to_node_.at(static_cast<std::size_t>(id)); }

  /// Attaches the ordered relation list. Throws on duplicates.
  void set_relations(std::vector<std::string> relations);

 private:
  friend EntityVocabulary link_classes(const std::vector<std::string>&, const KnowledgeGraph&,
                                       const NameNormalizer&);

  std::vector<std::string> classes_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, ClassId> class_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<NodeId> class_to_node_;
};

/// Resolves every class name to a graph node via the normalizer. Any failure
/// aborts with an error listing all unresolved names.
EntityVocabulary link_classes(const std::vector<std::string>& class_names,
                              const KnowledgeGraph& graph, const NameNormalizer& normalizer);

/// Reads one name per line (# comments and blank lines skipped).
std::vector<std::string> read_name_list(const std::string& path);

/// Convenience: read class and relation files and link classes.
EntityVocabulary load_vocabulary(const std::string& classes_path, const std::string& relations_path,
                                 const KnowledgeGraph& graph, const NameNormalizer& normalizer = {});

/// Binary graph snapshot for fast reload of large dumps.
void save_snapshot(const KnowledgeGraph& graph, const std::string& path);
KnowledgeGraph load_snapshot(const std::string& path);

}  // namespace kgmine
