#include "kgmine/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kgmine {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

double parse_double(std::string_view token, const std::string& path, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(path + ":" + std::to_string(line_no) + ": expected a number, got '" +
                std::string(token) + "'");
  }
  return value;
}

}  // namespace

NodeId GraphBuilder::intern_node(std::string_view name) {
  auto it = node_ids_.find(std::string(name));
  if (it != node_ids_.end()) return it->second;
  const NodeId id = static_cast<NodeId>(node_names_.size());
  node_names_.emplace_back(name);
  node_ids_.emplace(node_names_.back(), id);
  adjacency_.emplace_back();
  return id;
}

LabelId GraphBuilder::intern_label(std::string_view name) {
  auto it = label_ids_.find(std::string(name));
  if (it != label_ids_.end()) return it->second;
  const LabelId id = static_cast<LabelId>(label_names_.size());
  label_names_.emplace_back(name);
  label_ids_.emplace(label_names_.back(), id);
  return id;
}

void GraphBuilder::add_edge(std::string_view label, std::string_view head, std::string_view tail) {
  if (head == tail) throw Error("self-loop edge on node '" + std::string(head) + "'");
  const LabelId l = intern_label(label);
  const NodeId h = intern_node(head);
  const NodeId t = intern_node(tail);
  adjacency_[static_cast<std::size_t>(h)].push_back({t, l});
  adjacency_[static_cast<std::size_t>(t)].push_back({h, l});
}

void GraphBuilder::reserve(std::size_t nodes, std::size_t edges) {
  if (nodes > 0) {
    node_names_.reserve(nodes);
    node_ids_.reserve(nodes);
    adjacency_.reserve(nodes);
  }
  if (edges > 0) {
    // nothing global to reserve for per-node lists; kept for symmetry
    (void)edges;
  }
}

KnowledgeGraph GraphBuilder::finalize(std::size_t* duplicates_collapsed) && {
  std::size_t removed_entries = 0;
  std::size_t total_entries = 0;
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    const auto last = std::unique(list.begin(), list.end());
    removed_entries += static_cast<std::size_t>(list.end() - last);
    list.erase(last, list.end());
    total_entries += list.size();
  }
  if (duplicates_collapsed != nullptr) *duplicates_collapsed = removed_entries / 2;

  KnowledgeGraph g;
  g.node_names_ = std::move(node_names_);
  g.label_names_ = std::move(label_names_);
  g.node_ids_ = std::move(node_ids_);
  g.label_ids_ = std::move(label_ids_);
  g.adj_offsets_.resize(g.node_names_.size() + 1, 0);
  g.adjacency_.reserve(total_entries);
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    g.adj_offsets_[v] = g.adjacency_.size();
    g.adjacency_.insert(g.adjacency_.end(), adjacency_[v].begin(), adjacency_[v].end());
  }
  g.adj_offsets_[g.node_names_.size()] = g.adjacency_.size();
  g.rebuild_derived();
  return g;
}

void KnowledgeGraph::rebuild_derived() {
  edge_count_ = adjacency_.size() / 2;
  neighbor_offsets_.assign(node_names_.size() + 1, 0);
  distinct_neighbors_.clear();
  distinct_neighbors_.reserve(adjacency_.size());
  for (std::size_t v = 0; v < node_names_.size(); ++v) {
    neighbor_offsets_[v] = distinct_neighbors_.size();
    NodeId last = kInvalidNode;
    for (std::size_t i = adj_offsets_[v]; i < adj_offsets_[v + 1]; ++i) {
      if (adjacency_[i].neighbor != last) {
        last = adjacency_[i].neighbor;
        distinct_neighbors_.push_back(last);
      }
    }
  }
  neighbor_offsets_[node_names_.size()] = distinct_neighbors_.size();
  distinct_neighbors_.shrink_to_fit();
}

std::optional<NodeId> KnowledgeGraph::find_node(std::string_view name) const {
  auto it = node_ids_.find(std::string(name));
  if (it == node_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<LabelId> KnowledgeGraph::find_label(std::string_view name) const {
  auto it = label_ids_.find(std::string(name));
  if (it == label_ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& KnowledgeGraph::node_name(NodeId id) const {
  require_node(id);
  return node_names_[static_cast<std::size_t>(id)];
}

const std::string& KnowledgeGraph::label_name(LabelId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= label_names_.size()) {
    throw Error("invalid label id " + std::to_string(id));
  }
  return label_names_[static_cast<std::size_t>(id)];
}

void KnowledgeGraph::require_node(NodeId id) const {
  if (!valid_node(id)) throw Error("invalid node id " + std::to_string(id));
}

std::span<const AdjEntry> KnowledgeGraph::adjacency(NodeId node) const {
  require_node(node);
  const auto v = static_cast<std::size_t>(node);
  return {adjacency_.data() + adj_offsets_[v], adj_offsets_[v + 1] - adj_offsets_[v]};
}

std::span<const NodeId> KnowledgeGraph::neighbors(NodeId node) const {
  require_node(node);
  const auto v = static_cast<std::size_t>(node);
  return {distinct_neighbors_.data() + neighbor_offsets_[v],
          neighbor_offsets_[v + 1] - neighbor_offsets_[v]};
}

void KnowledgeGraph::write_edge_list(const std::string& path) const {
  std::string out;
  for (NodeId u = 0; static_cast<std::size_t>(u) < node_count(); ++u) {
    for (const AdjEntry& e : adjacency(u)) {
      if (e.neighbor <= u) continue;  // emit each undirected edge once
      out += label_name(e.label);
      out += '\t';
      out += node_name(u);
      out += '\t';
      out += node_name(e.neighbor);
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

KnowledgeGraph load_edges(const std::string& path, const IngestOptions& options,
                          IngestReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open edge file: " + path);

  GraphBuilder builder;
  builder.reserve(options.reserve_nodes, options.reserve_edges);
  IngestReport local;
  std::size_t edge_lines = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++local.lines_total;
    std::string_view view = strip_cr(line);
    if (view.empty() || is_blank(view) || view.front() == options.comment_char) {
      ++local.skipped_lines;
      continue;
    }
    const auto tab1 = view.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : view.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected at least 3 tab-separated columns");
    }
    auto tab3 = view.find('\t', tab2 + 1);
    if (tab3 == std::string_view::npos) tab3 = view.size();
    const std::string_view relation = view.substr(0, tab1);
    const std::string_view head = view.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string_view tail = view.substr(tab2 + 1, tab3 - tab2 - 1);
    if (relation.empty() || head.empty() || tail.empty()) {
      throw Error(path + ":" + std::to_string(line_no) + ": empty column");
    }
    if (head == tail) {
      ++local.self_loops_dropped;
      continue;
    }
    builder.add_edge(relation, head, tail);
    ++edge_lines;
  }
  if (local.lines_total == 0) throw Error("empty edge file: " + path);
  if (edge_lines == 0) throw Error("edge file contains no usable edges: " + path);

  KnowledgeGraph graph = std::move(builder).finalize(&local.duplicates_collapsed);
  local.edges_added = graph.edge_count();
  if (report != nullptr) *report = local;
  return graph;
}

void FeatureTable::set(NodeId node, std::span<const double> values) {
  if (static_cast<int>(values.size()) != dim_) {
    throw Error("feature row has " + std::to_string(values.size()) + " values, expected " +
                std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("non-finite feature value");
  }
  auto it = row_index_.find(node);
  if (it == row_index_.end()) {
    it = row_index_.emplace(node, storage_.size()).first;
    storage_.resize(storage_.size() + static_cast<std::size_t>(dim_));
  }
  std::copy(values.begin(), values.end(), storage_.begin() + static_cast<std::ptrdiff_t>(it->second));
}

std::span<const double> FeatureTable::lookup(NodeId node) const {
  auto it = row_index_.find(node);
  if (it == row_index_.end()) return zero_;
  return {storage_.data() + it->second, static_cast<std::size_t>(dim_)};
}

FeatureTable load_features(const std::string& path, const KnowledgeGraph& graph,
                           FeatureLoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": missing dimension header");
  std::size_t line_no = 1;
  std::string_view header = strip_cr(line);
  int dim = 0;
  {
    auto [ptr, ec] = std::from_chars(header.data(), header.data() + header.size(), dim);
    if (ec != std::errc{} || ptr != header.data() + header.size() || dim <= 0) {
      throw Error(path + ":1: first line must be a positive integer dimension");
    }
  }

  FeatureTable table(dim);
  FeatureLoadReport local;
  std::vector<double> row(static_cast<std::size_t>(dim));
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (view.empty() || is_blank(view) || view.front() == '#') continue;

    std::istringstream fields{std::string(view)};
    std::string name;
    fields >> name;
    std::string token;
    std::size_t count = 0;
    while (fields >> token) {
      if (count >= row.size()) break;
      row[count++] = parse_double(token, path, line_no);
    }
    if (count != row.size() || fields >> token) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                  " values for node '" + name + "'");
    }
    const auto node = graph.find_node(name);
    if (!node) {
      ++local.unknown_rows;
      continue;
    }
    table.set(*node, row);
    ++local.rows_loaded;
  }
  if (report != nullptr) *report = local;
  return table;
}

std::string NameNormalizer::operator()(std::string_view name) const {
  // trim outer whitespace
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) name.remove_prefix(1);
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.remove_suffix(1);
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (spaces_to_underscore && c == ' ') {
      out.push_back('_');
    } else if (lowercase) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::optional<ClassId> EntityVocabulary::find_class(std::string_view name) const {
  auto it = class_index_.find(std::string(name));
  if (it == class_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> EntityVocabulary::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

void EntityVocabulary::set_relations(std::vector<std::string> relations) {
  relation_index_.clear();
  for (std::size_t i = 0; i < relations.size(); ++i) {
    if (!relation_index_.emplace(relations[i], static_cast<RelationId>(i)).second) {
      throw Error("duplicate relation name '" + relations[i] + "'");
    }
  }
  relations_ = std::move(relations);
}

EntityVocabulary link_classes(const std::vector<std::string>& class_names,
                              const KnowledgeGraph& graph, const NameNormalizer& normalizer) {
  EntityVocabulary vocab;
  std::vector<std::string> failures;
  for (const std::string& name : class_names) {
    if (!vocab.class_index_.emplace(name, static_cast<ClassId>(vocab.classes_.size())).second) {
      throw Error("duplicate class name '" + name + "'");
    }
    vocab.classes_.push_back(name);
    const auto node = graph.find_node(normalizer(name));
    if (!node) {
      failures.push_back(name);
      vocab.class_to_node_.push_back(kInvalidNode);
    } else {
      vocab.class_to_node_.push_back(*node);
    }
  }
  if (!failures.empty()) {
    std::string msg = "failed to link " + std::to_string(failures.size()) + " classes:";
    for (const std::string& f : failures) msg += " '" + f + "'";
    throw Error(msg);
  }
  return vocab;
}

std::vector<std::string> read_name_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open name list: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = strip_cr(line);
    if (view.empty() || is_blank(view) || view.front() == '#') continue;
    names.emplace_back(view);
  }
  return names;
}

EntityVocabulary load_vocabulary(const std::string& classes_path, const std::string& relations_path,
                                 const KnowledgeGraph& graph, const NameNormalizer& normalizer) {
  EntityVocabulary vocab = link_classes(read_name_list(classes_path), graph, normalizer);
  vocab.set_relations(read_name_list(relations_path));
  return vocab;
}

namespace {

constexpr char kSnapshotMagic[8] = {'K', 'G', 'M', 'S', 'N', 'A', 'P', '1'};

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated snapshot: " + path);
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
  const auto len = read_pod<std::uint32_t>(in, path);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("truncated snapshot: " + path);
  return s;
}

}  // namespace

void save_snapshot(const KnowledgeGraph& graph, const std::string& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  write_pod<std::uint32_t>(out, 1);  // version
  write_pod<std::uint64_t>(out, graph.node_count());
  write_pod<std::uint64_t>(out, graph.label_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    write_string(out, graph.node_name(static_cast<NodeId>(i)));
  }
  for (std::size_t i = 0; i < graph.label_count(); ++i) {
    write_string(out, graph.label_name(static_cast<LabelId>(i)));
  }
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto adj = graph.adjacency(static_cast<NodeId>(i));
    write_pod<std::uint64_t>(out, adj.size());
    for (const AdjEntry& e : adj) {
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.neighbor));
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.label));
    }
  }
  write_file_atomic(path, out.str());
}

KnowledgeGraph load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open snapshot: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw Error("not a graph snapshot: " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != 1) throw Error("unsupported snapshot version " + std::to_string(version));

  KnowledgeGraph g;
  const auto node_count = read_pod<std::uint64_t>(in, path);
  const auto label_count = read_pod<std::uint64_t>(in, path);
  g.node_names_.reserve(node_count);
  for (std::uint64_t i = 0; i < node_count; ++i) {
    g.node_names_.push_back(read_string(in, path));
    g.node_ids_.emplace(g.node_names_.back(), static_cast<NodeId>(i));
  }
  for (std::uint64_t i = 0; i < label_count; ++i) {
    g.label_names_.push_back(read_string(in, path));
    g.label_ids_.emplace(g.label_names_.back(), static_cast<LabelId>(i));
  }
  g.adj_offsets_.resize(node_count + 1, 0);
  for (std::uint64_t v = 0; v < node_count; ++v) {
    g.adj_offsets_[v] = g.adjacency_.size();
    const auto degree = read_pod<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < degree; ++i) {
      const auto neighbor = read_pod<std::uint32_t>(in, path);
      const auto label = read_pod<std::uint32_t>(in, path);
      if (neighbor >= node_count || label >= label_count) {
        throw Error("snapshot references out-of-range ids: " + path);
      }
      g.adjacency_.push_back({static_cast<NodeId>(neighbor), static_cast<LabelId>(label)});
    }
  }
  g.adj_offsets_[node_count] = g.adjacency_.size();
  g.rebuild_derived();
  return g;
}

}  // namespace kgmine
