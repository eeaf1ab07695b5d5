#pragma once

#include <string>
#include <vector>

#include "kgmine/graph.hpp"

namespace kgmine {

/// Jaccard similarity of the two nodes' neighbor sets, |Na ∩ Nb| / |Na ∪ Nb|.
/// Zero when both sets are empty.
double jaccard(const KnowledgeGraph& graph, NodeId a, NodeId b);

struct SimilarityPair {
  std::string a;  // lexicographically smaller class name
  std::string b;
  double jaccard;
};

/// All-pairs class similarity, descending by score, ties by (a, b) name order.
struct SimilarityReport {
  std::vector<SimilarityPair> pairs;
};

/// Scores every unordered class pair and keeps the top `top_n`. The OpenMP
/// kernel; scores all C(|classes|,2) pairs in parallel with a deterministic
/// merged ordering.
SimilarityReport rank_similar_pairs(const KnowledgeGraph& graph, const EntityVocabulary& vocab,
                                    std::size_t top_n);

/// Serial reference implementation; identical output, kept for tests and the
/// kernel benchmark.
SimilarityReport rank_similar_pairs_serial(const KnowledgeGraph& graph,
                                           const EntityVocabulary& vocab, std::size_t top_n);

/// Average of the feature vectors of the node's distinct neighbors; the zero
/// vector for an isolated node.
Vector neighbor_embedding(const KnowledgeGraph& graph, const FeatureTable& features, NodeId c);

/// JSON-lines serialization: one {"a":..., "b":..., "jaccard":...} per pair,
/// in report order.
std::string similarity_report_to_jsonl(const SimilarityReport& report);
void write_similarity_report(const SimilarityReport& report, const std::string& path);

}  // namespace kgmine
