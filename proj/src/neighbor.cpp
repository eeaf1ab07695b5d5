#include "kgmine/neighbor.hpp"

#include <algorithm>
#include <tuple>

#include <json.hpp>

namespace kgmine {

double jaccard(const KnowledgeGraph& graph, NodeId a, NodeId b) {
  const auto na = graph.neighbors(a);
  const auto nb = graph.neighbors(b);
  if (na.empty() && nb.empty()) return 0.0;

  // both spans are sorted ascending
  std::size_t i = 0, j = 0, common = 0;
  while (i < na.size() && j < nb.size()) {
    if (na[i] == nb[j]) {
      ++common;
      ++i;
      ++j;
    } else if (na[i] < nb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t total = na.size() + nb.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

namespace {

SimilarityReport rank_pairs_impl(const KnowledgeGraph& graph, const EntityVocabulary& vocab,
                                 std::size_t top_n, bool parallel) {
  if (top_n == 0) throw Error("rank_similar_pairs: top_n must be positive");
  const std::size_t n = vocab.class_count();
  const std::size_t pair_count = n * (n - 1) / 2;

  std::vector<SimilarityPair> pairs(pair_count);
  // flattened unordered pair index -> (i, j) with i < j
  const auto fill_pair = [&](std::size_t p) {
    // invert p = i*(2n-i-1)/2 + (j-i-1) by scanning rows; rows are short enough
    std::size_t i = 0;
    std::size_t row = n - 1;
    std::size_t offset = p;
    while (offset >= row) {
      offset -= row;
      --row;
      ++i;
    }
    const std::size_t j = i + 1 + offset;
    const auto ci = static_cast<ClassId>(i);
    const auto cj = static_cast<ClassId>(j);
    const double score = jaccard(graph, vocab.class_node(ci), vocab.class_node(cj));
    const std::string& ni = vocab.class_name(ci);
    const std::string& nj = vocab.class_name(cj);
    if (ni <= nj) {
      pairs[p] = {ni, nj, score};
    } else {
      pairs[p] = {nj, ni, score};
    }
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pair_count); ++p) {
      fill_pair(static_cast<std::size_t>(p));
    }
  } else {
    for (std::size_t p = 0; p < pair_count; ++p) fill_pair(p);
  }

  std::sort(pairs.begin(), pairs.end(), [](const SimilarityPair& x, const SimilarityPair& y) {
    return std::tie(y.jaccard, x.a, x.b) < std::tie(x.jaccard, y.a, y.b);
  });
  if (pairs.size() > top_n) pairs.resize(top_n);
  return {std::move(pairs)};
}

}  // namespace

SimilarityReport rank_similar_pairs(const KnowledgeGraph& graph, const EntityVocabulary& vocab,
                                    std::size_t top_n) {
  return rank_pairs_impl(graph, vocab, top_n, /*parallel=*/true);
}

SimilarityReport rank_similar_pairs_serial(const KnowledgeGraph& graph,
                                           const EntityVocabulary& vocab, std::size_t top_n) {
  return rank_pairs_impl(graph, vocab, top_n, /*parallel=*/false);
}

Vector neighbor_embedding(const KnowledgeGraph& graph, const FeatureTable& features, NodeId c) {
  const auto nbrs = graph.neighbors(c);
  Vector out(static_cast<std::size_t>(features.dim()), 0.0);
  if (nbrs.empty()) return out;
  for (const NodeId n : nbrs) {
    const auto row = features.lookup(n);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(nbrs.size());
  for (double& v : out) v *= inv;
  return out;
}

std::string similarity_report_to_jsonl(const SimilarityReport& report) {
  std::string out;
  for (const SimilarityPair& p : report.pairs) {
    nlohmann::json line = {{"a", p.a}, {"b", p.b}, {"jaccard", p.jaccard}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_similarity_report(const SimilarityReport& report, const std::string& path) {
  write_file_atomic(path, similarity_report_to_jsonl(report));
}

}  // namespace kgmine
