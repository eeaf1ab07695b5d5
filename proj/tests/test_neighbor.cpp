#include <doctest.h>

#include <random>

#include "kgmine/neighbor.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace kgmine;
using namespace kgtest;

TEST_CASE("jaccard on hand-built neighbor sets") {
  // N(a) = {x, y, z}, N(b) = {y, z, w}  ->  2 / 4
  const KnowledgeGraph g = graph_from({{"R", "a", "x"},
                                       {"R", "a", "y"},
                                       {"R", "a", "z"},
                                       {"R", "b", "y"},
                                       {"R", "b", "z"},
                                       {"R", "b", "w"}});
  const auto a = *g.find_node("a");
  const auto b = *g.find_node("b");
  CHECK(jaccard(g, a, b) == doctest::Approx(0.5));
  CHECK(jaccard(g, a, a) == doctest::Approx(1.0));

  // disjoint neighborhoods
  CHECK(jaccard(g, *g.find_node("x"), *g.find_node("w")) == doctest::Approx(0.0));
}

TEST_CASE("jaccard of two isolated nodes is zero") {
  GraphBuilder builder;
  builder.intern_node("p");
  builder.intern_node("q");
  builder.add_edge("R", "a", "b");
  const KnowledgeGraph g = std::move(builder).finalize();
  CHECK(jaccard(g, *g.find_node("p"), *g.find_node("q")) == 0.0);
}

TEST_CASE("jaccard properties on random graphs against the set oracle") {
  std::mt19937_64 rng(21);
  const auto edges = random_edge_list(25, 60, 3, rng);
  const KnowledgeGraph g = graph_from(edges);
  const auto sets = oracle_neighbor_sets(edges);

  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(g.node_count() - 1));
  for (int i = 0; i < 300; ++i) {
    const NodeId a = node(rng);
    const NodeId b = node(rng);
    const double j = jaccard(g, a, b);
    CHECK(j == jaccard(g, b, a));
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);

    auto it_a = sets.find(g.node_name(a));
    auto it_b = sets.find(g.node_name(b));
    const std::set<std::string> empty;
    const double expected = oracle_jaccard(it_a == sets.end() ? empty : it_a->second,
                                           it_b == sets.end() ? empty : it_b->second);
    CHECK(j == doctest::Approx(expected).epsilon(1e-12));
    if (!g.neighbors(a).empty()) CHECK(jaccard(g, a, a) == 1.0);
  }
}

TEST_CASE("rank_similar_pairs scores every unordered pair") {
  const KnowledgeGraph g = graph_from({{"R", "cat", "pet"},
                                       {"R", "cat", "fur"},
                                       {"R", "dog", "pet"},
                                       {"R", "dog", "fur"},
                                       {"R", "fish", "water"}});
  const EntityVocabulary vocab = link_classes({"cat", "dog", "fish"}, g, NameNormalizer{});

  const SimilarityReport all = rank_similar_pairs(g, vocab, 100);
  CHECK(all.pairs.size() == 3);  // C(3,2)
  CHECK(all.pairs.front().a == "cat");
  CHECK(all.pairs.front().b == "dog");
  CHECK(all.pairs.front().jaccard == doctest::Approx(1.0));

  const SimilarityReport top1 = rank_similar_pairs(g, vocab, 1);
  CHECK(top1.pairs.size() == 1);

  CHECK_THROWS_AS(rank_similar_pairs(g, vocab, 0), Error);
}

TEST_CASE("similarity report is ordered and ties break lexicographically") {
  // two pairs with identical scores
  const KnowledgeGraph g = graph_from({{"R", "a", "x"}, {"R", "b", "x"}, {"R", "c", "y"},
                                       {"R", "d", "y"}});
  const EntityVocabulary vocab = link_classes({"d", "c", "b", "a"}, g, NameNormalizer{});
  const SimilarityReport report = rank_similar_pairs(g, vocab, 100);
  REQUIRE(report.pairs.size() == 6);
  CHECK(report.pairs[0].jaccard == doctest::Approx(1.0));
  CHECK(report.pairs[1].jaccard == doctest::Approx(1.0));
  // ("a","b") sorts before ("c","d") at the same score
  CHECK(report.pairs[0].a == "a");
  CHECK(report.pairs[0].b == "b");
  CHECK(report.pairs[1].a == "c");
  CHECK(report.pairs[1].b == "d");

  const std::string jsonl = similarity_report_to_jsonl(report);
  CHECK(jsonl.find("\"a\":\"a\",\"b\":\"b\"") != std::string::npos);
}

TEST_CASE("neighbor embedding averages neighbor features") {
  const KnowledgeGraph g = graph_from({{"R", "c", "n1"}, {"R", "c", "n2"}, {"R", "solo", "s1"}});
  FeatureTable f(2);
  f.set(*g.find_node("n1"), Vector{0.0, 0.0});
  f.set(*g.find_node("n2"), Vector{2.0, 4.0});
  f.set(*g.find_node("s1"), Vector{1.0, 2.0});

  const Vector two = neighbor_embedding(g, f, *g.find_node("c"));
  CHECK(two[0] == doctest::Approx(1.0));
  CHECK(two[1] == doctest::Approx(2.0));

  // average of a single neighbor is that neighbor's features
  const Vector one = neighbor_embedding(g, f, *g.find_node("solo"));
  CHECK(one[0] == doctest::Approx(1.0));
  CHECK(one[1] == doctest::Approx(2.0));

  // n1's only neighbor is c, which has no feature row -> zero default
  const Vector zero = neighbor_embedding(g, f, *g.find_node("n1"));
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("neighbor embedding of an isolated node is the zero vector") {
  GraphBuilder builder;
  builder.intern_node("alone");
  builder.add_edge("R", "a", "b");
  const KnowledgeGraph g = std::move(builder).finalize();
  FeatureTable f(3);
  const Vector e = neighbor_embedding(g, f, *g.find_node("alone"));
  CHECK(e == Vector{0.0, 0.0, 0.0});
}

TEST_CASE("neighbor embedding matches a direct summation oracle") {
  std::mt19937_64 rng(22);
  const auto edges = random_edge_list(20, 50, 3, rng);
  const KnowledgeGraph g = graph_from(edges);
  const FeatureTable f = random_features(g, 4, rng);

  for (std::size_t u = 0; u < g.node_count(); ++u) {
    const Vector got = neighbor_embedding(g, f, static_cast<NodeId>(u));
    const auto nbrs = g.neighbors(static_cast<NodeId>(u));
    Vector expected(4, 0.0);
    std::vector<double> lo(4, 1e300), hi(4, -1e300);
    for (const NodeId n : nbrs) {
      const auto row = f.lookup(n);
      for (int i = 0; i < 4; ++i) {
        expected[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)];
        lo[static_cast<std::size_t>(i)] = std::min(lo[static_cast<std::size_t>(i)], row[static_cast<std::size_t>(i)]);
        hi[static_cast<std::size_t>(i)] = std::max(hi[static_cast<std::size_t>(i)], row[static_cast<std::size_t>(i)]);
      }
    }
    if (!nbrs.empty()) {
      for (double& v : expected) v /= static_cast<double>(nbrs.size());
    }
    for (int i = 0; i < 4; ++i) {
      CHECK(got[static_cast<std::size_t>(i)] ==
            doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-12));
      if (!nbrs.empty()) {
        // each coordinate of the mean stays inside the neighbor range
        CHECK(got[static_cast<std::size_t>(i)] >= lo[static_cast<std::size_t>(i)] - 1e-12);
        CHECK(got[static_cast<std::size_t>(i)] <= hi[static_cast<std::size_t>(i)] + 1e-12);
      }
    }
  }
}

TEST_CASE("neighbor embedding is invariant to input line order") {
  std::mt19937_64 rng(23);
  auto edges = random_edge_list(15, 40, 3, rng);
  const KnowledgeGraph g = graph_from(edges);
  const FeatureTable f = random_features(g, 3, rng);

  std::shuffle(edges.begin(), edges.end(), rng);
  const KnowledgeGraph h = graph_from(edges);
  FeatureTable fh(3);
  for (std::size_t u = 0; u < g.node_count(); ++u) {
    fh.set(*h.find_node(g.node_name(static_cast<NodeId>(u))), f.lookup(static_cast<NodeId>(u)));
  }

  for (std::size_t u = 0; u < g.node_count(); ++u) {
    const Vector a = neighbor_embedding(g, f, static_cast<NodeId>(u));
    const Vector b =
        neighbor_embedding(h, fh, *h.find_node(g.node_name(static_cast<NodeId>(u))));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}
