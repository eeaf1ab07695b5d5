#pragma once

// Shared fixtures for the test suites: tiny graph builders, seeded random
// instances, and the synthetic clustered zero-shot task.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "kgmine/dataset.hpp"
#include "kgmine/graph.hpp"

namespace kgtest {

using namespace kgmine;

struct EdgeTriple {
  std::string label;
  std::string head;
  std::string tail;
};

inline KnowledgeGraph graph_from(const std::vector<EdgeTriple>& edges) {
  GraphBuilder builder;
  for (const EdgeTriple& e : edges) builder.add_edge(e.label, e.head, e.tail);
  return std::move(builder).finalize();
}

inline std::vector<EdgeTriple> random_edge_list(std::size_t nodes, std::size_t edges,
                                                int labels, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> node_dist(0, nodes - 1);
  std::uniform_int_distribution<int> label_dist(0, labels - 1);
  std::vector<EdgeTriple> out;
  out.reserve(edges);
  for (std::size_t i = 0; i < edges; ++i) {
    const std::size_t u = node_dist(rng);
    const std::size_t v = node_dist(rng);
    if (u == v) continue;  // the loader would drop it anyway
    out.push_back({"L" + std::to_string(label_dist(rng)), "n" + std::to_string(u),
                   "n" + std::to_string(v)});
  }
  if (out.empty()) out.push_back({"L0", "n0", "n1"});
  return out;
}

inline FeatureTable random_features(const KnowledgeGraph& graph, int dim, std::mt19937_64& rng) {
  FeatureTable table(dim);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector row(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (double& v : row) v = dist(rng);
    table.set(static_cast<NodeId>(i), row);
  }
  return table;
}

/// Scratch directory unique to this test process, removed lazily by the OS.
inline std::filesystem::path temp_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("kgmine_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = temp_dir() / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  return path.string();
}

// ---------------------------------------------------------------------------
// Synthetic zero-shot task: classes fall into clusters that share neighbor
// nodes in the graph, bridge nodes connect cluster pairs, and the relation of
// a triplet is a function of the (unordered) cluster pair alone. A fraction of
// the (subject, object, relation) combinations is held out of training.

struct SyntheticTask {
  KnowledgeGraph graph;
  FeatureTable features;
  EntityVocabulary vocab;
  TripletDataset data;
  std::size_t holdout_combos = 0;
};

// clusters must stay below 10: node names encode cluster ids as single digits
inline SyntheticTask make_cluster_task(int clusters, int classes_per_cluster, int feature_dim,
                                       double holdout_fraction, int train_repeats,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const int attrs_per_cluster = 6;
  const int uniques_per_class = 2;
  const auto cluster_of = [&](int class_idx) { return class_idx / classes_per_cluster; };
  const int class_count = clusters * classes_per_cluster;

  std::vector<std::string> class_names;
  for (int c = 0; c < class_count; ++c) {
    class_names.push_back("c" + std::to_string(cluster_of(c)) + "_" + std::to_string(c));
  }

  GraphBuilder builder;
  for (int c = 0; c < class_count; ++c) {
    const int x = cluster_of(c);
    for (int j = 0; j < attrs_per_cluster; ++j) {
      builder.add_edge("RelatedTo", class_names[static_cast<std::size_t>(c)],
                       "attr" + std::to_string(x) + "_" + std::to_string(j));
    }
    for (int u = 0; u < uniques_per_class; ++u) {
      builder.add_edge("HasA", class_names[static_cast<std::size_t>(c)],
                       "uniq" + std::to_string(c) + "_" + std::to_string(u));
    }
  }
  for (int x = 0; x < clusters; ++x) {
    for (int y = x + 1; y < clusters; ++y) {
      const std::string bridge = "bridge" + std::to_string(x) + "_" + std::to_string(y);
      for (int c = 0; c < class_count; ++c) {
        const int cl = cluster_of(c);
        if (cl == x || cl == y) {
          builder.add_edge("AtLocation", class_names[static_cast<std::size_t>(c)], bridge);
        }
      }
    }
  }

  SyntheticTask task;
  task.graph = std::move(builder).finalize();

  // cluster base vectors drive all features
  std::vector<Vector> base(static_cast<std::size_t>(clusters),
                           Vector(static_cast<std::size_t>(feature_dim)));
  for (auto& b : base) {
    for (double& v : b) v = unit(rng);
  }
  task.features = FeatureTable(feature_dim);
  Vector row(static_cast<std::size_t>(feature_dim));
  for (std::size_t n = 0; n < task.graph.node_count(); ++n) {
    const std::string& name = task.graph.node_name(static_cast<NodeId>(n));
    if (name.rfind("attr", 0) == 0 || name.rfind("c", 0) == 0) {
      const int x = name[name.rfind("attr", 0) == 0 ? 4 : 1] - '0';
      for (int i = 0; i < feature_dim; ++i) {
        row[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(x)][static_cast<std::size_t>(i)] + noise(rng);
      }
    } else if (name.rfind("bridge", 0) == 0) {
      const int x = name[6] - '0';
      const int y = name[8] - '0';
      for (int i = 0; i < feature_dim; ++i) {
        row[static_cast<std::size_t>(i)] =
            0.5 * (base[static_cast<std::size_t>(x)][static_cast<std::size_t>(i)] +
                   base[static_cast<std::size_t>(y)][static_cast<std::size_t>(i)]) +
            noise(rng);
      }
    } else {
      for (double& v : row) v = noise(rng);
    }
    task.features.set(static_cast<NodeId>(n), row);
  }

  task.vocab = link_classes(class_names, task.graph, NameNormalizer{});
  std::vector<std::string> relation_names;
  std::vector<std::vector<RelationId>> relation_of(
      static_cast<std::size_t>(clusters), std::vector<RelationId>(static_cast<std::size_t>(clusters)));
  for (int x = 0; x < clusters; ++x) {
    for (int y = x; y < clusters; ++y) {
      const auto id = static_cast<RelationId>(relation_names.size());
      relation_names.push_back("rel" + std::to_string(x) + "_" + std::to_string(y));
      relation_of[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] = id;
      relation_of[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = id;
    }
  }
  task.vocab.set_relations(relation_names);

  // all ordered class pairs; hold a fraction out of training entirely
  std::vector<std::pair<ClassId, ClassId>> combos;
  for (int a = 0; a < class_count; ++a) {
    for (int b = 0; b < class_count; ++b) {
      if (a != b) combos.emplace_back(static_cast<ClassId>(a), static_cast<ClassId>(b));
    }
  }
  std::shuffle(combos.begin(), combos.end(), rng);
  const auto holdout =
      static_cast<std::size_t>(holdout_fraction * static_cast<double>(combos.size()));
  task.holdout_combos = holdout;

  const auto relation_for = [&](ClassId a, ClassId b) {
    return relation_of[static_cast<std::size_t>(cluster_of(a))]
                      [static_cast<std::size_t>(cluster_of(b))];
  };

  std::vector<Triplet> round;
  for (std::size_t i = holdout; i < combos.size(); ++i) {
    round.push_back(
        {combos[i].first, relation_for(combos[i].first, combos[i].second), combos[i].second});
  }
  // one shuffled pass per repeat keeps scenes free of duplicate triplets
  int scene_no = 0;
  for (int r = 0; r < train_repeats; ++r) {
    std::shuffle(round.begin(), round.end(), rng);
    for (std::size_t i = 0; i < round.size(); i += 4) {
      Scene scene;
      scene.id = "train_" + std::to_string(scene_no++);
      scene.split = Split::train;
      for (std::size_t j = i; j < std::min(i + 4, round.size()); ++j) {
        scene.triplets.push_back(round[j]);
      }
      task.data.add_scene(std::move(scene));
    }
  }
  // single-triplet test scenes: recall@1 is plain pair accuracy
  for (std::size_t i = 0; i < combos.size(); ++i) {
    Scene scene;
    scene.id = "test_" + std::to_string(i);
    scene.split = Split::test;
    scene.triplets.push_back(
        {combos[i].first, relation_for(combos[i].first, combos[i].second), combos[i].second});
    task.data.add_scene(std::move(scene));
  }
  return task;
}

}  // namespace kgtest
