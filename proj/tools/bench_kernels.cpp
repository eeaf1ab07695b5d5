// Compares the OpenMP kernels against their serial reference implementations
// on a synthetic graph/dataset, verifying that both sides agree before timing.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <random>

#include <omp.h>

#include <CLI11.hpp>

#include "kgmine/paths.hpp"
#include "kgmine/predictor.hpp"

namespace {

using namespace kgmine;

struct Bench {
  KnowledgeGraph graph;
  FeatureTable features;
  EntityVocabulary vocab;
  TripletDataset data;
};

Bench make_bench(std::size_t nodes, std::size_t edges, std::size_t classes, std::size_t relations,
                 std::size_t scenes, std::size_t triplets_per_scene, int feature_dim,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> node_dist(0, nodes - 1);
  std::uniform_int_distribution<int> label_dist(0, 7);

  GraphBuilder builder;
  const auto node_name = [](std::size_t i) { return "n" + std::to_string(i); };
  for (std::size_t i = 0; i < nodes; ++i) builder.intern_node(node_name(i));
  std::size_t added = 0;
  while (added < edges) {
    const std::size_t u = node_dist(rng);
    const std::size_t v = node_dist(rng);
    if (u == v) continue;
    builder.add_edge("L" + std::to_string(label_dist(rng)), node_name(u), node_name(v));
    ++added;
  }
  Bench bench;
  bench.graph = std::move(builder).finalize();

  bench.features = FeatureTable(feature_dim);
  std::uniform_real_distribution<double> fdist(-1.0, 1.0);
  Vector row(static_cast<std::size_t>(feature_dim));
  for (std::size_t i = 0; i < nodes; ++i) {
    for (double& v : row) v = fdist(rng);
    bench.features.set(static_cast<NodeId>(i), row);
  }

  std::vector<std::string> class_names;
  for (std::size_t c = 0; c < classes; ++c) class_names.push_back(node_name(c));
  bench.vocab = link_classes(class_names, bench.graph, NameNormalizer{});
  std::vector<std::string> relation_names;
  for (std::size_t r = 0; r < relations; ++r) relation_names.push_back("rel" + std::to_string(r));
  bench.vocab.set_relations(std::move(relation_names));

  std::uniform_int_distribution<ClassId> class_dist(0, static_cast<ClassId>(classes - 1));
  std::uniform_int_distribution<RelationId> rel_dist(0, static_cast<RelationId>(relations - 1));
  for (std::size_t s = 0; s < scenes; ++s) {
    Scene scene;
    scene.id = "s" + std::to_string(s);
    scene.split = s % 3 == 0 ? Split::test : Split::train;
    for (std::size_t t = 0; t < triplets_per_scene; ++t) {
      scene.triplets.push_back({class_dist(rng), rel_dist(rng), class_dist(rng)});
    }
    bench.data.add_scene(std::move(scene));
  }
  return bench;
}

template <typename Fn>
double time_best_ms(Fn&& fn, int repeats) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return best;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool equal) {
  std::cout << std::left << std::setw(24) << name << std::right << std::fixed
            << std::setprecision(2) << std::setw(12) << serial_ms << " ms" << std::setw(12)
            << parallel_ms << " ms" << std::setw(9) << std::setprecision(2)
            << (serial_ms / parallel_ms) << "x   " << (equal ? "results equal" : "MISMATCH")
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel comparison"};
  std::size_t nodes = 8000;
  std::size_t edges = 60000;
  std::size_t classes = 300;
  std::size_t relations = 12;
  std::size_t scenes = 400;
  std::size_t triplets_per_scene = 8;
  int feature_dim = 16;
  int threads = 0;
  int repeats = 3;
  std::uint64_t seed = 42;
  app.add_option("--nodes", nodes);
  app.add_option("--edges", edges);
  app.add_option("--classes", classes);
  app.add_option("--relations", relations);
  app.add_option("--scenes", scenes);
  app.add_option("--triplets-per-scene", triplets_per_scene);
  app.add_option("--feature-dim", feature_dim);
  app.add_option("--threads", threads);
  app.add_option("--repeats", repeats);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  if (threads > 0) omp_set_num_threads(threads);

  const Bench bench = make_bench(nodes, edges, classes, relations, scenes, triplets_per_scene,
                                 feature_dim, seed);
  std::cout << "graph: " << bench.graph.node_count() << " nodes, " << bench.graph.edge_count()
            << " edges; " << classes << " classes, " << bench.data.triplet_count() << " triplets; "
            << omp_get_max_threads() << " threads\n\n";
  std::cout << std::left << std::setw(24) << "kernel" << std::right << std::setw(15) << "serial"
            << std::setw(15) << "parallel" << std::setw(10) << "speedup" << "\n";

  {
    SimilarityReport serial_out, parallel_out;
    const std::size_t top_n = classes * classes;
    const double s = time_best_ms(
        [&] { serial_out = rank_similar_pairs_serial(bench.graph, bench.vocab, top_n); }, repeats);
    const double p = time_best_ms(
        [&] { parallel_out = rank_similar_pairs(bench.graph, bench.vocab, top_n); }, repeats);
    bool equal = serial_out.pairs.size() == parallel_out.pairs.size();
    for (std::size_t i = 0; equal && i < serial_out.pairs.size(); ++i) {
      equal = serial_out.pairs[i].a == parallel_out.pairs[i].a &&
              serial_out.pairs[i].b == parallel_out.pairs[i].b &&
              serial_out.pairs[i].jaccard == parallel_out.pairs[i].jaccard;
    }
    report("rank_similar_pairs", s, p, equal);
  }

  {
    PathStatistics serial_out, parallel_out;
    const double s = time_best_ms(
        [&] {
          serial_out = accumulate_statistics_serial(bench.graph, bench.vocab, bench.data, 2);
        },
        repeats);
    const double p = time_best_ms(
        [&] { parallel_out = accumulate_statistics(bench.graph, bench.vocab, bench.data, 2); },
        repeats);
    report("accumulate_statistics", s, p, serial_out == parallel_out);
  }

  std::mt19937_64 rng(seed);
  const Predictor model(PredictorMode::neighbor,
                        IntegratorConfig{IntegratorMode::neighbor, 2, 5, feature_dim, 4096},
                        bench.vocab.class_count(), bench.vocab.relation_count(), rng);
  const ZeroShotIndex index = build_zero_shot_index(bench.data);

  {
    RecallReport serial_out, parallel_out;
    const std::vector<int> ks = {20, 50, 100};
    const double s = time_best_ms(
        [&] {
          serial_out = evaluate_serial(model, bench.graph, bench.features, bench.vocab, bench.data,
                                       index, ks);
        },
        repeats);
    const double p = time_best_ms(
        [&] {
          parallel_out =
              evaluate(model, bench.graph, bench.features, bench.vocab, bench.data, index, ks);
        },
        repeats);
    report("evaluate", s, p, serial_out == parallel_out);
  }

  {
    // batch gradients on the path integrator, the heaviest training kernel
    std::mt19937_64 rng2(seed + 1);
    const Predictor path_model(PredictorMode::path,
                               IntegratorConfig{IntegratorMode::path, 2, 5, feature_dim, 4096},
                               bench.vocab.class_count(), bench.vocab.relation_count(), rng2);
    std::vector<ScoringInput> inputs;
    std::vector<const ScoringInput*> input_ptrs;
    std::vector<RelationId> labels;
    std::uniform_int_distribution<ClassId> class_dist(0, static_cast<ClassId>(classes - 1));
    std::uniform_int_distribution<RelationId> rel_dist(0,
                                                       static_cast<RelationId>(relations - 1));
    for (int i = 0; i < 32; ++i) {
      inputs.push_back(path_model.scoring_input(bench.graph, bench.features, bench.vocab,
                                                class_dist(rng2), class_dist(rng2)));
      labels.push_back(rel_dist(rng2));
    }
    for (const ScoringInput& input : inputs) input_ptrs.push_back(&input);

    Predictor::Gradients serial_out = path_model.make_gradients();
    Predictor::Gradients parallel_out = path_model.make_gradients();
    double serial_loss = 0.0, parallel_loss = 0.0;
    const double s = time_best_ms(
        [&] { serial_loss = batch_gradients_serial(path_model, input_ptrs, labels, serial_out); },
        repeats);
    const double p = time_best_ms(
        [&] { parallel_loss = batch_gradients(path_model, input_ptrs, labels, parallel_out); },
        repeats);
    const bool equal = serial_loss == parallel_loss &&
                       path_model.flatten(serial_out) == path_model.flatten(parallel_out);
    report("batch_gradients (path)", s, p, equal);
  }

  return 0;
}
