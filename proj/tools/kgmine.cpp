#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgmine/config.hpp"
#include "kgmine/neighbor.hpp"
#include "kgmine/paths.hpp"

namespace {

using namespace kgmine;

namespace fs = std::filesystem;

std::string out_path(const RunConfig& config, const std::string& explicit_path,
                     const std::string& default_name) {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(config.output_dir) / default_name).string();
}

KnowledgeGraph load_graph(const RunConfig& config, IngestReport* report = nullptr) {
  if (!config.snapshot.empty() && fs::exists(config.snapshot)) {
    return load_snapshot(config.snapshot);
  }
  if (config.edges.empty()) throw Error("config: paths.edges is required");
  return load_edges(config.edges, {}, report);
}

EntityVocabulary load_vocab(const RunConfig& config, const KnowledgeGraph& graph,
                            bool need_relations) {
  if (config.classes.empty()) throw Error("config: paths.classes is required");
  EntityVocabulary vocab = link_classes(read_name_list(config.classes), graph, NameNormalizer{});
  if (need_relations) {
    if (config.relations.empty()) throw Error("config: paths.relations is required");
    vocab.set_relations(read_name_list(config.relations));
  }
  return vocab;
}

FeatureTable load_features_if_needed(const RunConfig& config, const KnowledgeGraph& graph,
                                     FeatureLoadReport* report = nullptr) {
  if (!uses_integrator(config.mode)) return FeatureTable{};
  if (config.features.empty()) {
    throw Error("config: paths.features is required for the " + std::string(to_string(config.mode)) +
                " integrator");
  }
  return load_features(config.features, graph, report);
}

void apply_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int cmd_ingest(const RunConfig& config, const std::string& snapshot_out) {
  IngestReport report;
  if (config.edges.empty()) throw Error("config: paths.edges is required");
  const KnowledgeGraph graph = load_edges(config.edges, {}, &report);
  std::cout << "nodes: " << graph.node_count() << "\n"
            << "edges: " << graph.edge_count() << "\n"
            << "labels: " << graph.label_count() << "\n"
            << "duplicate edges collapsed: " << report.duplicates_collapsed << "\n"
            << "self-loops dropped: " << report.self_loops_dropped << "\n";
  if (!config.features.empty()) {
    FeatureLoadReport freport;
    const FeatureTable features = load_features(config.features, graph, &freport);
    std::cout << "feature dim: " << features.dim() << "\n"
              << "feature rows: " << freport.rows_loaded << "\n"
              << "feature rows skipped (unknown node): " << freport.unknown_rows << "\n";
  }
  const std::string snapshot = snapshot_out.empty() ? config.snapshot : snapshot_out;
  if (!snapshot.empty()) {
    save_snapshot(graph, snapshot);
    std::cout << "snapshot: " << snapshot << "\n";
  }
  return 0;
}

int cmd_similar_pairs(const RunConfig& config, std::size_t top_n, const std::string& out) {
  const KnowledgeGraph graph = load_graph(config);
  const EntityVocabulary vocab = load_vocab(config, graph, /*need_relations=*/false);
  const SimilarityReport report = rank_similar_pairs(graph, vocab, top_n);
  const std::string path = out_path(config, out, "similar_pairs.jsonl");
  write_similarity_report(report, path);
  std::cout << "pairs written: " << report.pairs.size() << " -> " << path << "\n";
  const std::size_t preview = std::min<std::size_t>(5, report.pairs.size());
  for (std::size_t i = 0; i < preview; ++i) {
    const SimilarityPair& p = report.pairs[i];
    std::cout << (i + 1) << ". " << p.a << "-" << p.b << "  " << p.jaccard << "\n";
  }
  return 0;
}

int cmd_score_midpaths(const RunConfig& config, std::size_t top_n, const std::string& out,
                       const std::string& stats_out) {
  const KnowledgeGraph graph = load_graph(config);
  const EntityVocabulary vocab = load_vocab(config, graph, /*need_relations=*/true);
  if (config.triplets.empty()) throw Error("config: paths.triplets is required");
  const TripletDataset data = load_triplets(config.triplets, vocab);

  const PathStatistics stats = accumulate_statistics(graph, vocab, data, config.hops,
                                                     config.path_cap);
  if (!stats_out.empty()) write_statistics(stats, graph, vocab, stats_out);

  const auto top = top_midpaths_per_relation(stats, top_n);
  std::string jsonl;
  for (const auto& [relation, entries] : top) {
    const std::string& name = vocab.relation_name(relation);
    std::cout << name << ":";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string rendered = render_midpath(entries[i].first, graph);
      std::cout << (i == 0 ? " " : " | ") << rendered;
      nlohmann::json line = {{"relation", name},
                             {"rank", i + 1},
                             {"midpath", rendered},
                             {"score", entries[i].second}};
      jsonl += line.dump();
      jsonl += '\n';
    }
    std::cout << "\n";
  }
  const std::string path = out_path(config, out, "midpath_report.jsonl");
  write_file_atomic(path, jsonl);
  std::cout << "relations scored: " << top.size() << " -> " << path << "\n";
  if (stats.truncated_pairs() > 0) {
    std::cout << "pairs truncated at cap: " << stats.truncated_pairs() << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& checkpoint_out,
              const std::string& log_out) {
  const KnowledgeGraph graph = load_graph(config);
  const EntityVocabulary vocab = load_vocab(config, graph, /*need_relations=*/true);
  const FeatureTable features = load_features_if_needed(config, graph);
  if (config.triplets.empty()) throw Error("config: paths.triplets is required");
  const TripletDataset data = load_triplets(config.triplets, vocab);

  TrainLog log;
  const Predictor model =
      train_predictor(data, vocab, graph, features, config.predictor_config(features.dim()), &log);

  const std::string ckpt_path = out_path(config, checkpoint_out, "model.ckpt");
  save_checkpoint(model.to_checkpoint(), ckpt_path);

  std::string log_text = "step\tloss\tlearning_rate\n";
  for (const TrainLogEntry& e : log.entries) {
    log_text += std::to_string(e.step) + "\t" + format_double(e.loss) + "\t" +
                format_double(e.learning_rate) + "\n";
  }
  const std::string log_path = out_path(config, log_out, "train_log.tsv");
  write_file_atomic(log_path, log_text);

  std::cout << "mode: " << to_string(config.mode) << "\n"
            << "steps: " << log.entries.size() << "\n";
  if (!log.entries.empty()) {
    std::cout << "first loss: " << log.entries.front().loss << "\n"
              << "final loss: " << log.entries.back().loss << "\n";
  }
  std::cout << "checkpoint: " << ckpt_path << "\n"
            << "training log: " << log_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config, const std::string& checkpoint_path, const std::string& out,
             int filter_common) {
  const KnowledgeGraph graph = load_graph(config);
  const EntityVocabulary vocab = load_vocab(config, graph, /*need_relations=*/true);
  const FeatureTable features = load_features_if_needed(config, graph);
  if (config.triplets.empty()) throw Error("config: paths.triplets is required");
  TripletDataset data = load_triplets(config.triplets, vocab);

  const std::string ckpt = checkpoint_path.empty()
                               ? (fs::path(config.output_dir) / "model.ckpt").string()
                               : checkpoint_path;
  const Predictor model = Predictor::from_checkpoint(load_checkpoint(ckpt));
  if (model.mode() != config.mode) {
    throw Error(std::string("checkpoint was trained in '") + to_string(model.mode()) +
                "' mode but the config says '" + to_string(config.mode) + "'");
  }
  model.check_compatible(vocab, features);

  if (filter_common > 0) {
    // drop zero-shot test triplets of the most common training relations
    const auto freq = train_relation_frequencies(data, vocab.relation_count());
    std::vector<RelationId> by_freq(vocab.relation_count());
    std::iota(by_freq.begin(), by_freq.end(), 0);
    std::sort(by_freq.begin(), by_freq.end(), [&](RelationId a, RelationId b) {
      if (freq[static_cast<std::size_t>(a)] != freq[static_cast<std::size_t>(b)]) {
        return freq[static_cast<std::size_t>(a)] > freq[static_cast<std::size_t>(b)];
      }
      return a < b;
    });
    by_freq.resize(std::min<std::size_t>(static_cast<std::size_t>(filter_common), by_freq.size()));
    data = filter_test_common_relations(data, build_zero_shot_index(data), by_freq);
  }

  const ZeroShotIndex index = build_zero_shot_index(data);
  const RecallReport report = evaluate(model, graph, features, vocab, data, index, config.ks);

  const std::string path = out_path(config, out, "recall_report.json");
  write_recall_report(report, path);
  std::cout << "zero-shot triplets: " << report.zero_shot_total << "\n"
            << "non-zero-shot triplets: " << report.nonzero_total << "\n";
  for (const int k : report.ks) {
    std::cout << "zR@" << k << ": " << report.zR.at(k) << "  ng-zR@" << k << ": "
              << report.ng_zR.at(k) << "\n";
  }
  std::cout << "report: " << path << "\n";
  return 0;
}

int cmd_amplify(const RunConfig& config, std::size_t tail_count, double fraction,
                const std::string& out) {
  const KnowledgeGraph graph = load_graph(config);
  const EntityVocabulary vocab = load_vocab(config, graph, /*need_relations=*/true);
  if (config.triplets.empty()) throw Error("config: paths.triplets is required");
  const TripletDataset data = load_triplets(config.triplets, vocab);

  AmplifyLog log;
  const TripletDataset amplified =
      amplify_zero_shot(data, tail_count, fraction, vocab.relation_count(), &log);

  const std::string path = out_path(config, out, "triplets_amplified.tsv");
  write_triplets(amplified, vocab, path);

  std::cout << "scenes removed: " << log.removed_scene_ids.size() << "\n";
  for (const auto& change : log.tail_relations) {
    std::cout << "  " << vocab.relation_name(change.relation) << ": " << change.before << " -> "
              << change.after << "\n";
  }
  std::cout << "triplets: " << data.triplet_count() << " -> " << amplified.triplet_count() << "\n"
            << "output: " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgmine: commonsense knowledge-graph mining and zero-shot relation prediction"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads_override;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file")->required();
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--threads", threads_override, "override the config thread count");
  };

  auto* ingest = app.add_subcommand("ingest", "load the edge/feature files and print a summary");
  std::string snapshot_out;
  add_common(ingest);
  ingest->add_option("--snapshot-out", snapshot_out, "write a binary graph snapshot here");

  auto* similar = app.add_subcommand("similar-pairs", "rank class pairs by neighbor Jaccard");
  std::size_t similar_top_n = 20;
  std::string similar_out;
  add_common(similar);
  similar->add_option("--top-n", similar_top_n, "pairs to keep")->check(CLI::PositiveNumber);
  similar->add_option("--out", similar_out, "report path (JSON lines)");

  auto* midpaths = app.add_subcommand("score-midpaths", "rank MidPaths per relation");
  std::size_t midpaths_top_n = 3;
  std::string midpaths_out;
  std::string stats_out;
  add_common(midpaths);
  midpaths->add_option("--top-n", midpaths_top_n, "MidPaths per relation")
      ->check(CLI::PositiveNumber);
  midpaths->add_option("--out", midpaths_out, "report path (JSON lines)");
  midpaths->add_option("--stats-out", stats_out, "raw co-occurrence dump path");

  auto* train = app.add_subcommand("train", "train the configured relation predictor");
  std::string checkpoint_out;
  std::string log_out;
  add_common(train);
  train->add_option("--checkpoint-out", checkpoint_out, "checkpoint path");
  train->add_option("--log-out", log_out, "training log path");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string checkpoint_path;
  std::string eval_out;
  int filter_common = 0;
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate");
  eval->add_option("--out", eval_out, "recall report path");
  eval->add_option("--filter-common-relations", filter_common,
                   "remove zero-shot test triplets of the N most common training relations");

  auto* amplify = app.add_subcommand("amplify", "remove training scenes with rare relations");
  std::size_t tail_count = 0;
  double fraction = 0.5;
  std::string amplify_out;
  add_common(amplify);
  amplify->add_option("--tail-count", tail_count, "how many least-frequent relations to target")
      ->required();
  amplify->add_option("--fraction", fraction, "target fraction of each tail relation's count")
      ->required();
  amplify->add_option("--out", amplify_out, "output triplet file");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = parse_run_config(config_path);
    if (seed_override) config.training.seed = *seed_override;
    if (threads_override) config.threads = *threads_override;
    apply_threads(config.threads);

    if (ingest->parsed()) return cmd_ingest(config, snapshot_out);
    if (similar->parsed()) return cmd_similar_pairs(config, similar_top_n, similar_out);
    if (midpaths->parsed()) {
      return cmd_score_midpaths(config, midpaths_top_n, midpaths_out, stats_out);
    }
    if (train->parsed()) return cmd_train(config, checkpoint_out, log_out);
    if (eval->parsed()) return cmd_eval(config, checkpoint_path, eval_out, filter_common);
    if (amplify->parsed()) return cmd_amplify(config, tail_count, fraction, amplify_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
