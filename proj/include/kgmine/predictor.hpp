#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kgmine/dataset.hpp"
#include "kgmine/integrators.hpp"

namespace kgmine {

/// What feeds the relation classifier: one of the three knowledge integrators,
/// or the knowledge-free one-hot class-pair baseline.
enum class PredictorMode { onehot, neighbor, path, fused };

const char* to_string(PredictorMode mode);
PredictorMode predictor_mode_from_string(std::string_view name);
bool uses_integrator(PredictorMode mode);
IntegratorMode to_integrator_mode(PredictorMode mode);

struct TrainingConfig {
  std::uint64_t seed = 7;
  double learning_rate = 0.05;
  int decay_steps = 0;  // 0 disables the stepped decay
  double decay_factor = 10.0;
  int max_steps = 500;
  int batch_size = 16;
  double stop_loss = 0.0;  // early stop threshold on batch loss; 0 disables

  void validate() const;
  double learning_rate_at(int step) const;
};

struct PredictorConfig {
  PredictorMode mode = PredictorMode::neighbor;
  IntegratorConfig integrator;
  TrainingConfig training;
};

/// Parameter-independent encoding of one class pair, cached by training and
/// evaluation because it never changes while parameters move.
struct ScoringInput {
  PairInput pair;  // integrator modes
  Vector onehot;   // onehot mode
};

/// Relation scorer over class pairs: a classifier MLP on top of the configured
/// knowledge embedding (or the one-hot baseline). Pure given its parameters;
/// concurrent scoring is safe.
class Predictor {
 public:
  Predictor(PredictorMode mode, const IntegratorConfig& integrator, std::size_t class_count,
            std::size_t relation_count, std::mt19937_64& rng);

  PredictorMode mode() const { return mode_; }
  const IntegratorConfig& integrator_config() const { return integrator_config_; }
  std::size_t class_count() const { return class_count_; }
  std::size_t relation_count() const { return relation_count_; }
  const Mlp& integrator_mlp() const { return integrator_mlp_; }
  const Mlp& classifier() const { return classifier_; }

  ScoringInput scoring_input(const KnowledgeGraph& graph, const FeatureTable& features,
                             const EntityVocabulary& vocab, ClassId a, ClassId b) const;

  /// Unnormalized relation scores; the argmax is the predicted relation.
  Vector score_pair(const KnowledgeGraph& graph, const FeatureTable& features,
                    const EntityVocabulary& vocab, ClassId a, ClassId b) const;
  Vector score_pair(const KnowledgeGraph& graph, const FeatureTable& features,
                    const EntityVocabulary& vocab, std::string_view a, std::string_view b) const;
  Vector score_from_input(const ScoringInput& input) const;

  struct Gradients {
    MlpGrad integrator;
    MlpGrad classifier;
  };
  Gradients make_gradients() const;

  double example_loss(const ScoringInput& input, RelationId label) const;
  /// Softmax cross-entropy loss of one example; accumulates gradients.
  double example_loss_and_grad(const ScoringInput& input, RelationId label, Gradients& grad) const;

  std::size_t parameter_count() const;
  Vector flatten_parameters() const;
  void set_parameters(std::span<const double> values);
  Vector flatten(const Gradients& grad) const;

  /// Canonical one-line JSON descriptor of mode, dimensions and layer shapes.
  std::string descriptor() const;
  Checkpoint to_checkpoint() const;
  static Predictor from_checkpoint(const Checkpoint& checkpoint);

  /// Throws when the checkpointed shapes cannot serve this vocabulary/feature
  /// table.
  void check_compatible(const EntityVocabulary& vocab, const FeatureTable& features) const;

 private:
  Predictor() = default;

  PredictorMode mode_ = PredictorMode::onehot;
  IntegratorConfig integrator_config_;
  std::size_t class_count_ = 0;
  std::size_t relation_count_ = 0;
  Mlp integrator_mlp_;  // unused in onehot mode
  Mlp classifier_;
};

/// Mean loss over a batch; per-example passes run in parallel, per-example
/// gradients are then summed in example order so the result is bit-identical
/// to the serial reference.
double batch_gradients(const Predictor& model, const std::vector<const ScoringInput*>& inputs,
                       const std::vector<RelationId>& labels, Predictor::Gradients& out);
double batch_gradients_serial(const Predictor& model,
                              const std::vector<const ScoringInput*>& inputs,
                              const std::vector<RelationId>& labels, Predictor::Gradients& out);

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
};

/// Trains the configured predictor on the dataset's training split with
/// seeded shuffling and plain SGD. Deterministic given config.
Predictor train_predictor(const TripletDataset& data, const EntityVocabulary& vocab,
                          const KnowledgeGraph& graph, const FeatureTable& features,
                          const PredictorConfig& config, TrainLog* log = nullptr);

/// Zero-shot / non-zero-shot recall at each K, both with and without the
/// graph constraint, plus per-relation and scene-averaged breakdowns.
struct RecallReport {
  std::vector<int> ks;
  std::map<int, double> zR;
  std::map<int, double> ng_zR;
  std::map<int, double> nonzero_R;
  std::map<int, double> ng_nonzero_R;
  std::map<int, double> overall_R;
  std::map<int, double> ng_overall_R;
  std::map<int, double> mean_zR;         // average of per-relation zero-shot recall
  std::map<int, double> zR_scene_mean;   // per-scene recall averaged over scenes
  std::map<std::string, std::map<int, double>> per_relation;  // zero-shot subset
  std::size_t zero_shot_total = 0;
  std::size_t nonzero_total = 0;

  friend bool operator==(const RecallReport&, const RecallReport&) = default;
};

std::string recall_report_to_json(const RecallReport& report);
void write_recall_report(const RecallReport& report, const std::string& path);

using PairScorer = std::function<Vector(ClassId, ClassId)>;

/// Evaluation core shared by the predictor entry point, the serial reference
/// and test oracles. Candidates of a scene are every (ordered pair from its
/// triplets) x relation, ranked by score descending (ties by pair order, then
/// relation id). A triplet is recalled at K when its candidate ranks in the
/// top K; under the graph constraint its relation must additionally be the
/// pair's top-scoring relation, which makes graph-constraint recall a subset
/// of the no-constraint recall at every K.
RecallReport evaluate_with_scorer(const PairScorer& scorer, const EntityVocabulary& vocab,
                                  const TripletDataset& data, const ZeroShotIndex& index,
                                  const std::vector<int>& ks, bool parallel);

/// OpenMP kernel: distinct test pairs are scored in parallel, scenes are
/// counted in parallel, totals merge by integer addition.
RecallReport evaluate(const Predictor& model, const KnowledgeGraph& graph,
                      const FeatureTable& features, const EntityVocabulary& vocab,
                      const TripletDataset& data, const ZeroShotIndex& index,
                      const std::vector<int>& ks);
RecallReport evaluate_serial(const Predictor& model, const KnowledgeGraph& graph,
                             const FeatureTable& features, const EntityVocabulary& vocab,
                             const TripletDataset& data, const ZeroShotIndex& index,
                             const std::vector<int>& ks);

}  // namespace kgmine
