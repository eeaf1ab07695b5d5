#include "kgmine/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace kgmine {

const char* to_string(PredictorMode mode) {
  switch (mode) {
    case PredictorMode::onehot:
      return "onehot";
    case PredictorMode::neighbor:
      return "neighbor";
    case PredictorMode::path:
      return "path";
    case PredictorMode::fused:
      return "fused";
  }
  throw Error("unknown predictor mode");
}

PredictorMode predictor_mode_from_string(std::string_view name) {
  if (name == "onehot") return PredictorMode::onehot;
  if (name == "neighbor") return PredictorMode::neighbor;
  if (name == "path") return PredictorMode::path;
  if (name == "fused") return PredictorMode::fused;
  throw Error("unknown predictor mode '" + std::string(name) + "'");
}

bool uses_integrator(PredictorMode mode) { return mode != PredictorMode::onehot; }

IntegratorMode to_integrator_mode(PredictorMode mode) {
  switch (mode) {
    case PredictorMode::neighbor:
      return IntegratorMode::neighbor;
    case PredictorMode::path:
      return IntegratorMode::path;
    case PredictorMode::fused:
      return IntegratorMode::fused;
    case PredictorMode::onehot:
      break;
  }
  throw Error("the onehot baseline has no integrator");
}

void TrainingConfig::validate() const {
  // zero is allowed: a frozen-parameter run is a legitimate baseline
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw Error("learning_rate must be non-negative");
  }
  if (decay_steps < 0) throw Error("decay_steps must be non-negative");
  if (decay_factor <= 1.0) throw Error("decay_factor must exceed 1");
  if (max_steps <= 0) throw Error("max_steps must be positive");
  if (batch_size <= 0) throw Error("batch_size must be positive");
  if (stop_loss < 0.0) throw Error("stop_loss must be non-negative");
}

double TrainingConfig::learning_rate_at(int step) const {
  if (decay_steps == 0) return learning_rate;
  return learning_rate / std::pow(decay_factor, static_cast<double>(step / decay_steps));
}

namespace {

const char* activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw Error("unknown activation '" + std::string(name) + "'");
}

nlohmann::json layers_to_json(const Mlp& m) {
  auto arr = nlohmann::json::array();
  for (const DenseLayer& layer : m.layers) {
    arr.push_back({layer.in_dim, layer.out_dim, activation_name(layer.activation)});
  }
  return arr;
}

Mlp layers_from_json(const nlohmann::json& arr) {
  Mlp m;
  for (const auto& entry : arr) {
    m.layers.push_back(make_layer(entry.at(0).get<int>(), entry.at(1).get<int>(),
                                  activation_from_name(entry.at(2).get<std::string>())));
  }
  return m;
}

}  // namespace

Predictor::Predictor(PredictorMode mode, const IntegratorConfig& integrator,
                     std::size_t class_count, std::size_t relation_count, std::mt19937_64& rng) {
  if (class_count == 0) throw Error("predictor needs a nonempty class vocabulary");
  if (relation_count == 0) throw Error("predictor needs a nonempty relation vocabulary");
  mode_ = mode;
  integrator_config_ = integrator;
  class_count_ = class_count;
  relation_count_ = relation_count;

  const int out = static_cast<int>(relation_count);
  if (uses_integrator(mode)) {
    integrator_config_.mode = to_integrator_mode(mode);
    integrator_config_.validate();
    const int k = integrator_config_.feature_dim;
    if (mode == PredictorMode::neighbor) {
      integrator_mlp_ = default_mlp(2 * k, 2 * k);
    } else {
      integrator_mlp_ = default_mlp(k, k);
    }
    classifier_ = default_mlp(integrator_config_.output_dim(), out);
    init_uniform(integrator_mlp_, rng);
  } else {
    classifier_ = default_mlp(2 * static_cast<int>(class_count), out);
  }
  init_uniform(classifier_, rng);
}

ScoringInput Predictor::scoring_input(const KnowledgeGraph& graph, const FeatureTable& features,
                                      const EntityVocabulary& vocab, ClassId a, ClassId b) const {
  if (a < 0 || static_cast<std::size_t>(a) >= class_count_ || b < 0 ||
      static_cast<std::size_t>(b) >= class_count_) {
    throw Error("scoring_input: class id out of range");
  }
  ScoringInput input;
  if (mode_ == PredictorMode::onehot) {
    input.onehot.assign(2 * class_count_, 0.0);
    input.onehot[static_cast<std::size_t>(a)] = 1.0;
    input.onehot[class_count_ + static_cast<std::size_t>(b)] = 1.0;
    return input;
  }
  input.pair =
      build_pair_input(graph, features, vocab.class_node(a), vocab.class_node(b), integrator_config_);
  return input;
}

Vector Predictor::score_from_input(const ScoringInput& input) const {
  switch (mode_) {
    case PredictorMode::onehot:
      return mlp_forward(classifier_, input.onehot);
    case PredictorMode::neighbor: {
      Vector e = mlp_forward(integrator_mlp_, input.pair.neighbor_concat);
      for (double& v : e) v = v > 0.0 ? v : 0.0;
      return mlp_forward(classifier_, e);
    }
    case PredictorMode::path:
    case PredictorMode::fused: {
      const Vector e = path_integrate_from_input(input.pair, integrator_config_, integrator_mlp_);
      return mlp_forward(classifier_, e);
    }
  }
  throw Error("unknown predictor mode");
}

Vector Predictor::score_pair(const KnowledgeGraph& graph, const FeatureTable& features,
                             const EntityVocabulary& vocab, ClassId a, ClassId b) const {
  return score_from_input(scoring_input(graph, features, vocab, a, b));
}

Vector Predictor::score_pair(const KnowledgeGraph& graph, const FeatureTable& features,
                             const EntityVocabulary& vocab, std::string_view a,
                             std::string_view b) const {
  const auto ca = vocab.find_class(a);
  if (!ca) throw Error("unlinked class '" + std::string(a) + "'");
  const auto cb = vocab.find_class(b);
  if (!cb) throw Error("unlinked class '" + std::string(b) + "'");
  return score_pair(graph, features, vocab, *ca, *cb);
}

Predictor::Gradients Predictor::make_gradients() const {
  Gradients g;
  if (uses_integrator(mode_)) g.integrator = make_grad(integrator_mlp_);
  g.classifier = make_grad(classifier_);
  return g;
}

double Predictor::example_loss(const ScoringInput& input, RelationId label) const {
  return softmax_cross_entropy(score_from_input(input), static_cast<int>(label)).loss;
}

double Predictor::example_loss_and_grad(const ScoringInput& input, RelationId label,
                                        Gradients& grad) const {
  switch (mode_) {
    case PredictorMode::onehot: {
      MlpTape tape;
      const Vector logits = mlp_forward(classifier_, input.onehot, tape);
      const SoftmaxLoss ce = softmax_cross_entropy(logits, static_cast<int>(label));
      mlp_backward(classifier_, tape, ce.grad, grad.classifier);
      return ce.loss;
    }
    case PredictorMode::neighbor: {
      MlpTape integrator_tape;
      const Vector pre =
          mlp_forward(integrator_mlp_, input.pair.neighbor_concat, integrator_tape);
      Vector e = pre;
      for (double& v : e) v = v > 0.0 ? v : 0.0;
      MlpTape classifier_tape;
      const Vector logits = mlp_forward(classifier_, e, classifier_tape);
      const SoftmaxLoss ce = softmax_cross_entropy(logits, static_cast<int>(label));
      Vector de = mlp_backward(classifier_, classifier_tape, ce.grad, grad.classifier);
      for (std::size_t i = 0; i < de.size(); ++i) {
        if (pre[i] <= 0.0) de[i] = 0.0;
      }
      mlp_backward(integrator_mlp_, integrator_tape, de, grad.integrator);
      return ce.loss;
    }
    case PredictorMode::path:
    case PredictorMode::fused: {
      PathIntegrateTape integrator_tape;
      const Vector e =
          path_integrate_from_input(input.pair, integrator_config_, integrator_mlp_, integrator_tape);
      MlpTape classifier_tape;
      const Vector logits = mlp_forward(classifier_, e, classifier_tape);
      const SoftmaxLoss ce = softmax_cross_entropy(logits, static_cast<int>(label));
      const Vector de = mlp_backward(classifier_, classifier_tape, ce.grad, grad.classifier);
      path_integrate_backward(input.pair, integrator_config_, integrator_mlp_, integrator_tape, de,
                              grad.integrator);
      return ce.loss;
    }
  }
  throw Error("unknown predictor mode");
}

std::size_t Predictor::parameter_count() const {
  std::size_t n = kgmine::parameter_count(classifier_);
  if (uses_integrator(mode_)) n += kgmine::parameter_count(integrator_mlp_);
  return n;
}

Vector Predictor::flatten_parameters() const {
  Vector out;
  out.reserve(parameter_count());
  if (uses_integrator(mode_)) {
    const Vector vi = kgmine::flatten_parameters(integrator_mlp_);
    out.insert(out.end(), vi.begin(), vi.end());
  }
  const Vector vc = kgmine::flatten_parameters(classifier_);
  out.insert(out.end(), vc.begin(), vc.end());
  return out;
}

void Predictor::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw Error("set_parameters: got " + std::to_string(values.size()) + " values, expected " +
                std::to_string(parameter_count()));
  }
  std::size_t offset = 0;
  if (uses_integrator(mode_)) {
    const std::size_t n = kgmine::parameter_count(integrator_mlp_);
    kgmine::set_parameters(integrator_mlp_, values.subspan(0, n));
    offset = n;
  }
  kgmine::set_parameters(classifier_, values.subspan(offset));
}

Vector Predictor::flatten(const Gradients& grad) const {
  Vector out;
  out.reserve(parameter_count());
  if (uses_integrator(mode_)) {
    const Vector vi = flatten_gradients(grad.integrator);
    out.insert(out.end(), vi.begin(), vi.end());
  }
  const Vector vc = flatten_gradients(grad.classifier);
  out.insert(out.end(), vc.begin(), vc.end());
  return out;
}

std::string Predictor::descriptor() const {
  nlohmann::json j;
  j["format"] = "kgmine-predictor";
  j["version"] = 1;
  j["mode"] = to_string(mode_);
  j["class_count"] = class_count_;
  j["relation_count"] = relation_count_;
  j["feature_dim"] = integrator_config_.feature_dim;
  j["hops"] = integrator_config_.hops;
  j["sort_pool_k"] = integrator_config_.sort_pool_k;
  j["path_cap"] = integrator_config_.path_cap;
  j["integrator_layers"] =
      uses_integrator(mode_) ? layers_to_json(integrator_mlp_) : nlohmann::json::array();
  j["classifier_layers"] = layers_to_json(classifier_);
  return j.dump();
}

Checkpoint Predictor::to_checkpoint() const { return {descriptor(), flatten_parameters()}; }

Predictor Predictor::from_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(checkpoint.descriptor);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint descriptor: ") + e.what());
  }
  if (j.value("format", "") != "kgmine-predictor" || j.value("version", 0) != 1) {
    throw Error("checkpoint descriptor is not a kgmine-predictor v1 descriptor");
  }
  Predictor p;
  p.mode_ = predictor_mode_from_string(j.at("mode").get<std::string>());
  p.class_count_ = j.at("class_count").get<std::size_t>();
  p.relation_count_ = j.at("relation_count").get<std::size_t>();
  p.integrator_config_.feature_dim = j.at("feature_dim").get<int>();
  p.integrator_config_.hops = j.at("hops").get<int>();
  p.integrator_config_.sort_pool_k = j.at("sort_pool_k").get<int>();
  p.integrator_config_.path_cap = j.at("path_cap").get<std::size_t>();
  if (uses_integrator(p.mode_)) {
    p.integrator_config_.mode = to_integrator_mode(p.mode_);
    p.integrator_mlp_ = layers_from_json(j.at("integrator_layers"));
    validate(p.integrator_mlp_);
  }
  p.classifier_ = layers_from_json(j.at("classifier_layers"));
  validate(p.classifier_);
  p.set_parameters(checkpoint.parameters);
  return p;
}

void Predictor::check_compatible(const EntityVocabulary& vocab,
                                 const FeatureTable& features) const {
  if (class_count_ != vocab.class_count()) {
    throw Error("checkpoint was trained with " + std::to_string(class_count_) +
                " classes, vocabulary has " + std::to_string(vocab.class_count()));
  }
  if (relation_count_ != vocab.relation_count()) {
    throw Error("checkpoint was trained with " + std::to_string(relation_count_) +
                " relations, vocabulary has " + std::to_string(vocab.relation_count()));
  }
  if (uses_integrator(mode_) && integrator_config_.feature_dim != features.dim()) {
    throw Error("checkpoint expects feature dimension " +
                std::to_string(integrator_config_.feature_dim) + ", table has " +
                std::to_string(features.dim()));
  }
}

namespace {

double batch_gradients_impl(const Predictor& model, const std::vector<const ScoringInput*>& inputs,
                            const std::vector<RelationId>& labels, Predictor::Gradients& out,
                            bool parallel) {
  if (inputs.size() != labels.size()) throw Error("batch_gradients: inputs/labels size mismatch");
  if (inputs.empty()) throw Error("batch_gradients: empty batch");
  // validate up front: a throw from inside the parallel region would terminate
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i] == nullptr) throw Error("batch_gradients: null input");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= model.relation_count()) {
      throw Error("batch_gradients: label out of range");
    }
  }

  const std::size_t n = inputs.size();
  std::vector<Predictor::Gradients> item_grads(n);
  std::vector<double> item_loss(n, 0.0);

  const auto run_item = [&](std::size_t i) {
    item_grads[i] = model.make_gradients();
    item_loss[i] = model.example_loss_and_grad(*inputs[i], labels[i], item_grads[i]);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      run_item(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) run_item(i);
  }

  // sum in example order: bit-identical no matter how items were scheduled
  out = model.make_gradients();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += item_loss[i];
    if (uses_integrator(model.mode())) add_grad(out.integrator, item_grads[i].integrator);
    add_grad(out.classifier, item_grads[i].classifier);
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (uses_integrator(model.mode())) scale_grad(out.integrator, inv);
  scale_grad(out.classifier, inv);
  return loss * inv;
}

}  // namespace

double batch_gradients(const Predictor& model, const std::vector<const ScoringInput*>& inputs,
                       const std::vector<RelationId>& labels, Predictor::Gradients& out) {
  return batch_gradients_impl(model, inputs, labels, out, /*parallel=*/true);
}

double batch_gradients_serial(const Predictor& model,
                              const std::vector<const ScoringInput*>& inputs,
                              const std::vector<RelationId>& labels, Predictor::Gradients& out) {
  return batch_gradients_impl(model, inputs, labels, out, /*parallel=*/false);
}

Predictor train_predictor(const TripletDataset& data, const EntityVocabulary& vocab,
                          const KnowledgeGraph& graph, const FeatureTable& features,
                          const PredictorConfig& config, TrainLog* log) {
  config.training.validate();
  if (!data.has_split(Split::train)) throw Error("train_predictor: empty training split");
  if (uses_integrator(config.mode) && config.integrator.feature_dim != features.dim()) {
    throw Error("train_predictor: integrator feature_dim " +
                std::to_string(config.integrator.feature_dim) +
                " does not match the feature table (" + std::to_string(features.dim()) + ")");
  }

  // training examples in dataset order
  std::vector<Triplet> examples;
  for (const Scene& scene : data.scenes()) {
    if (scene.split != Split::train) continue;
    for (const Triplet& t : scene.triplets) examples.push_back(t);
  }

  std::mt19937_64 rng(config.training.seed);
  Predictor model(config.mode, config.integrator, vocab.class_count(), vocab.relation_count(), rng);

  // class-pair inputs never change during training; build each distinct one once
  std::unordered_map<std::uint64_t, std::size_t> input_index;
  std::vector<std::pair<ClassId, ClassId>> distinct_pairs;
  std::vector<std::size_t> example_input(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(examples[i].subject)) << 32) |
        static_cast<std::uint32_t>(examples[i].object);
    const auto [it, inserted] = input_index.emplace(key, distinct_pairs.size());
    if (inserted) distinct_pairs.emplace_back(examples[i].subject, examples[i].object);
    example_input[i] = it->second;
  }
  std::vector<ScoringInput> inputs(distinct_pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(distinct_pairs.size()); ++i) {
    const auto& [a, b] = distinct_pairs[static_cast<std::size_t>(i)];
    inputs[static_cast<std::size_t>(i)] = model.scoring_input(graph, features, vocab, a, b);
  }

  TrainState state{model.flatten_parameters(), config.training.learning_rate,
                   config.training.seed, 0};
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // trigger a shuffle on first use

  std::vector<const ScoringInput*> batch_inputs;
  std::vector<RelationId> batch_labels;
  const std::size_t batch_size =
      std::min<std::size_t>(static_cast<std::size_t>(config.training.batch_size), examples.size());

  for (int step = 0; step < config.training.max_steps; ++step) {
    batch_inputs.clear();
    batch_labels.clear();
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t ei = order[cursor++];
      batch_inputs.push_back(&inputs[example_input[ei]]);
      batch_labels.push_back(examples[ei].relation);
    }

    model.set_parameters(state.parameters);
    Predictor::Gradients grads = model.make_gradients();
    const double loss = batch_gradients(model, batch_inputs, batch_labels, grads);
    if (!std::isfinite(loss)) {
      throw Error("train_predictor: non-finite loss at step " + std::to_string(step));
    }
    state.learning_rate = config.training.learning_rate_at(step);
    state = sgd_step(std::move(state), model.flatten(grads));
    if (log != nullptr) log->entries.push_back({step, loss, state.learning_rate});
    if (config.training.stop_loss > 0.0 && loss < config.training.stop_loss) break;
  }
  model.set_parameters(state.parameters);
  return model;
}

namespace {

struct SceneTally {
  // indexed by K position
  std::vector<std::uint64_t> zs_gc, zs_ng, nz_gc, nz_ng;
  std::uint64_t zs_total = 0;
  std::uint64_t nz_total = 0;
  // zero-shot per-relation graph-constraint recalls
  std::map<RelationId, std::pair<std::vector<std::uint64_t>, std::uint64_t>> relations;
};

}  // namespace

RecallReport evaluate_with_scorer(const PairScorer& scorer, const EntityVocabulary& vocab,
                                  const TripletDataset& data, const ZeroShotIndex& index,
                                  const std::vector<int>& ks, bool parallel) {
  if (ks.empty()) throw Error("evaluate: no K values given");
  for (const int k : ks) {
    if (k <= 0) throw Error("evaluate: K must be positive");
  }
  if (!data.has_split(Split::test)) throw Error("evaluate: empty test split");
  if (index.flags.size() != data.scenes().size()) {
    throw Error("evaluate: zero-shot index does not match the dataset");
  }
  for (std::size_t si = 0; si < data.scenes().size(); ++si) {
    if (data.scenes()[si].split == Split::test &&
        index.flags[si].size() != data.scenes()[si].triplets.size()) {
      throw Error("evaluate: zero-shot index does not match scene '" + data.scenes()[si].id + "'");
    }
  }
  const std::size_t relation_count = vocab.relation_count();
  if (relation_count == 0) throw Error("evaluate: empty relation vocabulary");

  // score every distinct ordered test pair once
  std::unordered_map<std::uint64_t, std::size_t> pair_index;
  std::vector<std::pair<ClassId, ClassId>> pairs;
  const auto pair_key = [](ClassId a, ClassId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (const Scene& scene : data.scenes()) {
    if (scene.split != Split::test) continue;
    for (const Triplet& t : scene.triplets) {
      if (pair_index.emplace(pair_key(t.subject, t.object), pairs.size()).second) {
        pairs.emplace_back(t.subject, t.object);
      }
    }
  }

  std::vector<Vector> pair_scores(pairs.size());
  std::string scorer_error;
  const auto score_one = [&](std::size_t i) {
    // exceptions must not unwind out of the parallel region
    try {
      pair_scores[i] = scorer(pairs[i].first, pairs[i].second);
      if (pair_scores[i].size() != relation_count) {
        throw Error("scorer returned " + std::to_string(pair_scores[i].size()) +
                    " scores, expected " + std::to_string(relation_count));
      }
    } catch (const std::exception& e) {
#pragma omp critical(kgmine_eval_error)
      if (scorer_error.empty()) scorer_error = e.what();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
      score_one(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < pairs.size(); ++i) score_one(i);
  }
  if (!scorer_error.empty()) throw Error("evaluate: " + scorer_error);

  const std::size_t nk = ks.size();
  std::vector<SceneTally> tallies(data.scenes().size());

  const auto tally_scene = [&](std::size_t si) {
    const Scene& scene = data.scenes()[si];
    if (scene.split != Split::test || scene.triplets.empty()) return;
    SceneTally& tally = tallies[si];
    tally.zs_gc.assign(nk, 0);
    tally.zs_ng.assign(nk, 0);
    tally.nz_gc.assign(nk, 0);
    tally.nz_ng.assign(nk, 0);

    // ordered pairs in first-appearance order
    std::unordered_map<std::uint64_t, std::size_t> local_index;
    std::vector<std::size_t> local_to_global;
    std::vector<std::size_t> triplet_pair(scene.triplets.size());
    for (std::size_t ti = 0; ti < scene.triplets.size(); ++ti) {
      const Triplet& t = scene.triplets[ti];
      const auto key = pair_key(t.subject, t.object);
      const auto [it, inserted] = local_index.emplace(key, local_to_global.size());
      if (inserted) local_to_global.push_back(pair_index.at(key));
      triplet_pair[ti] = it->second;
    }

    // full candidate ranking: (pair p, relation r) by score desc; candidates
    // are generated in (p, r) order, so a stable sort yields the documented
    // tie-breaking for free
    const std::size_t p_count = local_to_global.size();
    std::vector<std::uint32_t> order(p_count * relation_count);
    std::iota(order.begin(), order.end(), 0u);
    const auto score_of = [&](std::uint32_t cand) {
      return pair_scores[local_to_global[cand / relation_count]][cand % relation_count];
    };
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
      return score_of(x) > score_of(y);
    });
    std::vector<std::uint32_t> rank_of(order.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r;

    // top-scoring relation per pair, ties to the smallest relation id
    std::vector<std::size_t> pair_top(p_count, 0);
    for (std::size_t p = 0; p < p_count; ++p) {
      const Vector& scores = pair_scores[local_to_global[p]];
      std::size_t best = 0;
      for (std::size_t r = 1; r < relation_count; ++r) {
        if (scores[r] > scores[best]) best = r;
      }
      pair_top[p] = best;
    }

    for (std::size_t ti = 0; ti < scene.triplets.size(); ++ti) {
      const Triplet& t = scene.triplets[ti];
      const std::size_t p = triplet_pair[ti];
      const std::uint32_t rank =
          rank_of[static_cast<std::uint32_t>(p * relation_count + static_cast<std::size_t>(t.relation))];
      const bool pair_best = pair_top[p] == static_cast<std::size_t>(t.relation);
      const bool zero_shot = index.flags[si].size() > ti && index.flags[si][ti];

      if (zero_shot) {
        ++tally.zs_total;
      } else {
        ++tally.nz_total;
      }
      auto& rel_entry = tally.relations[t.relation];
      if (zero_shot) {
        if (rel_entry.first.empty()) rel_entry.first.assign(nk, 0);
        ++rel_entry.second;
      }
      for (std::size_t ki = 0; ki < nk; ++ki) {
        const bool ng = rank < static_cast<std::uint32_t>(ks[ki]);
        const bool gc = ng && pair_best;
        if (zero_shot) {
          tally.zs_ng[ki] += ng;
          tally.zs_gc[ki] += gc;
          rel_entry.first[ki] += gc;
        } else {
          tally.nz_ng[ki] += ng;
          tally.nz_gc[ki] += gc;
        }
      }
    }
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(data.scenes().size()); ++si) {
      tally_scene(static_cast<std::size_t>(si));
    }
  } else {
    for (std::size_t si = 0; si < data.scenes().size(); ++si) tally_scene(si);
  }

  // deterministic merge in scene order
  RecallReport report;
  report.ks = ks;
  std::vector<std::uint64_t> zs_gc(nk, 0), zs_ng(nk, 0), nz_gc(nk, 0), nz_ng(nk, 0);
  std::uint64_t zs_total = 0, nz_total = 0;
  std::vector<double> scene_mean(nk, 0.0);
  std::uint64_t scenes_with_zs = 0;
  std::map<RelationId, std::pair<std::vector<std::uint64_t>, std::uint64_t>> relations;
  for (const SceneTally& tally : tallies) {
    if (tally.zs_gc.empty() && tally.zs_total == 0 && tally.nz_total == 0) continue;
    zs_total += tally.zs_total;
    nz_total += tally.nz_total;
    for (std::size_t ki = 0; ki < nk; ++ki) {
      zs_gc[ki] += tally.zs_gc[ki];
      zs_ng[ki] += tally.zs_ng[ki];
      nz_gc[ki] += tally.nz_gc[ki];
      nz_ng[ki] += tally.nz_ng[ki];
    }
    if (tally.zs_total > 0) {
      ++scenes_with_zs;
      for (std::size_t ki = 0; ki < nk; ++ki) {
        scene_mean[ki] +=
            static_cast<double>(tally.zs_gc[ki]) / static_cast<double>(tally.zs_total);
      }
    }
    for (const auto& [relation, entry] : tally.relations) {
      if (entry.second == 0) continue;
      auto& acc = relations[relation];
      if (acc.first.empty()) acc.first.assign(nk, 0);
      for (std::size_t ki = 0; ki < nk; ++ki) acc.first[ki] += entry.first[ki];
      acc.second += entry.second;
    }
  }

  const auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  report.zero_shot_total = zs_total;
  report.nonzero_total = nz_total;
  for (std::size_t ki = 0; ki < nk; ++ki) {
    const int k = ks[ki];
    report.zR[k] = ratio(zs_gc[ki], zs_total);
    report.ng_zR[k] = ratio(zs_ng[ki], zs_total);
    report.nonzero_R[k] = ratio(nz_gc[ki], nz_total);
    report.ng_nonzero_R[k] = ratio(nz_ng[ki], nz_total);
    report.overall_R[k] = ratio(zs_gc[ki] + nz_gc[ki], zs_total + nz_total);
    report.ng_overall_R[k] = ratio(zs_ng[ki] + nz_ng[ki], zs_total + nz_total);
    report.zR_scene_mean[k] =
        scenes_with_zs == 0 ? 0.0 : scene_mean[ki] / static_cast<double>(scenes_with_zs);
  }
  for (const auto& [relation, entry] : relations) {
    auto& out = report.per_relation[vocab.relation_name(relation)];
    for (std::size_t ki = 0; ki < nk; ++ki) {
      out[ks[ki]] = ratio(entry.first[ki], entry.second);
    }
  }
  for (std::size_t ki = 0; ki < nk; ++ki) {
    const int k = ks[ki];
    double sum = 0.0;
    for (const auto& [relation, entry] : relations) {
      sum += ratio(entry.first[ki], entry.second);
    }
    report.mean_zR[k] = relations.empty() ? 0.0 : sum / static_cast<double>(relations.size());
  }
  return report;
}

namespace {

RecallReport evaluate_impl(const Predictor& model, const KnowledgeGraph& graph,
                           const FeatureTable& features, const EntityVocabulary& vocab,
                           const TripletDataset& data, const ZeroShotIndex& index,
                           const std::vector<int>& ks, bool parallel) {
  model.check_compatible(vocab, features);
  const PairScorer scorer = [&](ClassId a, ClassId b) {
    return model.score_pair(graph, features, vocab, a, b);
  };
  return evaluate_with_scorer(scorer, vocab, data, index, ks, parallel);
}

}  // namespace

RecallReport evaluate(const Predictor& model, const KnowledgeGraph& graph,
                      const FeatureTable& features, const EntityVocabulary& vocab,
                      const TripletDataset& data, const ZeroShotIndex& index,
                      const std::vector<int>& ks) {
  return evaluate_impl(model, graph, features, vocab, data, index, ks, /*parallel=*/true);
}

RecallReport evaluate_serial(const Predictor& model, const KnowledgeGraph& graph,
                             const FeatureTable& features, const EntityVocabulary& vocab,
                             const TripletDataset& data, const ZeroShotIndex& index,
                             const std::vector<int>& ks) {
  return evaluate_impl(model, graph, features, vocab, data, index, ks, /*parallel=*/false);
}

std::string recall_report_to_json(const RecallReport& report) {
  nlohmann::json j;
  j["ks"] = report.ks;
  const auto emit = [](const std::map<int, double>& values) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : values) out[std::to_string(k)] = v;
    return out;
  };
  j["zR"] = emit(report.zR);
  j["ng_zR"] = emit(report.ng_zR);
  j["nonzero_R"] = emit(report.nonzero_R);
  j["ng_nonzero_R"] = emit(report.ng_nonzero_R);
  j["overall_R"] = emit(report.overall_R);
  j["ng_overall_R"] = emit(report.ng_overall_R);
  j["mean_zR"] = emit(report.mean_zR);
  j["zR_scene_mean"] = emit(report.zR_scene_mean);
  auto& per_relation = j["per_relation"] = nlohmann::json::object();
  for (const auto& [name, values] : report.per_relation) per_relation[name] = emit(values);
  j["zero_shot_total"] = report.zero_shot_total;
  j["nonzero_total"] = report.nonzero_total;
  return j.dump(2) + "\n";
}

void write_recall_report(const RecallReport& report, const std::string& path) {
  write_file_atomic(path, recall_report_to_json(report));
}

}  // namespace kgmine
