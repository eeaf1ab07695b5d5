#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgmine/common.hpp"

namespace kgmine {

enum class Activation { identity, relu };

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  Vector weight;  // out_dim x in_dim, row-major
  Vector bias;    // out_dim
  Activation activation = Activation::identity;
};

DenseLayer make_layer(int in_dim, int out_dim, Activation activation);

struct Mlp {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
};

/// The convention used for every MLP in this project unless a caller builds
/// its own: one hidden layer as wide as the input with relu, then a linear
/// output layer.
Mlp default_mlp(int in_dim, int out_dim);

/// Throws unless layer dimensions chain and the layer list is nonempty.
void validate(const Mlp& m);

std::size_t parameter_count(const Mlp& m);

/// Seeded uniform init in [-s, s] with s = 1/sqrt(fan_in), layer by layer,
/// weights before bias.
void init_uniform(Mlp& m, std::mt19937_64& rng);

Vector mlp_forward(const Mlp& m, const Vector& x);

/// Saved intermediates of one forward pass, consumed by the backward pass.
struct MlpTape {
  std::vector<Vector> inputs;   // input of each layer
  std::vector<Vector> preacts;  // pre-activation of each layer
};

Vector mlp_forward(const Mlp& m, const Vector& x, MlpTape& tape);

struct MlpGrad {
  std::vector<Vector> weight;
  std::vector<Vector> bias;
};

MlpGrad make_grad(const Mlp& m);
void scale_grad(MlpGrad& g, double factor);
void add_grad(MlpGrad& into, const MlpGrad& from);

/// Reverse-mode pass. Accumulates parameter gradients into `grad` and returns
/// the gradient with respect to the input.
Vector mlp_backward(const Mlp& m, const MlpTape& tape, const Vector& upstream, MlpGrad& grad);

/// Convenience form running its own forward pass.
std::pair<MlpGrad, Vector> mlp_backward(const Mlp& m, const Vector& x, const Vector& upstream);

Vector flatten_parameters(const Mlp& m);
void set_parameters(Mlp& m, std::span<const double> values);
Vector flatten_gradients(const MlpGrad& g);

Vector softmax(const Vector& logits);

struct SoftmaxLoss {
  double loss = 0.0;
  Vector grad;  // softmax(logits) - one_hot(label)
};

/// Numerically stable log-sum-exp cross entropy.
SoftmaxLoss softmax_cross_entropy(const Vector& logits, int label);

/// Flattened view of all trainable values plus the optimizer scalars.
struct TrainState {
  Vector parameters;
  double learning_rate = 0.0;
  std::uint64_t rng_seed = 0;
  std::int64_t step_count = 0;
};

/// parameters <- parameters - learning_rate * gradients. Throws loudly on a
/// non-finite gradient so training never silently diverges.
TrainState sgd_step(TrainState state, std::span<const double> gradients);

struct Checkpoint {
  std::string descriptor;  // single-line architecture descriptor
  Vector parameters;
};

/// Versioned textual dump; parameter values round-trip exactly (hexfloat).
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kgmine
