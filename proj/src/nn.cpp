#include "kgmine/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kgmine {

DenseLayer make_layer(int in_dim, int out_dim, Activation activation) {
  if (in_dim <= 0 || out_dim <= 0) throw Error("layer dimensions must be positive");
  DenseLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.weight.assign(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim), 0.0);
  layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
  layer.activation = activation;
  return layer;
}

int Mlp::input_dim() const {
  if (layers.empty()) throw Error("empty MLP");
  return layers.front().in_dim;
}

int Mlp::output_dim() const {
  if (layers.empty()) throw Error("empty MLP");
  return layers.back().out_dim;
}

Mlp default_mlp(int in_dim, int out_dim) {
  Mlp m;
  m.layers.push_back(make_layer(in_dim, in_dim, Activation::relu));
  m.layers.push_back(make_layer(in_dim, out_dim, Activation::identity));
  return m;
}

void validate(const Mlp& m) {
  if (m.layers.empty()) throw Error("empty MLP");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const DenseLayer& layer = m.layers[i];
    if (layer.weight.size() !=
        static_cast<std::size_t>(layer.in_dim) * static_cast<std::size_t>(layer.out_dim)) {
      throw Error("layer " + std::to_string(i) + " weight shape mismatch");
    }
    if (layer.bias.size() != static_cast<std::size_t>(layer.out_dim)) {
      throw Error("layer " + std::to_string(i) + " bias shape mismatch");
    }
    if (i > 0 && m.layers[i - 1].out_dim != layer.in_dim) {
      throw Error("layer " + std::to_string(i) + " input does not chain");
    }
  }
}

std::size_t parameter_count(const Mlp& m) {
  std::size_t n = 0;
  for (const DenseLayer& layer : m.layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

void init_uniform(Mlp& m, std::mt19937_64& rng) {
  for (DenseLayer& layer : m.layers) {
    const double s = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& w : layer.weight) w = dist(rng);
    for (double& b : layer.bias) b = dist(rng);
  }
}

namespace {

void layer_forward(const DenseLayer& layer, const Vector& x, Vector& pre, Vector& out) {
  pre.assign(static_cast<std::size_t>(layer.out_dim), 0.0);
  for (int o = 0; o < layer.out_dim; ++o) {
    double acc = layer.bias[static_cast<std::size_t>(o)];
    const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in_dim;
    for (int i = 0; i < layer.in_dim; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
    pre[static_cast<std::size_t>(o)] = acc;
  }
  out = pre;
  if (layer.activation == Activation::relu) {
    for (double& v : out) v = v > 0.0 ? v : 0.0;
  }
}

}  // namespace

Vector mlp_forward(const Mlp& m, const Vector& x) {
  if (static_cast<int>(x.size()) != m.input_dim()) {
    throw Error("mlp_forward: input has " + std::to_string(x.size()) + " values, expected " +
                std::to_string(m.input_dim()));
  }
  Vector cur = x;
  Vector pre;
  Vector out;
  for (const DenseLayer& layer : m.layers) {
    layer_forward(layer, cur, pre, out);
    cur = out;
  }
  return cur;
}

Vector mlp_forward(const Mlp& m, const Vector& x, MlpTape& tape) {
  if (static_cast<int>(x.size()) != m.input_dim()) {
    throw Error("mlp_forward: input has " + std::to_string(x.size()) + " values, expected " +
                std::to_string(m.input_dim()));
  }
  tape.inputs.clear();
  tape.preacts.clear();
  tape.inputs.reserve(m.layers.size());
  tape.preacts.reserve(m.layers.size());
  Vector cur = x;
  for (const DenseLayer& layer : m.layers) {
    tape.inputs.push_back(cur);
    Vector pre;
    Vector out;
    layer_forward(layer, cur, pre, out);
    tape.preacts.push_back(std::move(pre));
    cur = std::move(out);
  }
  return cur;
}

MlpGrad make_grad(const Mlp& m) {
  MlpGrad g;
  g.weight.reserve(m.layers.size());
  g.bias.reserve(m.layers.size());
  for (const DenseLayer& layer : m.layers) {
    g.weight.emplace_back(layer.weight.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void scale_grad(MlpGrad& g, double factor) {
  for (auto& w : g.weight) {
    for (double& v : w) v *= factor;
  }
  for (auto& b : g.bias) {
    for (double& v : b) v *= factor;
  }
}

void add_grad(MlpGrad& into, const MlpGrad& from) {
  if (into.weight.size() != from.weight.size()) throw Error("gradient shape mismatch");
  for (std::size_t l = 0; l < into.weight.size(); ++l) {
    for (std::size_t i = 0; i < into.weight[l].size(); ++i) into.weight[l][i] += from.weight[l][i];
    for (std::size_t i = 0; i < into.bias[l].size(); ++i) into.bias[l][i] += from.bias[l][i];
  }
}

Vector mlp_backward(const Mlp& m, const MlpTape& tape, const Vector& upstream, MlpGrad& grad) {
  if (tape.inputs.size() != m.layers.size()) throw Error("mlp_backward: tape does not match MLP");
  if (static_cast<int>(upstream.size()) != m.output_dim()) {
    throw Error("mlp_backward: upstream has " + std::to_string(upstream.size()) +
                " values, expected " + std::to_string(m.output_dim()));
  }
  Vector delta = upstream;
  for (std::size_t li = m.layers.size(); li-- > 0;) {
    const DenseLayer& layer = m.layers[li];
    const Vector& x = tape.inputs[li];
    const Vector& pre = tape.preacts[li];

    if (layer.activation == Activation::relu) {
      for (int o = 0; o < layer.out_dim; ++o) {
        if (pre[static_cast<std::size_t>(o)] <= 0.0) delta[static_cast<std::size_t>(o)] = 0.0;
      }
    }
    Vector& wgrad = grad.weight[li];
    Vector& bgrad = grad.bias[li];
    Vector dx(static_cast<std::size_t>(layer.in_dim), 0.0);
    for (int o = 0; o < layer.out_dim; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      bgrad[static_cast<std::size_t>(o)] += d;
      const std::size_t row = static_cast<std::size_t>(o) * layer.in_dim;
      for (int i = 0; i < layer.in_dim; ++i) {
        wgrad[row + static_cast<std::size_t>(i)] += d * x[static_cast<std::size_t>(i)];
        dx[static_cast<std::size_t>(i)] += d * layer.weight[row + static_cast<std::size_t>(i)];
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

std::pair<MlpGrad, Vector> mlp_backward(const Mlp& m, const Vector& x, const Vector& upstream) {
  MlpTape tape;
  mlp_forward(m, x, tape);
  MlpGrad grad = make_grad(m);
  Vector dx = mlp_backward(m, tape, upstream, grad);
  return {std::move(grad), std::move(dx)};
}

Vector flatten_parameters(const Mlp& m) {
  Vector out;
  out.reserve(parameter_count(m));
  for (const DenseLayer& layer : m.layers) {
    out.insert(out.end(), layer.weight.begin(), layer.weight.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void set_parameters(Mlp& m, std::span<const double> values) {
  if (values.size() != parameter_count(m)) {
    throw Error("set_parameters: got " + std::to_string(values.size()) + " values, expected " +
                std::to_string(parameter_count(m)));
  }
  std::size_t offset = 0;
  for (DenseLayer& layer : m.layers) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), layer.weight.size(),
                layer.weight.begin());
    offset += layer.weight.size();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), layer.bias.size(),
                layer.bias.begin());
    offset += layer.bias.size();
  }
}

Vector flatten_gradients(const MlpGrad& g) {
  Vector out;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    out.insert(out.end(), g.weight[l].begin(), g.weight[l].end());
    out.insert(out.end(), g.bias[l].begin(), g.bias[l].end());
  }
  return out;
}

Vector softmax(const Vector& logits) {
  if (logits.empty()) throw Error("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

SoftmaxLoss softmax_cross_entropy(const Vector& logits, int label) {
  if (logits.empty()) throw Error("softmax_cross_entropy: empty logits");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (const double v : logits) sum += std::exp(v - m);
  const double log_sum_exp = m + std::log(sum);

  SoftmaxLoss result;
  result.loss = log_sum_exp - logits[static_cast<std::size_t>(label)];
  result.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    result.grad[i] = std::exp(logits[i] - log_sum_exp);
  }
  result.grad[static_cast<std::size_t>(label)] -= 1.0;
  return result;
}

TrainState sgd_step(TrainState state, std::span<const double> gradients) {
  if (gradients.size() != state.parameters.size()) {
    throw Error("sgd_step: gradient length " + std::to_string(gradients.size()) +
                " does not match parameter length " + std::to_string(state.parameters.size()));
  }
  for (const double g : gradients) {
    if (!std::isfinite(g)) {
      throw Error("sgd_step: non-finite gradient at step " + std::to_string(state.step_count));
    }
  }
  for (std::size_t i = 0; i < state.parameters.size(); ++i) {
    state.parameters[i] -= state.learning_rate * gradients[i];
  }
  ++state.step_count;
  return state;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  if (checkpoint.descriptor.find('\n') != std::string::npos) {
    throw Error("checkpoint descriptor must be a single line");
  }
  std::string out = "kgmine-checkpoint 1\n";
  out += checkpoint.descriptor;
  out += '\n';
  out += std::to_string(checkpoint.parameters.size());
  out += '\n';
  char buf[64];
  for (const double v : checkpoint.parameters) {
    std::snprintf(buf, sizeof(buf), "%a", v);
    out += buf;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "kgmine-checkpoint 1") {
    throw Error("not a kgmine checkpoint: " + path);
  }
  Checkpoint ckpt;
  if (!std::getline(in, ckpt.descriptor)) throw Error("checkpoint missing descriptor: " + path);
  if (!std::getline(in, line)) throw Error("checkpoint missing parameter count: " + path);
  const std::size_t count = std::strtoull(line.c_str(), nullptr, 10);
  ckpt.parameters.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error("checkpoint truncated: " + path);
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw Error("checkpoint has a malformed value: " + path);
    ckpt.parameters.push_back(v);
  }
  return ckpt;
}

}  // namespace kgmine
