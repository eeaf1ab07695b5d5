#include "kgmine/integrators.hpp"

#include <algorithm>
#include <numeric>

namespace kgmine {

const char* to_string(IntegratorMode mode) {
  switch (mode) {
    case IntegratorMode::neighbor:
      return "neighbor";
    case IntegratorMode::path:
      return "path";
    case IntegratorMode::fused:
      return "fused";
  }
  throw Error("unknown integrator mode");
}

IntegratorMode integrator_mode_from_string(std::string_view name) {
  if (name == "neighbor") return IntegratorMode::neighbor;
  if (name == "path") return IntegratorMode::path;
  if (name == "fused") return IntegratorMode::fused;
  throw Error("unknown integrator mode '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (hops < 1 || hops > kMaxHopCeiling) {
    throw Error("integrator hops must be in 1.." + std::to_string(kMaxHopCeiling));
  }
  if (sort_pool_k < 1) throw Error("sort_pool_k must be positive");
  if (feature_dim < 1) throw Error("feature_dim must be positive");
  if (path_cap == 0) throw Error("path_cap must be positive");
}

int IntegratorConfig::output_dim() const {
  if (mode == IntegratorMode::neighbor) return 2 * feature_dim;
  return hops * sort_pool_k * feature_dim;
}

namespace {

Vector concat_neighbor_embeddings(const KnowledgeGraph& graph, const FeatureTable& features,
                                  NodeId a, NodeId b) {
  Vector ea = neighbor_embedding(graph, features, a);
  const Vector eb = neighbor_embedding(graph, features, b);
  ea.insert(ea.end(), eb.begin(), eb.end());
  return ea;
}

}  // namespace

Vector neighbor_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                          NodeId b, const Mlp& mlp) {
  Vector out = mlp_forward(mlp, concat_neighbor_embeddings(graph, features, a, b));
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return out;
}

Vector neighbor_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                          NodeId b, const Mlp& mlp, NeighborTape& tape) {
  tape.input = concat_neighbor_embeddings(graph, features, a, b);
  tape.mlp_out = mlp_forward(mlp, tape.input, tape.mlp);
  Vector out = tape.mlp_out;
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return out;
}

void neighbor_integrate_backward(const Mlp& mlp, const NeighborTape& tape, const Vector& upstream,
                                 MlpGrad& grad) {
  Vector masked = upstream;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (tape.mlp_out[i] <= 0.0) masked[i] = 0.0;
  }
  mlp_backward(mlp, tape.mlp, masked, grad);
}

namespace {

void check_message_pass_args(const PathGraph& g, const std::vector<Vector>& init, const Mlp& mlp,
                             int iterations) {
  if (iterations != g.hop_count) {
    throw Error("message_pass: iterations (" + std::to_string(iterations) +
                ") must equal the graph hop count (" + std::to_string(g.hop_count) + ")");
  }
  if (init.size() != g.members.size()) {
    throw Error("message_pass: need one initial state per member");
  }
  if (mlp.input_dim() != mlp.output_dim()) {
    throw Error("message_pass: edge MLP must map states to the same dimension");
  }
  for (const Vector& row : init) {
    if (static_cast<int>(row.size()) != mlp.input_dim()) {
      throw Error("message_pass: initial state width does not match the edge MLP");
    }
  }
}

}  // namespace

std::vector<Vector> message_pass(const PathGraph& g, const std::vector<Vector>& init,
                                 const Mlp& edge_mlp, int iterations) {
  check_message_pass_args(g, init, edge_mlp, iterations);
  std::vector<Vector> states = init;
  std::vector<Vector> messages(states.size());
  for (int t = 0; t < iterations; ++t) {
    for (std::size_t u = 0; u < states.size(); ++u) {
      messages[u] = mlp_forward(edge_mlp, states[u]);
    }
    std::vector<Vector> next = states;
    for (const auto& [u, v] : g.edges) {
      Vector& sv = next[static_cast<std::size_t>(v)];
      Vector& su = next[static_cast<std::size_t>(u)];
      const Vector& mu = messages[static_cast<std::size_t>(u)];
      const Vector& mv = messages[static_cast<std::size_t>(v)];
      for (std::size_t i = 0; i < sv.size(); ++i) {
        sv[i] += mu[i];
        su[i] += mv[i];
      }
    }
    states = std::move(next);
  }
  return states;
}

std::vector<Vector> message_pass(const PathGraph& g, const std::vector<Vector>& init,
                                 const Mlp& edge_mlp, int iterations, MessagePassTape& tape) {
  check_message_pass_args(g, init, edge_mlp, iterations);
  tape.states.clear();
  tape.mlp_tapes.clear();
  tape.states.push_back(init);
  for (int t = 0; t < iterations; ++t) {
    const std::vector<Vector>& prev = tape.states.back();
    std::vector<MlpTape> step_tapes(prev.size());
    std::vector<Vector> messages(prev.size());
    for (std::size_t u = 0; u < prev.size(); ++u) {
      messages[u] = mlp_forward(edge_mlp, prev[u], step_tapes[u]);
    }
    std::vector<Vector> next = prev;
    for (const auto& [u, v] : g.edges) {
      Vector& sv = next[static_cast<std::size_t>(v)];
      Vector& su = next[static_cast<std::size_t>(u)];
      const Vector& mu = messages[static_cast<std::size_t>(u)];
      const Vector& mv = messages[static_cast<std::size_t>(v)];
      for (std::size_t i = 0; i < sv.size(); ++i) {
        sv[i] += mu[i];
        su[i] += mv[i];
      }
    }
    tape.mlp_tapes.push_back(std::move(step_tapes));
    tape.states.push_back(std::move(next));
  }
  return tape.states.back();
}

std::vector<Vector> message_pass_backward(const PathGraph& g, const Mlp& edge_mlp,
                                          const MessagePassTape& tape,
                                          const std::vector<Vector>& upstream, MlpGrad& grad) {
  if (tape.states.empty() || upstream.size() != tape.states.back().size()) {
    throw Error("message_pass_backward: upstream does not match the tape");
  }
  std::vector<Vector> d_states = upstream;
  const int iterations = static_cast<int>(tape.mlp_tapes.size());
  for (int t = iterations; t-- > 0;) {
    // message gradient of u: the summed state gradients of its neighbors
    std::vector<Vector> d_msg(d_states.size(),
                              Vector(d_states.empty() ? 0 : d_states.front().size(), 0.0));
    for (const auto& [u, v] : g.edges) {
      Vector& du = d_msg[static_cast<std::size_t>(u)];
      Vector& dv = d_msg[static_cast<std::size_t>(v)];
      const Vector& gv = d_states[static_cast<std::size_t>(v)];
      const Vector& gu = d_states[static_cast<std::size_t>(u)];
      for (std::size_t i = 0; i < du.size(); ++i) {
        du[i] += gv[i];
        dv[i] += gu[i];
      }
    }
    // identity carry plus the MLP input gradient
    std::vector<Vector> d_prev = d_states;
    for (std::size_t u = 0; u < d_states.size(); ++u) {
      const Vector dx =
          mlp_backward(edge_mlp, tape.mlp_tapes[static_cast<std::size_t>(t)][u], d_msg[u], grad);
      for (std::size_t i = 0; i < dx.size(); ++i) d_prev[u][i] += dx[i];
    }
    d_states = std::move(d_prev);
  }
  return d_states;
}

Vector sort_pool(const std::vector<Vector>& rows, int width, int top_k) {
  SortPoolPlan plan;
  return sort_pool(rows, width, top_k, plan);
}

Vector sort_pool(const std::vector<Vector>& rows, int width, int top_k, SortPoolPlan& plan) {
  if (width < 1) throw Error("sort_pool: width must be positive");
  if (top_k < 1) throw Error("sort_pool: top_k must be positive");
  for (const Vector& row : rows) {
    if (static_cast<int>(row.size()) != width) throw Error("sort_pool: ragged rows");
  }

  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t last = static_cast<std::size_t>(width) - 1;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    const double cx = rows[static_cast<std::size_t>(x)][last];
    const double cy = rows[static_cast<std::size_t>(y)][last];
    if (cx != cy) return cx > cy;
    return x < y;
  });

  const std::size_t kept = std::min<std::size_t>(static_cast<std::size_t>(top_k), rows.size());
  plan.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kept));
  plan.n = static_cast<int>(rows.size());
  plan.width = width;
  plan.top_k = top_k;

  Vector out(static_cast<std::size_t>(top_k) * static_cast<std::size_t>(width), 0.0);
  for (std::size_t r = 0; r < kept; ++r) {
    const Vector& row = rows[static_cast<std::size_t>(plan.selected[r])];
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

std::vector<Vector> sort_pool_backward(const SortPoolPlan& plan, const Vector& upstream) {
  if (upstream.size() !=
      static_cast<std::size_t>(plan.top_k) * static_cast<std::size_t>(plan.width)) {
    throw Error("sort_pool_backward: upstream does not match the plan");
  }
  std::vector<Vector> d_rows(static_cast<std::size_t>(plan.n),
                             Vector(static_cast<std::size_t>(plan.width), 0.0));
  for (std::size_t r = 0; r < plan.selected.size(); ++r) {
    Vector& row = d_rows[static_cast<std::size_t>(plan.selected[r])];
    const std::size_t offset = r * static_cast<std::size_t>(plan.width);
    for (int i = 0; i < plan.width; ++i) {
      row[static_cast<std::size_t>(i)] += upstream[offset + static_cast<std::size_t>(i)];
    }
  }
  return d_rows;
}

PairInput build_pair_input(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                           NodeId b, const IntegratorConfig& config) {
  config.validate();
  graph.require_node(a);
  graph.require_node(b);
  if (features.dim() != config.feature_dim) {
    throw Error("feature table dimension does not match the integrator config");
  }

  PairInput input;
  if (config.mode == IntegratorMode::neighbor) {
    input.neighbor_concat = concat_neighbor_embeddings(graph, features, a, b);
    return input;
  }

  if (a == b) {
    // identical endpoints have no simple paths by definition; keep the
    // fixed-shape degenerate graphs
    for (int l = 1; l <= config.hops; ++l) {
      PathGraph g;
      g.hop_count = l;
      g.members = {a, b};
      input.graphs.push_back(std::move(g));
    }
  } else {
    input.graphs = build_all_hops(graph, a, b, config.hops, config.path_cap);
  }

  input.init.resize(input.graphs.size());
  for (std::size_t l = 0; l < input.graphs.size(); ++l) {
    const PathGraph& g = input.graphs[l];
    input.init[l].reserve(g.members.size());
    for (const NodeId v : g.members) {
      const auto row = features.lookup(v);
      Vector state(row.begin(), row.end());
      if (config.mode == IntegratorMode::fused) {
        const Vector nb = neighbor_embedding(graph, features, v);
        for (std::size_t i = 0; i < state.size(); ++i) state[i] = 0.5 * (state[i] + nb[i]);
      }
      input.init[l].push_back(std::move(state));
    }
  }
  return input;
}

Vector path_integrate_from_input(const PairInput& input, const IntegratorConfig& config,
                                 const Mlp& edge_mlp) {
  Vector out;
  out.reserve(static_cast<std::size_t>(config.output_dim()));
  for (std::size_t l = 0; l < input.graphs.size(); ++l) {
    const std::vector<Vector> states =
        message_pass(input.graphs[l], input.init[l], edge_mlp, static_cast<int>(l) + 1);
    const Vector pooled = sort_pool(states, config.feature_dim, config.sort_pool_k);
    out.insert(out.end(), pooled.begin(), pooled.end());
  }
  return out;
}

Vector path_integrate_from_input(const PairInput& input, const IntegratorConfig& config,
                                 const Mlp& edge_mlp, PathIntegrateTape& tape) {
  tape.message_passes.assign(input.graphs.size(), {});
  tape.pools.assign(input.graphs.size(), {});
  Vector out;
  out.reserve(static_cast<std::size_t>(config.output_dim()));
  for (std::size_t l = 0; l < input.graphs.size(); ++l) {
    const std::vector<Vector> states = message_pass(input.graphs[l], input.init[l], edge_mlp,
                                                    static_cast<int>(l) + 1,
                                                    tape.message_passes[l]);
    const Vector pooled = sort_pool(states, config.feature_dim, config.sort_pool_k, tape.pools[l]);
    out.insert(out.end(), pooled.begin(), pooled.end());
  }
  return out;
}

void path_integrate_backward(const PairInput& input, const IntegratorConfig& config,
                             const Mlp& edge_mlp, const PathIntegrateTape& tape,
                             const Vector& upstream, MlpGrad& grad) {
  const std::size_t chunk =
      static_cast<std::size_t>(config.sort_pool_k) * static_cast<std::size_t>(config.feature_dim);
  if (upstream.size() != chunk * input.graphs.size()) {
    throw Error("path_integrate_backward: upstream does not match the config");
  }
  for (std::size_t l = 0; l < input.graphs.size(); ++l) {
    const Vector slice(upstream.begin() + static_cast<std::ptrdiff_t>(l * chunk),
                       upstream.begin() + static_cast<std::ptrdiff_t>((l + 1) * chunk));
    const std::vector<Vector> d_states = sort_pool_backward(tape.pools[l], slice);
    message_pass_backward(input.graphs[l], edge_mlp, tape.message_passes[l], d_states, grad);
  }
}

Vector path_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a, NodeId b,
                      const IntegratorConfig& config, const Mlp& edge_mlp) {
  IntegratorConfig cfg = config;
  cfg.mode = IntegratorMode::path;
  return path_integrate_from_input(build_pair_input(graph, features, a, b, cfg), cfg, edge_mlp);
}

Vector fused_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                       NodeId b, const IntegratorConfig& config, const Mlp& edge_mlp) {
  IntegratorConfig cfg = config;
  cfg.mode = IntegratorMode::fused;
  return path_integrate_from_input(build_pair_input(graph, features, a, b, cfg), cfg, edge_mlp);
}

}  // namespace kgmine
