#pragma once

#include <string_view>
#include <vector>

#include "kgmine/graph.hpp"
#include "kgmine/neighbor.hpp"
#include "kgmine/nn.hpp"
#include "kgmine/path_graph.hpp"

namespace kgmine {

enum class IntegratorMode { neighbor, path, fused };

const char* to_string(IntegratorMode mode);
IntegratorMode integrator_mode_from_string(std::string_view name);

struct IntegratorConfig {
  IntegratorMode mode = IntegratorMode::neighbor;
  int hops = 2;         // L, capped at 3
  int sort_pool_k = 5;  // K
  int feature_dim = 0;  // k, taken from the feature table
  std::size_t path_cap = kDefaultPathCap;

  void validate() const;

  /// Knowledge-embedding size: 2k for the neighbor integrator (its default
  /// MLP is square), hops*K*k for the path and fused integrators.
  int output_dim() const;
};

// ---------------------------------------------------------------------------
// Neighbor integrator: e_kb = ReLU(MLP([e_nb_a ; e_nb_b]))

Vector neighbor_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                          NodeId b, const Mlp& mlp);

struct NeighborTape {
  Vector input;
  MlpTape mlp;
  Vector mlp_out;  // pre-ReLU
};

Vector neighbor_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                          NodeId b, const Mlp& mlp, NeighborTape& tape);
void neighbor_integrate_backward(const Mlp& mlp, const NeighborTape& tape, const Vector& upstream,
                                 MlpGrad& grad);

// ---------------------------------------------------------------------------
// Message passing over a PathGraph: every iteration, each member state gains
// the summed edge messages MLP(previous state) of its neighbors. All members
// update synchronously; iterations must equal the graph's hop count.

std::vector<Vector> message_pass(const PathGraph& g, const std::vector<Vector>& init,
                                 const Mlp& edge_mlp, int iterations);

struct MessagePassTape {
  std::vector<std::vector<Vector>> states;      // [t][member], t = 0..iterations
  std::vector<std::vector<MlpTape>> mlp_tapes;  // [t-1][member]
};

std::vector<Vector> message_pass(const PathGraph& g, const std::vector<Vector>& init,
                                 const Mlp& edge_mlp, int iterations, MessagePassTape& tape);

/// Accumulates edge-MLP gradients; returns the gradient w.r.t. the initial
/// states.
std::vector<Vector> message_pass_backward(const PathGraph& g, const Mlp& edge_mlp,
                                          const MessagePassTape& tape,
                                          const std::vector<Vector>& upstream, MlpGrad& grad);

// ---------------------------------------------------------------------------
// GlobalSortPool: order rows descending by the last channel (ties by member
// index), keep the top K, zero-pad to K rows, flatten.

Vector sort_pool(const std::vector<Vector>& rows, int width, int top_k);

struct SortPoolPlan {
  std::vector<int> selected;  // source row of each kept output slot
  int n = 0;
  int width = 0;
  int top_k = 0;
};

Vector sort_pool(const std::vector<Vector>& rows, int width, int top_k, SortPoolPlan& plan);
std::vector<Vector> sort_pool_backward(const SortPoolPlan& plan, const Vector& upstream);

// ---------------------------------------------------------------------------
// Whole-pair integration. The parameter-independent parts (path graphs and
// initial member states) are separated out so training and evaluation can
// cache them per class pair.

struct PairInput {
  // neighbor mode
  Vector neighbor_concat;
  // path / fused mode
  std::vector<PathGraph> graphs;
  std::vector<std::vector<Vector>> init;  // [l-1][member]
};

PairInput build_pair_input(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                           NodeId b, const IntegratorConfig& config);

struct PathIntegrateTape {
  std::vector<MessagePassTape> message_passes;  // per l
  std::vector<SortPoolPlan> pools;              // per l
};

Vector path_integrate_from_input(const PairInput& input, const IntegratorConfig& config,
                                 const Mlp& edge_mlp);
Vector path_integrate_from_input(const PairInput& input, const IntegratorConfig& config,
                                 const Mlp& edge_mlp, PathIntegrateTape& tape);
void path_integrate_backward(const PairInput& input, const IntegratorConfig& config,
                             const Mlp& edge_mlp, const PathIntegrateTape& tape,
                             const Vector& upstream, MlpGrad& grad);

/// Message states start from the raw node features.
Vector path_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a, NodeId b,
                      const IntegratorConfig& config, const Mlp& edge_mlp);

/// Message states start from the element-wise mean of the node features and
/// the neighbor-averaged embedding; otherwise identical to path_integrate.
Vector fused_integrate(const KnowledgeGraph& graph, const FeatureTable& features, NodeId a,
                       NodeId b, const IntegratorConfig& config, const Mlp& edge_mlp);

}  // namespace kgmine
