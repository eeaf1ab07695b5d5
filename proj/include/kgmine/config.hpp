#pragma once

#include <string>
#include <vector>

#include "kgmine/predictor.hpp"

namespace kgmine {

/// Run configuration: a flat key = value file with [section] headers.
/// Unknown sections or keys are rejected so typos fail loudly.
struct RunConfig {
  // [paths]
  std::string edges;
  std::string features;
  std::string classes;
  std::string relations;
  std::string triplets;
  std::string output_dir = "out";
  std::string snapshot;  // optional binary graph snapshot

  // [integrator]
  PredictorMode mode = PredictorMode::neighbor;
  int hops = 2;
  int sort_pool_k = 5;
  std::size_t path_cap = kDefaultPathCap;

  // [training]
  TrainingConfig training;

  // [evaluation]
  std::vector<int> ks = {20, 50, 100};

  // [run]
  int threads = 0;  // 0 keeps the OpenMP default

  IntegratorConfig integrator_config(int feature_dim) const;
  PredictorConfig predictor_config(int feature_dim) const;
};

RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig parse_run_config(const std::string& path);

}  // namespace kgmine
