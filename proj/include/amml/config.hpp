#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "amml/oracle.hpp"
#include "amml/rl.hpp"

namespace amml {

struct TopologyConfig {
  int nodes = 10;
  int edges = 30;
};

struct ProblemConfig {
  ProblemKind kind = ProblemKind::kLeastSquaresLasso;
  std::string source = "synthetic";  // or "uci"
  std::string dataset = "abalone";   // uci format: abalone or breast_cancer
  std::string path;                  // uci data file
  int dim = 10;                      // synthetic only; uci takes the file's width
  int pool_size = 4177;
  double correlation = 0.5;
  double noise = 0.5;
  int samples = 100;  // per instance, split evenly over the nodes
  double lambda = 0.1;
  int train = 100;
  int val = 10;
  int test = 10;
};

struct CompareConfig {
  std::vector<double> alpha{0, 1, 2, 5, 10, 20};
  std::vector<double> beta{0.5, 1, 2, 5, 10, 20};
  std::vector<double> rho{0.5, 1, 2, 5, 10, 20};
  std::vector<double> pg_extra_steps;  // empty: default_step_grid()
};

struct Config {
  TopologyConfig topology;
  ProblemConfig problem;
  InnerOptions inner;
  OracleOptions oracle;
  TrainConfig train;  // env, ppo and policy settings
  int eval_rounds = 15;
  CompareConfig compare;
  std::string out = "amml_out";
  std::uint64_t seed = 0;  // fans out to graph, data, instances and training
};

// Every section and key is optional; unknown ones are rejected by name.
Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& cfg);
Config load_config(const std::string& path);

// Synthetic least-squares-lasso miniature: N=5, d=4, 5/5/5 instances.
Config miniature_config();

}  // namespace amml
