#pragma once

#include <memory>
#include <string>
#include <vector>

#include "amml/baselines.hpp"
#include "amml/config.hpp"

namespace amml {

struct Dataset {
  std::shared_ptr<const Graph> graph;
  Models train, val, test;
};

// Graph and labeled instances in memory, seeded from cfg.seed.
Dataset generate_dataset(const Config& cfg);

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(const std::string& bytes);

struct GenSummary {
  int instances = 0;
  double worst_residual = 0.0;
  std::string manifest_hash;
};

// Writes graph.txt, instances/<split>_<k>.json and manifest.json under out_dir.
GenSummary cmd_gen(const Config& cfg, const std::string& out_dir);

// Reads the manifest written by cmd_gen and checks every file hash.
Dataset load_dataset(const Config& cfg, const std::string& out_dir);

struct TrainSummary {
  double pretrained_val_mse = 0.0;
  double best_val_mse = 0.0;
  int best_update = 0;
  double clone_error = 0.0;
};

// Writes the best checkpoint to checkpoint_path (out_dir/checkpoint.json when
// empty), out_dir/pretrained.json and out_dir/curve.csv.
TrainSummary cmd_train(const Config& cfg, const std::string& out_dir, const std::string& checkpoint_path = "");

struct EvalSummary {
  int instances = 0;
  int aborted = 0;
  double mean_horizon_mse = 0.0;  // at the end of the training horizon
  double mean_final_mse = 0.0;
};

// Deterministic rollouts on the test split for `rounds` rounds into out_dir/eval.csv.
EvalSummary cmd_eval(const Config& cfg, const std::string& checkpoint_path, int rounds, const std::string& out_dir);

struct CompareSummary {
  double learned_mse = 0.0;
  double fixed_mse = 0.0;
  double pg_extra_mse = 0.0;
  double pg_extra_consensus = 0.0;  // mean final consensus residual
  Vec fixed_action;                 // (alpha, beta, rho)
  double pg_extra_step = 0.0;
};

// Learned, grid-tuned fixed and step-tuned PG-EXTRA on the test split over the
// same number of iterations, into out_dir/compare.csv and compare_summary.csv.
CompareSummary cmd_compare(const Config& cfg, const std::string& checkpoint_path, const std::string& out_dir);

struct OracleCheckSummary {
  int instances = 0;
  int failures = 0;
  double worst_certificate = 0.0;
  double worst_reference_gap = 0.0;  // objective gap, over the instances a reference was run on
};

// Recertifies every instance listed in the manifest into out_dir/oracle_check.csv.
OracleCheckSummary cmd_oracle_check(const Config& cfg, const std::string& out_dir);

}  // namespace amml
