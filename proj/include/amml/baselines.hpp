#pragma once

#include <memory>
#include <vector>

#include "amml/engine.hpp"

namespace amml {

struct BaselineTrace {
  std::vector<Metrics> metrics;  // one row per iteration, starting at 1
  bool diverged = false;         // the trace stops at the first divergent iterate
};

// Base model from a zero start under one constant action. Subproblem failures
// count as divergence.
BaselineTrace run_fixed_policy(const BaseModel& model, const ActionTriple& a, int iterations,
                               double divergence_mse = 1e6);

// PG-EXTRA with mixing matrix W = I - P and W~ = (I + W) / 2.
BaselineTrace run_pg_extra(const BaseModel& model, double step_size, int iterations, double divergence_mse = 1e6);

// Final MSE of a trace, +inf when it diverged.
double final_mse(const BaselineTrace& trace);

struct TuneResult {
  std::size_t index = 0;
  double score = 0.0;  // mean final MSE over the validation set
  std::vector<double> scores;
};

// Lowest mean final MSE wins, ties go to the lowest index.
TuneResult tune_fixed_policy(const std::vector<std::shared_ptr<const BaseModel>>& val_set,
                             const std::vector<ActionTriple>& grid, int iterations);
TuneResult tune_pg_extra(const std::vector<std::shared_ptr<const BaseModel>>& val_set,
                         const std::vector<double>& steps, int iterations);

// {0,1,2,5,10,20} x {0.5,1,2,5,10,20}^2, alpha fixed at 0 for l1-regression.
std::vector<ActionTriple> default_fixed_grid(ProblemKind kind, const ActionBounds& bounds = {});
// 1, 2 and 5 times the powers of ten from 1e-3 to 1.
std::vector<double> default_step_grid();

}  // namespace amml
