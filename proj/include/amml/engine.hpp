#pragma once

#include <memory>
#include <vector>

#include "amml/linalg.hpp"
#include "amml/problems.hpp"
#include "amml/prox.hpp"
#include "amml/topology.hpp"

namespace amml {

struct ActionBounds {
  double alpha_max = 20.0;
  double beta_min = 1e-6;
  double beta_max = 20.0;
  double rho_min = 1e-3;
  double rho_max = 20.0;
};

// Per-round configuration (alpha, beta, rho) of the base model.
class ActionTriple {
 public:
  // Throws kParameter when a component lies outside the bounds.
  ActionTriple(double alpha, double beta, double rho, const ActionBounds& bounds = {});

  // Projects an unconstrained vector into the box. Two components are read as
  // (beta, rho) with alpha = 0, three as (alpha, beta, rho).
  static ActionTriple clipped(const Vec& raw, const ActionBounds& bounds);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double rho() const { return rho_; }

 private:
  ActionTriple() = default;
  double alpha_ = 0.0, beta_ = 1.0, rho_ = 1.0;
};

struct NodeState {
  Vec x;
  Vec q;
};

struct NetworkState {
  std::vector<NodeState> nodes;
  long iteration = 0;
};

struct ObservationTriple {
  Vec sigma;  // sum_j p_ij x_j
  Vec grad;   // grad s_i(x_i)
  Vec eigs;   // spectrum of the Hessian of s_i at x_i, ascending
};

// observations[node][iteration within the round]
using RoundObservation = std::vector<std::vector<ObservationTriple>>;

struct Metrics {
  double mse = 0.0;
  double objective_error = 0.0;
  double consensus_error = 0.0;
};

// The distributed parameterized method of multipliers over a fixed graph and
// problem instance. Holds only immutable data; iterates live in NetworkState.
class BaseModel {
 public:
  BaseModel(std::shared_ptr<const ProblemInstance> inst, std::shared_ptr<const Graph> graph,
            InnerOptions inner = {});

  const ProblemInstance& instance() const { return *inst_; }
  const Graph& graph() const { return *graph_; }
  const Mat& weights() const { return weights_; }
  const InnerOptions& inner_options() const { return inner_; }
  double lambda_max_weights() const { return lambda_max_p_; }

  NetworkState init_network() const;

  // sigma_i from node i's own iterate and its neighbors' only.
  Vec local_consensus(const NetworkState& state, int node) const;

  // One iteration: every node solves its x-update, then every node applies the
  // dual update with the new consensus term. Records the triple at k+1.
  NetworkState step(const NetworkState& state, const ActionTriple& a,
                    std::vector<ObservationTriple>* observed = nullptr) const;

  // n steps under one action. `trace`, when given, receives metrics after each step.
  NetworkState run_round(const NetworkState& state, const ActionTriple& a, int n, RoundObservation* obs = nullptr,
                         std::vector<Metrics>* trace = nullptr) const;

  Metrics metrics(const NetworkState& state) const;

  ObservationTriple observe(const NetworkState& state, int node) const;

 private:
  Vec update_node(const NetworkState& state, int node, const ActionTriple& a) const;

  std::shared_ptr<const ProblemInstance> inst_;
  std::shared_ptr<const Graph> graph_;
  Mat weights_;
  InnerOptions inner_;
  double lambda_max_p_;
  // Least-squares Hessians do not depend on x.
  std::vector<Mat> constant_hessian_;
  std::vector<Vec> constant_eigs_;
};

Metrics compute_metrics(const NetworkState& state, const ProblemInstance& inst);

// Sufficient condition alpha * eig_min + beta >= rho * lambda_max(P) for the
// surrogate-minus-penalty convexity. Advisory only.
bool convexity_safeguard(const ActionTriple& a, double hessian_eig_min, double lambda_max_p);

}  // namespace amml
