#include "amml/engine.hpp"

#include <algorithm>
#include <cmath>

#include "amml/error.hpp"

namespace amml {

ActionTriple::ActionTriple(double alpha, double beta, double rho, const ActionBounds& b)
    : alpha_(alpha), beta_(beta), rho_(rho) {
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= b.alpha_max, ErrorCode::kParameter,
          "alpha " + std::to_string(alpha) + " outside [0, " + std::to_string(b.alpha_max) + "]");
  require(std::isfinite(beta) && beta >= b.beta_min && beta <= b.beta_max, ErrorCode::kParameter,
          "beta " + std::to_string(beta) + " outside [" + std::to_string(b.beta_min) + ", " + std::to_string(b.beta_max) + "]");
  require(std::isfinite(rho) && rho >= b.rho_min && rho <= b.rho_max, ErrorCode::kParameter,
          "rho " + std::to_string(rho) + " outside [" + std::to_string(b.rho_min) + ", " + std::to_string(b.rho_max) + "]");
}

ActionTriple ActionTriple::clipped(const Vec& raw, const ActionBounds& b) {
  require(raw.size() == 2 || raw.size() == 3, ErrorCode::kShape, "action vector must have 2 or 3 components");
  auto clip = [](double v, double lo, double hi) { return std::isnan(v) ? lo : std::clamp(v, lo, hi); };
  ActionTriple a;
  const Eigen::Index off = raw.size() == 3 ? 1 : 0;
  a.alpha_ = raw.size() == 3 ? clip(raw[0], 0.0, b.alpha_max) : 0.0;
  a.beta_ = clip(raw[off], b.beta_min, b.beta_max);
  a.rho_ = clip(raw[off + 1], b.rho_min, b.rho_max);
  return a;
}

BaseModel::BaseModel(std::shared_ptr<const ProblemInstance> inst, std::shared_ptr<const Graph> graph,
                     InnerOptions inner)
    : inst_(std::move(inst)), graph_(std::move(graph)), inner_(inner) {
  require(inst_ && graph_, ErrorCode::kParameter, "BaseModel: null instance or graph");
  require(inst_->node_count() == graph_->node_count(), ErrorCode::kShape,
          "instance has " + std::to_string(inst_->node_count()) + " nodes but graph has " +
              std::to_string(graph_->node_count()));
  weights_ = metropolis_weights(*graph_);
  lambda_max_p_ = spectral_bounds(weights_).lambda_max;
  if (inst_->kind == ProblemKind::kLeastSquaresLasso) {
    const Vec zero = Vec::Zero(inst_->dim);
    for (const auto& node : inst_->nodes) {
      constant_hessian_.push_back(smooth_hessian(node, zero));
      constant_eigs_.push_back(hessian_eigenvalues(constant_hessian_.back()));
    }
  }
}

NetworkState BaseModel::init_network() const {
  NetworkState s;
  s.nodes.assign(static_cast<std::size_t>(inst_->node_count()), NodeState{Vec::Zero(inst_->dim), Vec::Zero(inst_->dim)});
  return s;
}

Vec BaseModel::local_consensus(const NetworkState& state, int i) const {
  // p_ii = -sum_j p_ij, so sigma_i = sum_j p_ij (x_j - x_i); exact zero at consensus.
  const Vec& xi = state.nodes[static_cast<std::size_t>(i)].x;
  Vec sigma = Vec::Zero(xi.size());
  for (int j : graph_->neighbors(i)) sigma += weights_(i, j) * (state.nodes[static_cast<std::size_t>(j)].x - xi);
  return sigma;
}

Vec BaseModel::update_node(const NetworkState& state, int i, const ActionTriple& a) const {
  const auto& obj = inst_->nodes[static_cast<std::size_t>(i)];
  const auto& node = state.nodes[static_cast<std::size_t>(i)];
  const Vec sigma = local_consensus(state, i);

  if (obj.kind == ProblemKind::kL1Lasso) {
    const Vec c = node.q - a.beta() * node.x + a.rho() * sigma;
    return solve_nonsmooth(a.beta(), c, obj, inner_, &node.x).x;
  }

  const SmoothEval se = smooth_value_grad(obj, node.x);
  Mat m = constant_hessian_.empty() ? smooth_hessian(obj, node.x) : constant_hessian_[static_cast<std::size_t>(i)];
  m *= a.alpha();
  m.diagonal().array() += a.beta();
  const Vec c = node.q - m * node.x + se.grad + a.rho() * sigma;
  QuadraticTerm quad{std::move(m), c};
  if (obj.kind == ProblemKind::kLogistic) return solve_smooth(quad).x;
  return solve_lasso_quadratic(quad, obj.lambda, inner_, &node.x).x;
}

NetworkState BaseModel::step(const NetworkState& state, const ActionTriple& a,
                             std::vector<ObservationTriple>* observed) const {
  const int n = inst_->node_count();
  NetworkState next = state;
  for (int i = 0; i < n; ++i) {
    try {
      next.nodes[static_cast<std::size_t>(i)].x = update_node(state, i, a);
    } catch (const NonconvergedError& e) {
      throw NonconvergedError("node " + std::to_string(i) + ": " + e.what(), e.best(), e.residual(), i);
    } catch (const Error& e) {
      throw Error(e.code(), "node " + std::to_string(i) + ": " + e.what());
    }
  }
  // Dual update only after every primal update has landed.
  for (int i = 0; i < n; ++i) next.nodes[static_cast<std::size_t>(i)].q += a.rho() * local_consensus(next, i);
  ++next.iteration;
  if (observed) {
    observed->clear();
    for (int i = 0; i < n; ++i) observed->push_back(observe(next, i));
  }
  return next;
}

ObservationTriple BaseModel::observe(const NetworkState& state, int i) const {
  const auto& obj = inst_->nodes[static_cast<std::size_t>(i)];
  const Vec& x = state.nodes[static_cast<std::size_t>(i)].x;
  ObservationTriple o;
  o.sigma = local_consensus(state, i);
  if (obj.kind == ProblemKind::kL1Lasso) {
    o.grad = Vec::Zero(x.size());
    o.eigs = Vec::Zero(x.size());
  } else {
    o.grad = smooth_value_grad(obj, x).grad;
    o.eigs = constant_eigs_.empty() ? hessian_eigenvalues(smooth_hessian(obj, x)) : constant_eigs_[static_cast<std::size_t>(i)];
  }
  return o;
}

NetworkState BaseModel::run_round(const NetworkState& state, const ActionTriple& a, int n, RoundObservation* obs,
                                  std::vector<Metrics>* trace) const {
  require(n >= 1, ErrorCode::kParameter, "run_round: n must be at least 1");
  const auto nodes = static_cast<std::size_t>(inst_->node_count());
  if (obs) obs->assign(nodes, {});
  NetworkState cur = state;
  std::vector<ObservationTriple> step_obs;
  for (int k = 0; k < n; ++k) {
    cur = step(cur, a, obs ? &step_obs : nullptr);
    if (obs)
      for (std::size_t i = 0; i < nodes; ++i) (*obs)[i].push_back(std::move(step_obs[i]));
    if (trace) trace->push_back(metrics(cur));
  }
  return cur;
}

Metrics BaseModel::metrics(const NetworkState& state) const { return compute_metrics(state, *inst_); }

Metrics compute_metrics(const NetworkState& state, const ProblemInstance& inst) {
  require(inst.x_star.has_value(), ErrorCode::kMissingOracle,
          "instance '" + inst.instance_id + "' has no ground-truth solution");
  const Vec& xs = *inst.x_star;
  const auto n = static_cast<double>(state.nodes.size());
  Metrics m;
  Vec mean = Vec::Zero(xs.size());
  double obj = 0.0;
  for (std::size_t i = 0; i < state.nodes.size(); ++i) {
    const Vec& x = state.nodes[i].x;
    m.mse += (x - xs).squaredNorm();
    mean += x;
    obj += local_value(inst.nodes[i], x);
  }
  m.mse /= n;
  mean /= n;
  for (const auto& node : state.nodes) m.consensus_error += (node.x - mean).squaredNorm();
  m.objective_error = std::abs(obj - full_objective(inst, xs));
  return m;
}

bool convexity_safeguard(const ActionTriple& a, double hessian_eig_min, double lambda_max_p) {
  return a.alpha() * hessian_eig_min + a.beta() >= a.rho() * lambda_max_p;
}

}  // namespace amml
