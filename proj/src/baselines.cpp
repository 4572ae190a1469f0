#include "amml/baselines.hpp"

#include <cmath>
#include <limits>

#include "amml/error.hpp"

namespace amml {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool divergent(const Metrics& m, double limit) { return !std::isfinite(m.mse) || m.mse > limit; }

bool solver_failure(const Error& e) {
  return e.code() == ErrorCode::kNonconverged || e.code() == ErrorCode::kDegenerateParameter;
}

NetworkState as_state(const Mat& x) {
  NetworkState s;
  s.nodes.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) s.nodes[i] = {x.col(i), Vec::Zero(x.rows())};
  return s;
}

Mat smooth_grads(const ProblemInstance& inst, const Mat& x) {
  Mat g = Mat::Zero(x.rows(), x.cols());
  if (!has_smooth_part(inst.kind)) return g;
  for (int i = 0; i < inst.node_count(); ++i) g.col(i) = smooth_value_grad(inst.nodes[i], x.col(i)).grad;
  return g;
}

// prox_{step r_i} applied column-wise.
Mat prox_columns(const ProblemInstance& inst, const Mat& v, double step, const InnerOptions& opts, const Mat& warm) {
  Mat out(v.rows(), v.cols());
  for (int i = 0; i < inst.node_count(); ++i) {
    switch (inst.kind) {
      case ProblemKind::kLeastSquaresLasso:
        out.col(i) = soft_threshold(Vec(v.col(i)), step * inst.nodes[i].lambda);
        break;
      case ProblemKind::kLogistic:
        out.col(i) = v.col(i);
        break;
      case ProblemKind::kL1Lasso: {
        const Vec w = warm.col(i);
        out.col(i) = solve_nonsmooth(1.0 / step, -v.col(i) / step, inst.nodes[i], opts, &w).x;
        break;
      }
    }
  }
  return out;
}

template <typename Run>
TuneResult tune(const std::vector<std::shared_ptr<const BaseModel>>& val_set, std::size_t count, Run run) {
  require(count > 0, ErrorCode::kParameter, "empty tuning grid");
  require(!val_set.empty(), ErrorCode::kParameter, "empty validation set");
  TuneResult out;
  out.score = kInf;
  for (std::size_t k = 0; k < count; ++k) {
    double total = 0.0;
    for (const auto& model : val_set) {
      total += final_mse(run(*model, k));
      if (!std::isfinite(total)) break;
    }
    const double score = std::isfinite(total) ? total / static_cast<double>(val_set.size()) : kInf;
    out.scores.push_back(score);
    if (score < out.score) {
      out.score = score;
      out.index = k;
    }
  }
  return out;
}

}  // namespace

double final_mse(const BaselineTrace& trace) {
  if (trace.diverged || trace.metrics.empty()) return kInf;
  return trace.metrics.back().mse;
}

BaselineTrace run_fixed_policy(const BaseModel& model, const ActionTriple& a, int iterations, double divergence_mse) {
  require(iterations >= 1, ErrorCode::kParameter, "iterations must be >= 1");
  BaselineTrace out;
  NetworkState state = model.init_network();
  for (int k = 0; k < iterations; ++k) {
    try {
      state = model.step(state, a);
    } catch (const Error& e) {
      if (!solver_failure(e)) throw;
      out.diverged = true;
      return out;
    }
    out.metrics.push_back(model.metrics(state));
    if (divergent(out.metrics.back(), divergence_mse)) {
      out.diverged = true;
      return out;
    }
  }
  return out;
}

BaselineTrace run_pg_extra(const BaseModel& model, double step_size, int iterations, double divergence_mse) {
  require(step_size > 0 && std::isfinite(step_size), ErrorCode::kParameter, "step size must be positive");
  require(iterations >= 1, ErrorCode::kParameter, "iterations must be >= 1");
  const auto& inst = model.instance();
  const int n = inst.node_count();
  const Mat w = mixing_matrix(model.weights());
  const Mat w_tilde = 0.5 * (Mat::Identity(n, n) + w);
  const auto& opts = model.inner_options();

  BaselineTrace out;
  auto record = [&](const Mat& x) {
    out.metrics.push_back(compute_metrics(as_state(x), inst));
    if (!x.allFinite() || divergent(out.metrics.back(), divergence_mse)) out.diverged = true;
    return !out.diverged;
  };

  try {
    Mat x_prev = Mat::Zero(inst.dim, n);
    Mat g_prev = smooth_grads(inst, x_prev);
    Mat half = x_prev * w - step_size * g_prev;
    Mat x = prox_columns(inst, half, step_size, opts, x_prev);
    if (!record(x)) return out;
    for (int k = 1; k < iterations; ++k) {
      const Mat g = smooth_grads(inst, x);
      // W and W~ are symmetric, so right-multiplying mixes the node columns.
      half = x * w + half - x_prev * w_tilde - step_size * (g - g_prev);
      x_prev = x;
      g_prev = g;
      x = prox_columns(inst, half, step_size, opts, x_prev);
      if (!record(x)) return out;
    }
  } catch (const Error& e) {
    if (!solver_failure(e)) throw;
    out.diverged = true;
  }
  return out;
}

TuneResult tune_fixed_policy(const std::vector<std::shared_ptr<const BaseModel>>& val_set,
                             const std::vector<ActionTriple>& grid, int iterations) {
  return tune(val_set, grid.size(),
              [&](const BaseModel& m, std::size_t k) { return run_fixed_policy(m, grid[k], iterations); });
}

TuneResult tune_pg_extra(const std::vector<std::shared_ptr<const BaseModel>>& val_set,
                         const std::vector<double>& steps, int iterations) {
  return tune(val_set, steps.size(),
              [&](const BaseModel& m, std::size_t k) { return run_pg_extra(m, steps[k], iterations); });
}

std::vector<ActionTriple> default_fixed_grid(ProblemKind kind, const ActionBounds& bounds) {
  const std::vector<double> alphas = kind == ProblemKind::kL1Lasso ? std::vector<double>{0.0}
                                                                   : std::vector<double>{0, 1, 2, 5, 10, 20};
  const std::vector<double> values{0.5, 1, 2, 5, 10, 20};
  std::vector<ActionTriple> grid;
  for (double a : alphas)
    for (double b : values)
      for (double r : values) grid.push_back(ActionTriple::clipped(Vec{{a, b, r}}, bounds));
  return grid;
}

std::vector<double> default_step_grid() {
  std::vector<double> steps;
  for (double p = 1e-3; p < 2.0; p *= 10)
    for (double m : {1.0, 2.0, 5.0})
      if (m * p <= 1.0 + 1e-12) steps.push_back(m * p);
  return steps;
}

}  // namespace amml
