#include "amml/oracle.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "amml/error.hpp"

namespace amml {

namespace {

struct Aggregate {
  Vec grad;
  double value = 0.0;
};

Aggregate smooth_sum(const ProblemInstance& inst, const Vec& x) {
  Aggregate a{Vec::Zero(inst.dim), 0.0};
  for (const auto& node : inst.nodes) {
    const auto se = smooth_value_grad(node, x);
    a.value += se.value;
    a.grad += se.grad;
  }
  return a;
}

Mat hessian_sum(const ProblemInstance& inst, const Vec& x) {
  Mat h = Mat::Zero(inst.dim, inst.dim);
  for (const auto& node : inst.nodes) h += smooth_hessian(node, x);
  return h;
}

double l1_weight(const ProblemInstance& inst) {
  if (inst.kind == ProblemKind::kLogistic) return 0.0;
  double w = 0.0;
  for (const auto& node : inst.nodes) w += node.lambda;
  return w;
}

AbsLoss stacked_abs_loss(const ProblemInstance& inst) {
  Eigen::Index rows = 0;
  for (const auto& node : inst.nodes) rows += node.sample_count();
  AbsLoss loss{Mat(rows, inst.dim), Vec(rows), Vec(rows)};
  Eigen::Index r = 0;
  for (const auto& node : inst.nodes) {
    const Eigen::Index m = node.sample_count();
    loss.rows.middleRows(r, m) = node.features;
    loss.offsets.segment(r, m) = node.labels;
    loss.weights.segment(r, m).setConstant(1.0 / static_cast<double>(m));
    r += m;
  }
  return loss;
}

// Upper bound on the Lipschitz constant of the summed smooth gradient.
double smooth_lipschitz(const ProblemInstance& inst) {
  double lip = 0.0;
  for (const auto& node : inst.nodes) {
    const double m = static_cast<double>(node.sample_count());
    const double top = symmetric_eigenvalues(node.features.transpose() * node.features / m).maxCoeff();
    lip += inst.kind == ProblemKind::kLogistic ? 0.25 * top + node.lambda : top;
  }
  return std::max(lip, 1e-12);
}

OracleResult solve_logistic(const ProblemInstance& inst, const OracleOptions& opts) {
  const double step = 1.0 / smooth_lipschitz(inst);
  Vec x = Vec::Zero(inst.dim), y = x;
  double fx = smooth_sum(inst, x).value, t = 1.0;
  int it = 0;
  // Accelerated gradient with function-value restarts down to a moderate
  // residual, then Newton steps to the requested tolerance.
  for (; it < opts.max_iter; ++it) {
    const auto at_x = smooth_sum(inst, x);
    if (at_x.grad.norm() <= std::max(opts.tol, 1e-6)) break;
    const Vec next = y - step * smooth_sum(inst, y).grad;
    const double fn = smooth_sum(inst, next).value;
    if (fn > fx) {
      y = x;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = next;
    fx = fn;
    t = t_next;
  }
  for (int newton = 0; newton < 50 && it < opts.max_iter; ++newton, ++it) {
    const auto at_x = smooth_sum(inst, x);
    if (at_x.grad.norm() <= opts.tol) break;
    const Vec dir = hessian_sum(inst, x).llt().solve(-at_x.grad);
    double s = 1.0;
    while (s > 1e-12 && smooth_sum(inst, x + s * dir).value > at_x.value + 1e-4 * s * at_x.grad.dot(dir)) s *= 0.5;
    x += s * dir;
  }
  return {x, certify(inst, x), it};
}

double piecewise_objective(const AbsLoss& loss, double l1, const Vec& x) {
  return (loss.weights.array() * (loss.rows * x - loss.offsets).array().abs()).sum() + l1 * x.lpNorm<1>();
}

// Enumerates every vertex of the arrangement {a_j'x = b_j} u {x_k = 0}.
Vec enumerate_vertices(const AbsLoss& loss, double l1, int d) {
  const Eigen::Index m = loss.rows.rows();
  const Eigen::Index planes = m + d;
  require(d <= 4 && planes <= 40, ErrorCode::kParameter, "vertex enumeration limited to d <= 4 and 40 hyperplanes");
  Mat normals(planes, d);
  Vec offsets(planes);
  normals.topRows(m) = loss.rows;
  offsets.head(m) = loss.offsets;
  normals.bottomRows(d) = Mat::Identity(d, d);
  offsets.tail(d).setZero();

  Vec best = Vec::Zero(d);
  double best_val = piecewise_objective(loss, l1, best);
  std::vector<int> pick(static_cast<std::size_t>(d));
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    Mat a(d, d);
    Vec b(d);
    for (int r = 0; r < d; ++r) {
      a.row(r) = normals.row(pick[static_cast<std::size_t>(r)]);
      b[r] = offsets[pick[static_cast<std::size_t>(r)]];
    }
    Eigen::FullPivLU<Mat> lu(a);
    if (lu.isInvertible()) {
      const Vec x = lu.solve(b);
      const double v = piecewise_objective(loss, l1, x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
    }
    int r = d - 1;
    while (r >= 0 && pick[static_cast<std::size_t>(r)] == planes - d + r) --r;
    if (r < 0) break;
    ++pick[static_cast<std::size_t>(r)];
    for (int s = r + 1; s < d; ++s) pick[static_cast<std::size_t>(s)] = pick[static_cast<std::size_t>(s - 1)] + 1;
  }
  return best;
}

}  // namespace

OracleResult solve_centralized(const ProblemInstance& inst, const OracleOptions& opts) {
  require(!inst.nodes.empty(), ErrorCode::kParameter, "solve_centralized: empty instance");
  OracleResult res;
  switch (inst.kind) {
    case ProblemKind::kLeastSquaresLasso: {
      const Vec zero = Vec::Zero(inst.dim);
      QuadraticTerm q{hessian_sum(inst, zero), smooth_sum(inst, zero).grad};
      const auto sub = solve_lasso_quadratic(q, l1_weight(inst), {opts.tol * 0.1, opts.max_iter});
      res = {sub.x, certify(inst, sub.x), sub.inner_iterations};
      break;
    }
    case ProblemKind::kLogistic:
      res = solve_logistic(inst, opts);
      break;
    case ProblemKind::kL1Lasso: {
      const auto sub = solve_piecewise_linear(0.0, Vec::Zero(inst.dim), stacked_abs_loss(inst), l1_weight(inst),
                                              {opts.tol * 0.1, opts.max_iter});
      res = {sub.x, certify(inst, sub.x), sub.inner_iterations};
      break;
    }
  }
  if (!(res.kkt_residual <= opts.tol)) {
    throw NonconvergedError("oracle for '" + inst.instance_id + "' stalled at residual " +
                                std::to_string(res.kkt_residual),
                            res.x_star, res.kkt_residual);
  }
  return res;
}

double certify(const ProblemInstance& inst, const Vec& x) {
  require(x.size() == inst.dim, ErrorCode::kShape, "certify: dimension mismatch");
  const Vec grad = smooth_sum(inst, x).grad;
  switch (inst.kind) {
    case ProblemKind::kLogistic:
      return grad.norm();
    case ProblemKind::kLeastSquaresLasso:
      return composite_residual(x, grad, AbsLoss{Mat(0, inst.dim), Vec(0), Vec(0)}, l1_weight(inst), 1e-12);
    case ProblemKind::kL1Lasso: {
      const AbsLoss loss = stacked_abs_loss(inst);
      return composite_residual(x, grad, loss, l1_weight(inst), 1e-9 * (1.0 + loss.offsets.cwiseAbs().maxCoeff()));
    }
  }
  return std::numeric_limits<double>::infinity();
}

Vec solve_reference(const ProblemInstance& inst, int iterations) {
  if (inst.kind == ProblemKind::kL1Lasso) return enumerate_vertices(stacked_abs_loss(inst), l1_weight(inst), inst.dim);
  const double step = 1.0 / smooth_lipschitz(inst);
  const double l1 = l1_weight(inst);
  Vec x = Vec::Zero(inst.dim);
  for (int it = 0; it < iterations; ++it) {
    const Vec next = soft_threshold(x - step * smooth_sum(inst, x).grad, step * l1);
    if ((next - x).norm() <= 1e-15 * (1.0 + x.norm())) return next;
    x = next;
  }
  return x;
}

double label_instance(ProblemInstance& inst, const OracleOptions& opts) {
  const auto res = solve_centralized(inst, opts);
  inst.x_star = res.x_star;
  return res.kkt_residual;
}

}  // namespace amml
