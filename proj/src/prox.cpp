#include "amml/prox.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "amml/error.hpp"

namespace amml {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

double lasso_objective(const QuadraticTerm& q, double lambda, const Vec& x) {
  return 0.5 * x.dot(q.matrix * x) + q.linear.dot(x) + lambda * x.lpNorm<1>();
}

// Fix the signs of the current nonzeros and solve the reduced stationarity
// system M_SS x_S = -(c_S + lambda s_S). Returns false if the solve is not
// sign-consistent.
bool polish_lasso(const QuadraticTerm& q, double lambda, const Vec& x, Vec& out) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] != 0.0) support.push_back(k);
  out = Vec::Zero(x.size());
  if (support.empty()) return true;
  const auto s = static_cast<Eigen::Index>(support.size());
  Mat m(s, s);
  Vec rhs(s);
  for (Eigen::Index a = 0; a < s; ++a) {
    rhs[a] = -(q.linear[support[a]] + lambda * sign(x[support[a]]));
    for (Eigen::Index b = 0; b < s; ++b) m(a, b) = q.matrix(support[a], support[b]);
  }
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const Vec z = llt.solve(rhs);
  for (Eigen::Index a = 0; a < s; ++a) {
    if (z[a] * sign(x[support[a]]) <= 0.0) return false;
    out[support[a]] = z[a];
  }
  return true;
}

// Minimizes phi(u) = sum_k h_k(f + B u)^2 over the box [-1, 1]^z, where h_k is
// the identity on free coordinates and soft-thresholding by l1 on zero ones.
class KinkMultiplierProblem {
 public:
  KinkMultiplierProblem(Vec f, Mat b, std::vector<char> zero_coord, double l1)
      : f_(std::move(f)), b_(std::move(b)), zero_(std::move(zero_coord)), l1_(l1) {}

  Vec effective(const Vec& u) const {
    Vec w = f_ + b_ * u;
    for (Eigen::Index k = 0; k < w.size(); ++k)
      if (zero_[static_cast<std::size_t>(k)]) w[k] = soft_threshold(w[k], l1_);
    return w;
  }
  double value(const Vec& u) const { return effective(u).squaredNorm(); }

  double minimize() const {
    const Eigen::Index z = b_.cols();
    Vec u = Vec::Zero(z);
    double best = value(u);
    if (z == 0) return best;

    const double lip = 2.0 * std::max(symmetric_eigenvalues(b_.transpose() * b_).maxCoeff(), 1e-300);
    auto project = [](Vec v) { return Vec(v.cwiseMax(-1.0).cwiseMin(1.0)); };

    Vec y = u, prev = u;
    double t = 1.0;
    for (int it = 0; it < 3000 && best > 0.0; ++it) {
      const Vec next = project(y - (2.0 / lip) * (b_.transpose() * effective(y)));
      const double v = value(next);
      if (v > value(prev)) {
        y = prev;
        t = 1.0;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * (next - prev);
      prev = next;
      t = t_next;
      if (v < best) {
        best = v;
        u = next;
      }
      if (it % 50 == 49) {
        Vec polished;
        if (active_set_polish(u, polished)) {
          const double pv = value(polished);
          if (pv < best) {
            best = pv;
            u = polished;
            prev = y = polished;
            t = 1.0;
          }
        }
        if (best < 1e-30) break;
      }
    }
    Vec polished;
    if (active_set_polish(u, polished)) best = std::min(best, value(polished));
    return best;
  }

 private:
  // Least squares over the free multipliers with the active pieces of h frozen.
  bool active_set_polish(const Vec& u, Vec& out) const {
    const Eigen::Index z = b_.cols();
    const Vec w = f_ + b_ * u;
    std::vector<Eigen::Index> rows, free_cols;
    Vec target(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      if (!zero_[static_cast<std::size_t>(k)]) {
        rows.push_back(k);
        target[k] = f_[k];
      } else if (std::abs(w[k]) > l1_) {
        rows.push_back(k);
        target[k] = f_[k] - sign(w[k]) * l1_;
      }
    }
    for (Eigen::Index j = 0; j < z; ++j)
      if (std::abs(u[j]) < 1.0) free_cols.push_back(j);
    if (rows.empty() || free_cols.empty()) return false;

    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nf = static_cast<Eigen::Index>(free_cols.size());
    Mat sub(nr, nf);
    Vec rhs(nr);
    for (Eigen::Index a = 0; a < nr; ++a) {
      double fixed = target[rows[a]];
      for (Eigen::Index j = 0; j < z; ++j)
        if (std::abs(u[j]) >= 1.0) fixed += b_(rows[a], j) * u[j];
      rhs[a] = -fixed;
      for (Eigen::Index c = 0; c < nf; ++c) sub(a, c) = b_(rows[a], free_cols[c]);
    }
    const Vec sol = sub.completeOrthogonalDecomposition().solve(rhs);
    out = u;
    for (Eigen::Index c = 0; c < nf; ++c) out[free_cols[c]] = std::clamp(sol[c], -1.0, 1.0);
    return true;
  }

  Vec f_;
  Mat b_;
  std::vector<char> zero_;
  double l1_;
};

}  // namespace

AbsLoss abs_loss_of(const LocalObjective& obj) {
  require(obj.kind == ProblemKind::kL1Lasso, ErrorCode::kParameter, "abs_loss_of: objective is not l1-regression");
  AbsLoss loss{obj.features, obj.labels, Vec::Constant(obj.sample_count(), 1.0 / static_cast<double>(obj.sample_count()))};
  return loss;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

Vec soft_threshold(const Vec& v, double t) {
  require(t >= 0.0, ErrorCode::kParameter, "soft_threshold: negative threshold");
  Vec out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = soft_threshold(v[k], t);
  return out;
}

double l1_residual(const Vec& grad, const Vec& x, double lambda) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double r = x[k] != 0.0 ? grad[k] + lambda * sign(x[k]) : std::max(std::abs(grad[k]) - lambda, 0.0);
    acc += r * r;
  }
  return std::sqrt(acc);
}

double composite_residual(const Vec& x, const Vec& smooth_grad, const AbsLoss& loss, double l1, double kink_tol) {
  const Eigen::Index d = x.size();
  Vec f = smooth_grad;
  std::vector<Eigen::Index> kinks;
  if (loss.rows.rows() > 0) {
    const Vec r = loss.rows * x - loss.offsets;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      if (std::abs(r[j]) <= kink_tol) kinks.push_back(j);
      else f += loss.weights[j] * sign(r[j]) * loss.rows.row(j).transpose();
    }
  }
  std::vector<char> zero(static_cast<std::size_t>(d), 0);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (std::abs(x[k]) <= kink_tol) zero[static_cast<std::size_t>(k)] = 1;
    else f[k] += l1 * sign(x[k]);
  }
  Mat b(d, static_cast<Eigen::Index>(kinks.size()));
  for (std::size_t c = 0; c < kinks.size(); ++c)
    b.col(static_cast<Eigen::Index>(c)) = loss.weights[kinks[c]] * loss.rows.row(kinks[c]).transpose();
  return std::sqrt(KinkMultiplierProblem(std::move(f), std::move(b), std::move(zero), l1).minimize());
}

SubproblemResult solve_smooth(const QuadraticTerm& q) {
  require(q.matrix.rows() == q.linear.size() && q.matrix.cols() == q.linear.size(), ErrorCode::kShape,
          "solve_smooth: dimension mismatch");
  Eigen::LLT<Mat> llt(q.matrix);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kDegenerateParameter, "solve_smooth: matrix not positive definite");
  SubproblemResult res;
  res.x = llt.solve(-q.linear);
  res.residual = (q.matrix * res.x + q.linear).norm();
  res.inner_iterations = 1;
  if (!res.x.allFinite()) fail(ErrorCode::kDegenerateParameter, "solve_smooth: non-finite solution");
  return res;
}

SubproblemResult solve_lasso_quadratic(const QuadraticTerm& q, double lambda, const InnerOptions& opts,
                                       const Vec* warm_start, std::vector<double>* restart_objectives) {
  const Eigen::Index d = q.linear.size();
  require(q.matrix.rows() == d && q.matrix.cols() == d, ErrorCode::kShape, "solve_lasso_quadratic: dimension mismatch");
  require(lambda >= 0.0, ErrorCode::kParameter, "solve_lasso_quadratic: lambda must be nonnegative");
  const Vec spectrum = symmetric_eigenvalues(q.matrix);
  if (!(spectrum[0] > 0.0)) fail(ErrorCode::kDegenerateParameter, "solve_lasso_quadratic: matrix not positive definite");
  const double step = 1.0 / spectrum[d - 1];

  Vec x = (warm_start && warm_start->size() == d) ? *warm_start : Vec::Zero(d);
  double fx = lasso_objective(q, lambda, x);
  Vec y = x;
  double t = 1.0;
  Vec best = x;
  double best_res = std::numeric_limits<double>::infinity();

  for (int it = 0; it <= opts.max_inner; ++it) {
    if (it % 10 == 0) {
      const double res = l1_residual(q.matrix * x + q.linear, x, lambda);
      if (res < best_res) {
        best_res = res;
        best = x;
      }
      if (res <= opts.tol) return {x, res, it};
      Vec polished;
      if (polish_lasso(q, lambda, x, polished)) {
        const double pres = l1_residual(q.matrix * polished + q.linear, polished, lambda);
        if (pres <= opts.tol) return {polished, pres, it};
      }
    }
    if (it == opts.max_inner) break;

    const Vec next = soft_threshold(y - step * (q.matrix * y + q.linear), step * lambda);
    const double fn = lasso_objective(q, lambda, next);
    if (fn > fx) {
      if (restart_objectives) restart_objectives->push_back(fx);
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
  throw NonconvergedError("solve_lasso_quadratic: residual " + sci(best_res) + " above tolerance after " +
                              std::to_string(opts.max_inner) + " iterations",
                          best, best_res);
}

namespace {

// Solve the stationarity system of min beta/2|x|^2 + linear'x + loss + l1|x|_1
// with a guessed set of kink terms and zero coordinates held fixed.
Vec polish_piecewise(double beta, const Vec& linear, const AbsLoss& loss, double l1, const Vec& x,
                     const std::vector<char>& is_kink, const std::vector<double>& term_sign,
                     const std::vector<char>& is_zero) {
  const Eigen::Index d = x.size();
  std::vector<Eigen::Index> kinks, zeros;
  Vec rhs_top = -linear;
  for (Eigen::Index j = 0; j < loss.rows.rows(); ++j) {
    if (is_kink[static_cast<std::size_t>(j)]) kinks.push_back(j);
    else rhs_top -= loss.weights[j] * term_sign[static_cast<std::size_t>(j)] * loss.rows.row(j).transpose();
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (is_zero[static_cast<std::size_t>(k)]) zeros.push_back(k);
    else rhs_top[k] -= l1 * sign(x[k]);
  }
  const auto nz = static_cast<Eigen::Index>(kinks.size());
  const auto nc = static_cast<Eigen::Index>(zeros.size());
  const Eigen::Index n = d + nz + nc;
  Mat sys = Mat::Zero(n, n);
  Vec rhs = Vec::Zero(n);
  sys.topLeftCorner(d, d).diagonal().setConstant(beta);
  rhs.head(d) = rhs_top;
  for (Eigen::Index c = 0; c < nz; ++c) {
    const auto j = kinks[static_cast<std::size_t>(c)];
    sys.block(0, d + c, d, 1) = loss.weights[j] * loss.rows.row(j).transpose();
    sys.block(d + c, 0, 1, d) = loss.rows.row(j);
    rhs[d + c] = loss.offsets[j];
  }
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto k = zeros[static_cast<std::size_t>(c)];
    sys(k, d + nz + c) = l1;
    sys(d + nz + c, k) = 1.0;
  }
  Vec sol = sys.colPivHouseholderQr().solve(rhs);
  Vec out = sol.head(d);
  for (auto k : zeros) out[k] = 0.0;
  return out;
}

}  // namespace

SubproblemResult solve_piecewise_linear(double beta, const Vec& linear, const AbsLoss& loss, double l1,
                                        const InnerOptions& opts, const Vec* warm_start) {
  const Eigen::Index d = linear.size();
  const Eigen::Index m = loss.rows.rows();
  require(loss.rows.cols() == d && loss.offsets.size() == m && loss.weights.size() == m, ErrorCode::kShape,
          "solve_piecewise_linear: dimension mismatch");
  require(beta >= 0.0 && l1 >= 0.0, ErrorCode::kParameter, "solve_piecewise_linear: beta and l1 must be nonnegative");
  require(m > 0 || beta > 0.0, ErrorCode::kDegenerateParameter, "solve_piecewise_linear: unbounded problem");

  const double gradient_scale = 1.0 + linear.cwiseAbs().maxCoeff() + l1 + (m > 0 ? loss.weights.cwiseAbs().sum() : 0.0);
  const double kink_tol = 1e-9 * (1.0 + (m > 0 ? loss.offsets.cwiseAbs().maxCoeff() : 0.0));
  auto residual_of = [&](const Vec& x) { return composite_residual(x, beta * x + linear, loss, l1, kink_tol); };

  Vec x = (warm_start && warm_start->size() == d) ? *warm_start : Vec::Zero(d);
  if (m == 0) {
    x = -soft_threshold(linear, l1) / beta;
    return {x, residual_of(x), 1};
  }

  const double knorm = std::sqrt(std::max(symmetric_eigenvalues(loss.rows.transpose() * loss.rows).maxCoeff(), 1e-300));
  // Balance the primal and dual steps against the scale of the objective.
  const double balance = std::max(gradient_scale / (beta + knorm), 1e-3);
  double tau = 0.99 * balance / knorm;
  double sigma = 0.99 / (balance * knorm);

  Vec y = Vec::Zero(m);
  Vec xbar = x;
  Vec best = x;
  double best_res = std::numeric_limits<double>::infinity();
  const double snap = 1e-7 * gradient_scale;

  for (int it = 0; it <= opts.max_inner; ++it) {
    if (it % 20 == 0 && it > 0) {
      const Vec r = loss.rows * x - loss.offsets;
      std::vector<double> term_sign(static_cast<std::size_t>(m));
      // Near-degenerate optima (a multiplier close to its bound) converge
      // slowly, so looser primal snaps are tried as well.
      std::vector<std::vector<char>> kink_sets(4, std::vector<char>(static_cast<std::size_t>(m)));
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const bool saturated = std::abs(y[j]) >= loss.weights[j];
        kink_sets[0][jj] = !saturated;
        for (int s = 1; s < 4; ++s)
          kink_sets[s][jj] = std::abs(r[j]) <= snap * std::pow(100.0, s - 1) * (1.0 + std::abs(loss.offsets[j]));
        term_sign[jj] = saturated ? sign(y[j]) : (r[j] >= 0 ? 1.0 : -1.0);
      }
      std::vector<std::vector<char>> zero_sets(3, std::vector<char>(static_cast<std::size_t>(d)));
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        zero_sets[0][kk] = x[k] == 0.0;
        zero_sets[1][kk] = std::abs(x[k]) <= snap;
        zero_sets[2][kk] = std::abs(x[k]) <= 1e4 * snap;
      }
      for (const auto& kinks : kink_sets) {
        for (const auto& zeros : zero_sets) {
          const Vec cand = polish_piecewise(beta, linear, loss, l1, x, kinks, term_sign, zeros);
          if (!cand.allFinite()) continue;
          const double res = residual_of(cand);
          if (res < best_res) {
            best_res = res;
            best = cand;
          }
          if (res <= opts.tol) return {cand, res, it};
        }
      }
    }
    if (it == opts.max_inner) break;

    const Vec y_next = (y + sigma * (loss.rows * xbar - loss.offsets)).cwiseMax(-loss.weights).cwiseMin(loss.weights);
    const Vec x_next = soft_threshold(x - tau * (loss.rows.transpose() * y_next + linear), tau * l1) / (1.0 + tau * beta);
    const double theta = beta > 0.0 ? 1.0 / std::sqrt(1.0 + 2.0 * beta * tau) : 1.0;
    xbar = x_next + theta * (x_next - x);
    x = x_next;
    y = y_next;
    if (beta > 0.0) {
      tau *= theta;
      sigma /= theta;
    }
  }
  const double raw = residual_of(x);
  if (raw < best_res) {
    best_res = raw;
    best = x;
  }
  if (best_res <= opts.tol) return {best, best_res, opts.max_inner};
  throw NonconvergedError("solve_piecewise_linear: residual " + sci(best_res) + " above tolerance after " +
                              std::to_string(opts.max_inner) + " iterations",
                          best, best_res);
}

SubproblemResult solve_nonsmooth(double beta, const Vec& linear, const LocalObjective& obj, const InnerOptions& opts,
                                 const Vec* warm_start) {
  require(obj.kind == ProblemKind::kL1Lasso, ErrorCode::kParameter, "solve_nonsmooth: objective must be l1-regression");
  require(beta > 0.0, ErrorCode::kDegenerateParameter, "solve_nonsmooth: beta must be positive");
  return solve_piecewise_linear(beta, linear, abs_loss_of(obj), obj.lambda, opts, warm_start);
}

}  // namespace amml
