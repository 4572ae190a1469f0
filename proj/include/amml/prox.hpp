#pragma once

#include <vector>

#include "amml/linalg.hpp"
#include "amml/problems.hpp"

namespace amml {

// 1/2 x'Mx + linear'x.
struct QuadraticTerm {
  Mat matrix;
  Vec linear;
};

struct SubproblemResult {
  Vec x;
  double residual = 0.0;
  int inner_iterations = 0;
};

struct InnerOptions {
  double tol = 1e-10;
  int max_inner = 5000;
};

// sum_j weights_j |rows_j' x - offsets_j|
struct AbsLoss {
  Mat rows;
  Vec offsets;
  Vec weights;
};

// The absolute-error part of an l1-regression node objective: weights 1/m.
AbsLoss abs_loss_of(const LocalObjective& obj);

double soft_threshold(double v, double t);
Vec soft_threshold(const Vec& v, double t);

// dist(-grad, lambda * subdiff |x|_1); coordinates count as zero only when
// exactly zero.
double l1_residual(const Vec& grad, const Vec& x, double lambda);

// dist(-smooth_grad, subdiff[loss + l1 |.|_1](x)). A term counts as sitting on
// its kink when |residual| <= kink_tol, and likewise for zero coordinates. The
// multipliers of kink terms are optimized over their box, so the returned value
// is the exact distance up to the accuracy of that small box-constrained
// least-squares problem (it is never an underestimate).
double composite_residual(const Vec& x, const Vec& smooth_grad, const AbsLoss& loss, double l1,
                          double kink_tol = 1e-9);

// x = -M^{-1} linear via Cholesky. Throws kDegenerateParameter if M is not
// positive definite.
SubproblemResult solve_smooth(const QuadraticTerm& q);

// min 1/2 x'Mx + linear'x + lambda |x|_1 by accelerated proximal gradient
// (step 1/lambda_max(M), function-value restarts) with periodic support
// polishing. When `restart_objectives` is given, the objective value at every
// restart event is appended to it.
SubproblemResult solve_lasso_quadratic(const QuadraticTerm& q, double lambda, const InnerOptions& opts,
                                       const Vec* warm_start = nullptr,
                                       std::vector<double>* restart_objectives = nullptr);

// min beta/2 |x|^2 + linear'x + loss(x) + l1 |x|_1 by primal-dual splitting
// (accelerated when beta > 0) with active-set polishing. beta may be zero when
// the problem is bounded.
SubproblemResult solve_piecewise_linear(double beta, const Vec& linear, const AbsLoss& loss, double l1,
                                        const InnerOptions& opts, const Vec* warm_start = nullptr);

// x-update for an l1-regression node: min beta/2 |x|^2 + linear'x + r_i(x).
SubproblemResult solve_nonsmooth(double beta, const Vec& linear, const LocalObjective& obj,
                                 const InnerOptions& opts, const Vec* warm_start = nullptr);

}  // namespace amml
