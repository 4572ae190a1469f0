#pragma once

#include "amml/linalg.hpp"
#include "amml/problems.hpp"
#include "amml/prox.hpp"

namespace amml {

struct OracleOptions {
  double tol = 1e-9;
  int max_iter = 200000;
};

struct OracleResult {
  Vec x_star;
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Minimizes sum_i s_i + r_i over a single shared variable. Least squares and
// logistic use accelerated proximal gradient (logistic finishes with Newton
// steps); l1-regression uses primal-dual splitting with active-set polishing.
// Throws NonconvergedError carrying the best iterate when the residual stays
// above tol.
OracleResult solve_centralized(const ProblemInstance& inst, const OracleOptions& opts = {});

// dist(-sum_i grad s_i(x), subdiff sum_i r_i(x)). Solver independent.
double certify(const ProblemInstance& inst, const Vec& x);

// Second, unrelated route to the same optimum for cross-checking the oracle:
// plain (non-accelerated) proximal gradient for the smooth kinds and
// exhaustive vertex enumeration for l1-regression (small d only).
Vec solve_reference(const ProblemInstance& inst, int iterations = 200000);

// Labels inst.x_star; returns the certified residual.
double label_instance(ProblemInstance& inst, const OracleOptions& opts = {});

}  // namespace amml
