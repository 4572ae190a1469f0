#pragma once

#include <Eigen/Dense>

namespace amml {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // column j pairs with values[j]
};

// Cyclic Jacobi rotations for a dense symmetric matrix. Converges
// quadratically; intended for the small matrices used here (N, d up to a
// few hundred). Only the lower triangle is read.
SymmetricEigen jacobi_eigen(const Mat& a, bool want_vectors = true);

// Eigenvalues only, ascending.
Vec symmetric_eigenvalues(const Mat& a);

}  // namespace amml
