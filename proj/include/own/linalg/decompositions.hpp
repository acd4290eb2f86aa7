#pragma once

#include <vector>

#include "own/linalg/matrix.hpp"

namespace own {

// Eigen-decomposition of a symmetric matrix: s = vectors·diag(values)·vectorsᵀ.
// values are sorted non-increasing; each column of vectors has its
// largest-magnitude entry non-negative (first such entry on ties).
struct EigPair {
  std::vector<double> values;
  Matrix vectors;
};

// Thin QR with R's diagonal strictly positive, which makes the factorization
// unique for full column rank input.
struct QrPair {
  Matrix q;  // n×d, orthonormal columns
  Matrix r;  // d×d, upper triangular
};

struct JacobiOptions {
  double relative_tolerance = 1e-12;  // off-diagonal ‖·‖_F relative to ‖s‖_F
  int max_sweeps = 100;
};

// Cyclic Jacobi. The input is symmetrized first; asymmetry above 1e-10
// (relative to 1 + ‖s‖_F) is rejected as a ValueError.
EigPair sym_eig(const Matrix& s, const JacobiOptions& options = {});

// Householder QR. Throws RankError naming the first column whose R diagonal
// falls below 1e-12·‖a‖_F.
QrPair qr_unique(const Matrix& a);

// Solves a·x = b by Gaussian elimination with partial pivoting. Throws
// SingularityError when a pivot falls below 1e-12·‖a‖_F.
Matrix solve_small(const Matrix& a, const Matrix& b);

}  // namespace own
