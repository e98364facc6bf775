#pragma once

#include "lorank/matrix.hpp"

namespace lorank {

/// Thin SVD m = u * diag(sigma) * v^T with k = min(rows, cols) columns.
/// sigma is nonincreasing; u, v have orthonormal columns; the
/// largest-magnitude entry of each v column is positive.
struct SvdResult {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;

    Matrix reconstruct() const;
};

/// One-sided Jacobi SVD: cyclic sweeps over column pairs, rotation applied
/// when the normalized off-diagonal exceeds 1e-12, capped at 60 sweeps.
/// Fully deterministic for a given input. Throws NumericError with the
/// remaining off-diagonal residual if the cap is hit.
SvdResult svd(const Matrix& m);

/// Entrywise soft shrinkage: x -> sgn(x) * max(|x| - tau, 0).
Matrix soft_threshold(const Matrix& m, double tau);

/// Singular value thresholding D_tau(m) = u * soft_threshold(sigma, tau) * v^T.
Matrix svt(const Matrix& m, double tau);

/// Sum of singular values.
double nuclear_norm(const Matrix& m);

/// Count of singular values above rel_tol * sigma_max; 0 for the zero matrix.
std::size_t numerical_rank(const Matrix& m, double rel_tol);

}  // namespace lorank
