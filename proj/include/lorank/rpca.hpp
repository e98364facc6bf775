#pragma once

#include <optional>

#include "lorank/matrix.hpp"

namespace lorank {

/// Principal Component Pursuit configuration.
/// lambda weights the l1 term; mu is the augmented-Lagrangian penalty
/// (empty = auto_mu); the solve stops when the relative feasibility
/// residual ||M - L - S||_F / ||M||_F drops to rel_tol.
struct PcpConfig {
    double lambda = 0.0;                 // required, > 0
    std::optional<double> mu;            // empty: auto_mu(m)
    double rel_tol = 1e-7;
    std::size_t max_iter = 1000;

    void validate() const;
};

struct PcpSolution {
    Matrix l;
    Matrix s;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

/// min ||L||_* + lambda ||S||_1  s.t.  L + S = M, by ADMM:
///   L_{k+1} = D_{1/mu}(M - S_k - Lambda_k / mu)
///   S_{k+1} = S_{lambda/mu}(M - L_{k+1} - Lambda_k / mu)
///   Lambda_{k+1} = Lambda_k + mu (L_{k+1} + S_{k+1} - M)
/// from S_0 = 0, Lambda_0 = 0. The zero matrix short-circuits to L = S = 0.
/// Throws NumericError if the residual grows for 50 consecutive iterations
/// or any intermediate value turns non-finite. residual_history, when
/// given, receives the feasibility residual of every iteration.
PcpSolution pcp(const Matrix& m, const PcpConfig& config,
                std::vector<double>* residual_history = nullptr);

/// Penalty default: rows * cols / (4 * l1_norm(m)). Rejects the zero matrix.
double auto_mu(const Matrix& m);

/// Sparsity weight default: 1 / sqrt(max(rows, cols)). The 1/n convention
/// is available by passing lambda = 1/n explicitly.
double default_lambda(const Matrix& m);

/// "iterations residual converged" header followed by L and S in the
/// matrix text format.
void write_pcp_solution(std::ostream& out, const PcpSolution& sol);
PcpSolution read_pcp_solution(std::istream& in);

}  // namespace lorank
