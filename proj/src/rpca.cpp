#include "lorank/rpca.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lorank/svd.hpp"

namespace lorank {

void PcpConfig::validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("pcp: lambda must be positive");
    if (mu && !(*mu > 0.0)) throw std::invalid_argument("pcp: mu must be positive");
    if (!(rel_tol > 0.0 && rel_tol < 1.0))
        throw std::invalid_argument("pcp: rel_tol must be in (0,1)");
    if (max_iter < 1) throw std::invalid_argument("pcp: max_iter must be >= 1");
}

double auto_mu(const Matrix& m) {
    const double l1 = l1_norm(m);
    if (l1 == 0.0) throw std::invalid_argument("auto_mu: zero matrix");
    return static_cast<double>(m.rows() * m.cols()) / (4.0 * l1);
}

double default_lambda(const Matrix& m) {
    return 1.0 / std::sqrt(static_cast<double>(std::max(m.rows(), m.cols())));
}

PcpSolution pcp(const Matrix& m, const PcpConfig& config,
                std::vector<double>* residual_history) {
    config.validate();
    if (!m.is_finite()) throw std::invalid_argument("pcp: non-finite input");

    PcpSolution sol;
    sol.l = Matrix(m.rows(), m.cols());
    sol.s = Matrix(m.rows(), m.cols());
    const double m_norm = fro_norm(m);
    if (m_norm == 0.0) {
        sol.converged = true;
        return sol;
    }

    const double mu = config.mu ? *config.mu : auto_mu(m);
    const double svt_tau = 1.0 / mu;
    const double shrink_tau = config.lambda / mu;

    Matrix lambda_mult(m.rows(), m.cols());
    Matrix work(m.rows(), m.cols());
    const std::size_t nn = m.size();

    double prev_residual = std::numeric_limits<double>::infinity();
    std::size_t growth_streak = 0;

    for (std::size_t k = 1; k <= config.max_iter; ++k) {
        // L-step: D_{1/mu}(M - S - Lambda/mu)
        for (std::size_t i = 0; i < nn; ++i)
            work.data()[i] = m.data()[i] - sol.s.data()[i] - lambda_mult.data()[i] / mu;
        sol.l = svt(work, svt_tau);

        // S-step: S_{lambda/mu}(M - L - Lambda/mu)
        for (std::size_t i = 0; i < nn; ++i)
            work.data()[i] = m.data()[i] - sol.l.data()[i] - lambda_mult.data()[i] / mu;
        sol.s = soft_threshold(work, shrink_tau);

        // Multiplier step and feasibility residual on M - L - S.
        double gap_sq = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            const double gap = sol.l.data()[i] + sol.s.data()[i] - m.data()[i];
            lambda_mult.data()[i] += mu * gap;
            gap_sq += gap * gap;
        }
        const double residual = std::sqrt(gap_sq) / m_norm;
        if (residual_history) residual_history->push_back(residual);
        if (!std::isfinite(residual))
            throw NumericError("pcp: non-finite residual at iteration " + std::to_string(k));

        sol.iterations = k;
        sol.final_residual = residual;
        if (residual <= config.rel_tol) {
            sol.converged = true;
            return sol;
        }
        if (residual > prev_residual) {
            if (++growth_streak >= 50)
                throw NumericError("pcp: diverging, residual grew for 50 consecutive "
                                   "iterations, last " + format_real(residual) +
                                   " at iteration " + std::to_string(k));
        } else {
            growth_streak = 0;
        }
        prev_residual = residual;
    }
    return sol;
}

void write_pcp_solution(std::ostream& out, const PcpSolution& sol) {
    out << sol.iterations << ' ' << format_real(sol.final_residual) << ' '
        << (sol.converged ? 1 : 0) << '\n';
    write_matrix(out, sol.l);
    write_matrix(out, sol.s);
}

PcpSolution read_pcp_solution(std::istream& in) {
    std::size_t line_no = 0;
    std::string header;
    if (!std::getline(in, header)) throw ParseError("line 1: missing pcp diagnostics header");
    ++line_no;
    std::istringstream hs(header);
    PcpSolution sol;
    int conv = 0;
    if (!(hs >> sol.iterations >> sol.final_residual >> conv))
        throw ParseError("line 1: bad pcp diagnostics header");
    sol.converged = conv != 0;
    sol.l = read_matrix(in, &line_no);
    sol.s = read_matrix(in, &line_no);
    return sol;
}

}  // namespace lorank
