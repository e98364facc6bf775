#include "lorank/svd.hpp"

#include <algorithm>
#include <numeric>

namespace lorank {

namespace {

constexpr double kRotationTol = 1e-12;
constexpr int kMaxSweeps = 60;

// Columns of the working copy and of V live contiguously so that the
// rotation inner loops vectorize.
struct ColumnMajor {
    std::size_t rows, cols;
    std::vector<double> a;

    explicit ColumnMajor(const Matrix& m) : rows(m.rows()), cols(m.cols()), a(rows * cols) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) a[j * rows + i] = m(i, j);
    }
    double* col(std::size_t j) { return a.data() + j * rows; }
};

void rotate(double* p, double* q, std::size_t n, double cs, double sn) {
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p[i], qi = q[i];
        p[i] = cs * pi - sn * qi;
        q[i] = sn * pi + cs * qi;
    }
}

// Orthonormal completion for zero singular values: project canonical basis
// vectors against the filled columns and keep the first with enough mass.
void complete_basis(Matrix& u, std::size_t filled) {
    const std::size_t m = u.rows(), k = u.cols();
    std::size_t cand = 0;
    for (std::size_t j = filled; j < k; ++j) {
        for (; cand <= m; ++cand) {
            if (cand == m)
                throw NumericError("svd: failed to complete orthonormal basis");
            std::vector<double> v(m, 0.0);
            v[cand] = 1.0;
            for (std::size_t c = 0; c < j; ++c) {
                double d = 0.0;
                for (std::size_t i = 0; i < m; ++i) d += u(i, c) * v[i];
                for (std::size_t i = 0; i < m; ++i) v[i] -= d * u(i, c);
            }
            double nv = norm(v);
            if (nv > 0.5) {
                for (std::size_t i = 0; i < m; ++i) u(i, j) = v[i] / nv;
                ++cand;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& m) {
    const std::size_t rows = m.rows(), n = m.cols();
    ColumnMajor work(m);
    ColumnMajor vwork(Matrix::identity(n));

    std::vector<double> sq(n);
    double off = 0.0;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        // Fresh norms each sweep; within a sweep they are maintained by the
        // rotation identities ||p'||^2 = ||p||^2 - t*apq, ||q'||^2 = ||q||^2 + t*apq.
        for (std::size_t j = 0; j < n; ++j) {
            const double* cj = work.col(j);
            double s = 0.0;
            for (std::size_t i = 0; i < rows; ++i) s += cj[i] * cj[i];
            sq[j] = s;
        }
        off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double app = sq[p], aqq = sq[q];
                if (app <= 0.0 || aqq <= 0.0) continue;
                double* cp = work.col(p);
                double* cq = work.col(q);
                double apq = 0.0;
                for (std::size_t i = 0; i < rows; ++i) apq += cp[i] * cq[i];
                const double rel = std::fabs(apq) / std::sqrt(app * aqq);
                off = std::max(off, rel);
                if (rel <= kRotationTol) continue;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * cs;
                rotate(cp, cq, rows, cs, sn);
                rotate(vwork.col(p), vwork.col(q), n, cs, sn);
                sq[p] = app - t * apq;
                sq[q] = aqq + t * apq;
            }
        }
        if (off <= kRotationTol) converged = true;
    }
    if (!converged)
        throw NumericError("svd: one-sided Jacobi did not converge in " +
                           std::to_string(kMaxSweeps) +
                           " sweeps; off-diagonal residual " + format_real(off));

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* cj = work.col(j);
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += cj[i] * cj[i];
        sigma[j] = std::sqrt(s);
    }

    // Sort nonincreasing; ties keep original column order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    SvdResult res;
    res.u = Matrix(rows, n);
    res.v = Matrix(n, n);
    res.sigma.resize(n);
    std::size_t filled = n;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        res.sigma[j] = sigma[src];
        const double* vc = vwork.col(src);

        // Sign convention: largest-magnitude component of the right singular
        // vector is positive (first index wins ties).
        double best = 0.0;
        double sign = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::fabs(vc[i]) > best) {
                best = std::fabs(vc[i]);
                sign = vc[i] < 0.0 ? -1.0 : 1.0;
            }
        }
        for (std::size_t i = 0; i < n; ++i) res.v(i, j) = sign * vc[i];
        if (sigma[src] > 0.0) {
            const double* ac = work.col(src);
            const double inv = sign / sigma[src];
            for (std::size_t i = 0; i < rows; ++i) res.u(i, j) = ac[i] * inv;
        } else if (filled == n) {
            filled = j;  // zero block starts here; completed below
        }
    }
    if (filled < n) complete_basis(res.u, filled);
    return res;
}

}  // namespace

Matrix SvdResult::reconstruct() const {
    const std::size_t m = u.rows(), n = v.rows(), k = sigma.size();
    Matrix out(m, n);
    for (std::size_t t = 0; t < k; ++t) {
        if (sigma[t] == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
            const double us = u(i, t) * sigma[t];
            for (std::size_t j = 0; j < n; ++j) out(i, j) += us * v(j, t);
        }
    }
    return out;
}

SvdResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("svd: empty matrix");
    if (!m.is_finite()) throw std::invalid_argument("svd: non-finite input");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(transpose(m));
    SvdResult res;
    res.u = std::move(t.v);
    res.v = std::move(t.u);
    res.sigma = std::move(t.sigma);
    // Re-apply the sign convention, now relative to the v side.
    const std::size_t k = res.sigma.size();
    for (std::size_t j = 0; j < k; ++j) {
        double best = 0.0, sign = 1.0;
        for (std::size_t i = 0; i < res.v.rows(); ++i) {
            if (std::fabs(res.v(i, j)) > best) {
                best = std::fabs(res.v(i, j));
                sign = res.v(i, j) < 0.0 ? -1.0 : 1.0;
            }
        }
        if (sign < 0.0) {
            for (std::size_t i = 0; i < res.v.rows(); ++i) res.v(i, j) = -res.v(i, j);
            for (std::size_t i = 0; i < res.u.rows(); ++i) res.u(i, j) = -res.u(i, j);
        }
    }
    return res;
}

Matrix soft_threshold(const Matrix& m, double tau) {
    if (tau < 0.0) throw std::invalid_argument("soft_threshold: negative tau");
    Matrix out = m;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = out.data()[i];
        const double mag = std::fabs(x) - tau;
        out.data()[i] = mag > 0.0 ? (x < 0.0 ? -mag : mag) : 0.0;
    }
    return out;
}

Matrix svt(const Matrix& m, double tau) {
    if (tau < 0.0) throw std::invalid_argument("svt: negative tau");
    SvdResult s = svd(m);
    for (double& si : s.sigma) si = std::max(si - tau, 0.0);
    return s.reconstruct();
}

double nuclear_norm(const Matrix& m) {
    SvdResult s = svd(m);
    double total = 0.0;
    for (double si : s.sigma) total += si;
    return total;
}

std::size_t numerical_rank(const Matrix& m, double rel_tol) {
    if (rel_tol <= 0.0 || rel_tol >= 1.0)
        throw std::invalid_argument("numerical_rank: rel_tol must be in (0,1)");
    SvdResult s = svd(m);
    if (s.sigma.empty() || s.sigma[0] == 0.0) return 0;
    const double cut = rel_tol * s.sigma[0];
    std::size_t r = 0;
    while (r < s.sigma.size() && s.sigma[r] > cut) ++r;
    return r;
}

}  // namespace lorank
