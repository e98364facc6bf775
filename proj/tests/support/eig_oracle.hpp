#pragma once

// Verification oracle: classical two-sided Jacobi eigenvalue iteration for
// small symmetric matrices. Deliberately independent of the library's
// one-sided SVD so the two can cross-check each other.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lorank/matrix.hpp"

namespace oracle {

inline std::vector<double> symmetric_eigenvalues(lorank::Matrix a, int max_sweeps = 100) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                const double scale = std::sqrt(std::fabs(a(p, p) * a(q, q))) + 1e-300;
                off = std::max(off, std::fabs(apq) / scale);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = 0.5 * std::atan2(2.0 * apq, a(q, q) - a(p, p));
                const double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
        if (off < 1e-14) break;
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

}  // namespace oracle
