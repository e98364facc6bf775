#include "lorank/subspace.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lorank/svd.hpp"

namespace lorank {

void ProjectionSpec::validate() const {
    if (r_relax > basis_b.rank)
        throw std::invalid_argument("projection: r_relax exceeds basis rank");
}

void EditRequest::validate(std::size_t d_z) const {
    if (z.size() != d_z || direction.size() != d_z)
        throw std::invalid_argument("edit: dimension mismatch");
    if (std::fabs(norm(direction) - 1.0) > 1e-10)
        throw std::invalid_argument("edit: direction must be unit norm");
}

Matrix region_gram(const Matrix& j, const RegionMask& region) {
    if (region.indices.empty()) throw std::invalid_argument("region_gram: empty mask");
    if (region.indices.back() >= j.rows())
        throw std::invalid_argument("region_gram: mask index out of range");
    const std::size_t d = j.cols();
    Matrix g(d, d);
    // Accumulate J_region^T J_region; entry (a,b) and (b,a) see identical
    // products in identical order, so the result is exactly symmetric.
    for (std::size_t row : region.indices) {
        const double* r = j.data() + row * d;
        for (std::size_t a = 0; a < d; ++a) {
            const double ra = r[a];
            if (ra == 0.0) continue;
            double* ga = g.data() + a * d;
            for (std::size_t b = 0; b < d; ++b) ga[b] += ra * r[b];
        }
    }
    return g;
}

std::vector<double> principal_direction(const Matrix& gram) {
    if (gram.rows() != gram.cols())
        throw std::invalid_argument("principal_direction: non-square input");
    SvdResult s = svd(gram);
    if (s.sigma[0] == 0.0)
        throw NumericError("principal_direction: ambiguous (zero gram)");
    if (s.sigma.size() > 1 && s.sigma[0] - s.sigma[1] <= 1e-10 * s.sigma[0])
        throw NumericError("principal_direction: ambiguous, top two singular values agree "
                           "within 1e-10");
    std::vector<double> v(gram.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.v(i, 0);
    return v;
}

AttributeBasis attribute_basis(const Matrix& gram, const RegionMask& region,
                               const PcpConfig& pcp_config, double rank_tol,
                               PcpSolution* diagnostics) {
    if (gram.rows() != gram.cols())
        throw std::invalid_argument("attribute_basis: non-square gram");
    const double scale = max_abs(gram);
    for (std::size_t i = 0; i < gram.rows(); ++i)
        for (std::size_t j = i + 1; j < gram.cols(); ++j)
            if (std::fabs(gram(i, j) - gram(j, i)) > 1e-10 * std::max(1.0, scale))
                throw std::invalid_argument("attribute_basis: gram is not symmetric");

    PcpSolution sol = pcp(gram, pcp_config);
    Matrix l = sol.l;
    if (diagnostics) *diagnostics = std::move(sol);
    for (std::size_t i = 0; i < l.rows(); ++i) {
        for (std::size_t j = i + 1; j < l.cols(); ++j) {
            const double avg = 0.5 * (l(i, j) + l(j, i));
            l(i, j) = avg;
            l(j, i) = avg;
        }
    }
    SvdResult s = svd(l);
    AttributeBasis basis;
    basis.v = std::move(s.v);
    basis.sigma = std::move(s.sigma);
    basis.region = region;
    if (basis.sigma[0] > 0.0) {
        const double cut = rank_tol * basis.sigma[0];
        while (basis.rank < basis.sigma.size() && basis.sigma[basis.rank] > cut) ++basis.rank;
    }
    return basis;
}

namespace {

std::vector<double> projection_residual(const std::vector<double>& v_i,
                                        const ProjectionSpec& spec) {
    spec.validate();
    const Matrix& v = spec.basis_b.v;
    if (v_i.size() != v.rows()) throw std::invalid_argument("projection: dimension mismatch");
    const std::size_t keep = spec.basis_b.rank - spec.r_relax;
    std::vector<double> p = v_i;
    for (std::size_t c = 0; c < keep; ++c) {
        double d = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) d += v(i, c) * v_i[i];
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= d * v(i, c);
    }
    return p;
}

}  // namespace

double projection_residual_norm(const std::vector<double>& v_i, const ProjectionSpec& spec) {
    return norm(projection_residual(v_i, spec));
}

std::vector<double> null_project(const std::vector<double>& v_i, const ProjectionSpec& spec) {
    std::vector<double> p = projection_residual(v_i, spec);
    const double np = norm(p);
    if (np <= 1e-10)
        throw NumericError("no local direction exists: attribute vector lies in the "
                           "complement region's attribute span");
    for (double& x : p) x /= np;
    return p;
}

std::vector<double> edit(const Generator& g, const EditRequest& req) {
    req.validate(g.d_z);
    std::vector<double> z = req.z;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += req.alpha * req.direction[i];
    return forward(g, z);
}

void write_basis(std::ostream& out, const AttributeBasis& basis) {
    write_matrix(out, basis.v);
    for (std::size_t i = 0; i < basis.sigma.size(); ++i) {
        if (i) out << ' ';
        out << format_real(basis.sigma[i]);
    }
    out << '\n' << basis.rank;
    for (std::size_t idx : basis.region.indices) out << ' ' << idx;
    out << '\n';
}

AttributeBasis read_basis(std::istream& in) {
    std::size_t line_no = 0;
    AttributeBasis basis;
    basis.v = read_matrix(in, &line_no);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("line " + std::to_string(line_no + 1) + ": missing singular values");
    ++line_no;
    {
        std::istringstream ss(line);
        double v;
        while (ss >> v) basis.sigma.push_back(v);
        if (basis.sigma.size() != basis.v.cols())
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected one singular value per basis column");
    }
    if (!std::getline(in, line))
        throw ParseError("line " + std::to_string(line_no + 1) + ": missing rank/region line");
    ++line_no;
    {
        std::istringstream ss(line);
        if (!(ss >> basis.rank))
            throw ParseError("line " + std::to_string(line_no) + ": missing rank");
        std::vector<std::size_t> idx;
        std::size_t i;
        while (ss >> i) idx.push_back(i);
        if (idx.empty())
            throw ParseError("line " + std::to_string(line_no) + ": missing region indices");
        const std::size_t bound = idx.back() + 1;
        basis.region = RegionMask::from_indices(std::move(idx), bound);
        if (basis.rank > basis.v.cols())
            throw ParseError("line " + std::to_string(line_no) + ": rank exceeds basis size");
    }
    return basis;
}

void save_basis(const std::string& path, const AttributeBasis& basis) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_basis(out, basis);
}

AttributeBasis load_basis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_basis(in);
}

}  // namespace lorank
