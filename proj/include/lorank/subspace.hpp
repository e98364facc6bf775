#pragma once

#include "lorank/generator.hpp"
#include "lorank/matrix.hpp"
#include "lorank/rpca.hpp"

namespace lorank {

/// Attribute directions of a region: right singular vectors of the
/// recovered low-rank Gram, ordered by nonincreasing singular value.
/// The first `rank` columns span the attribute subspace; the rest span
/// the region's null space.
struct AttributeBasis {
    Matrix v;                   // d_z x d_z
    std::vector<double> sigma;  // nonincreasing
    std::size_t rank = 0;       // effective rank under rank_tol
    RegionMask region;
};

struct ProjectionSpec {
    const AttributeBasis& basis_b;
    std::size_t r_relax = 0;  // small-singular-value directions released

    void validate() const;
};

struct EditRequest {
    std::vector<double> z;
    std::vector<double> direction;  // unit norm to 1e-10
    double alpha = 0.0;

    void validate(std::size_t d_z) const;
};

/// J_region^T J_region over the masked rows; symmetric PSD, d_z x d_z.
Matrix region_gram(const Matrix& j, const RegionMask& region);

/// Eigenvector of the largest eigenvalue of a symmetric PSD Gram; unit
/// norm with the svd sign convention. Throws NumericError when the top
/// two singular values agree within 1e-10 (ambiguous direction).
std::vector<double> principal_direction(const Matrix& gram);

/// pcp on the Gram, symmetrize L* by averaging with its transpose, then
/// svd; rank = numerical_rank(L*, rank_tol). `diagnostics`, when given,
/// receives the solver state of the pcp run.
AttributeBasis attribute_basis(const Matrix& gram, const RegionMask& region,
                               const PcpConfig& pcp_config, double rank_tol = 1e-6,
                               PcpSolution* diagnostics = nullptr);

/// p = (I - B1 B1^T) v_i, renormalized; B1 is the first (rank - r_relax)
/// columns of the complement basis. Throws NumericError("no local
/// direction exists") when the projection vanishes.
std::vector<double> null_project(const std::vector<double>& v_i, const ProjectionSpec& spec);

/// Retained-component norm ||(I - B1 B1^T) v_i|| before renormalization.
double projection_residual_norm(const std::vector<double>& v_i, const ProjectionSpec& spec);

/// forward(g, z + alpha * direction).
std::vector<double> edit(const Generator& g, const EditRequest& req);

/// Basis file: v in the matrix text format, one line of singular values,
/// then "rank idx0 idx1 ...".
void write_basis(std::ostream& out, const AttributeBasis& basis);
AttributeBasis read_basis(std::istream& in);
void save_basis(const std::string& path, const AttributeBasis& basis);
AttributeBasis load_basis(const std::string& path);

}  // namespace lorank
