#pragma once

#include <map>

#include "lorank/generator.hpp"
#include "lorank/matrix.hpp"
#include "lorank/rpca.hpp"
#include "lorank/subspace.hpp"

namespace lorank {

/// Machine-readable experiment result. Serializes to JSON with sorted keys
/// and 17-significant-digit reals so reruns are byte-identical.
struct ExperimentReport {
    std::string name;
    std::map<std::string, std::string> parameters;  // includes declared thresholds
    std::map<std::string, double> metrics;
    std::vector<std::string> artifacts;
    bool pass = true;

    std::string to_json() const;
};

/// Per-pixel |before - after|.
struct Heatmap {
    Matrix values;
};

Heatmap make_heatmap(const std::vector<double>& before, const std::vector<double>& after,
                     std::size_t grid);
/// Sum of heatmap entries; equals the l1 distance between the outputs.
double heatmap_total(const Heatmap& h);

/// Mean squared difference over indices NOT in `exclude`.
double masked_mse(const std::vector<double>& before, const std::vector<double>& after,
                  const RegionMask& exclude);

/// Mean squared difference over the region itself.
double region_mse(const std::vector<double>& before, const std::vector<double>& after,
                  const RegionMask& region);

/// PCP + rank configuration for region-Gram pipelines. Region Grams of the
/// toy zoo are exactly low rank, so lambda defaults high enough that the
/// clean structure survives the split; rank_tol sits between the solver's
/// residual floor and the true spectrum.
struct RegionPcpConfig {
    double lambda = 1.0;
    double mu_scale = 25.0;  // mu = mu_scale * auto_mu(gram)
    double rel_tol = 1e-7;
    std::size_t max_iter = 10000;
    double rank_tol = 1e-3;

    PcpConfig pcp_for(const Matrix& gram) const;
};

AttributeBasis region_basis(const Matrix& j, const RegionMask& region,
                            const RegionPcpConfig& cfg);

// ---- experiments -----------------------------------------------------------

struct NullspaceThresholds {
    double max_change_b_abs = 1e-8;   // separable regime
    double max_ratio_b_to_a = 1e-3;   // coupled regime
    double min_change_a = 1e-2;
    bool use_absolute = true;         // absolute bound vs ratio bound
};

/// Fig. 3 analog: move along a direction inside region-B's null space
/// (the projection of region-A's top attribute onto the columns beyond
/// rank) and compare the change in both regions. Writes before/after/heatmap
/// PGMs when artifact_dir is nonempty.
ExperimentReport nullspace_effect(const Generator& g, const std::vector<double>& z,
                                  const RegionMask& mask_a, const RegionMask& mask_b,
                                  double alpha, const RegionPcpConfig& cfg,
                                  const NullspaceThresholds& thr,
                                  const std::string& artifact_dir = "",
                                  Heatmap* heatmap_out = nullptr);

struct ProjectionThresholds {
    double max_mse_factor = 0.1;  // with-projection <= factor * without
};

/// Table 1a analog: edit along v1 of region A with and without null-space
/// projection; report masked MSE outside region A for both.
ExperimentReport projection_comparison(const Generator& g, const std::vector<double>& z,
                                       const RegionMask& mask_a, const RegionMask& mask_b,
                                       double alpha, std::size_t r_relax,
                                       const RegionPcpConfig& cfg,
                                       const ProjectionThresholds& thr);

struct GeneralizationThresholds {
    double min_ratio = 10.0;     // region-A change >= ratio * region-B change
    double min_fraction = 0.9;   // of targets
};

/// One-sample-to-many analog: the projected direction computed at z_ref is
/// applied at every target latent.
ExperimentReport generalization(const Generator& g, const std::vector<double>& z_ref,
                                const std::vector<std::vector<double>>& z_targets,
                                const RegionMask& mask_a, const RegionMask& mask_b,
                                double alpha, std::size_t r_relax,
                                const RegionPcpConfig& cfg,
                                const GeneralizationThresholds& thr);

struct MaskRobustnessThresholds {
    double min_mean_abs_cos = 0.9;
};

/// Mask-robustness analog: projected top directions from sub-boxes of
/// region A; small submasks (< 50% of A) honor the r_relax = 20 preset,
/// clamped to the basis rank.
ExperimentReport mask_robustness(const Generator& g, const std::vector<double>& z,
                                 const std::vector<RegionMask>& submasks,
                                 const RegionMask& mask_b, double alpha,
                                 const RegionPcpConfig& cfg,
                                 const MaskRobustnessThresholds& thr);

/// Per-layer numerical ranks of J_{z_k}^T J_{z_k}; asserts the sequence is
/// nonincreasing and, when intrinsic_dim < d_z, that the first rank < d_z.
ExperimentReport rank_monotonicity(const Generator& g, const std::vector<double>& z,
                                   double rel_tol);

struct DirectionGainThresholds {
    std::size_t min_beaten = 99;  // of n_random
};

/// Closed-form principal direction vs seeded random unit directions at
/// small alpha (the variance-maximization objective, sampled).
ExperimentReport principal_direction_gain(const Generator& g, const std::vector<double>& z,
                                          const RegionMask& region, double alpha,
                                          std::size_t n_random, std::uint64_t seed,
                                          const DirectionGainThresholds& thr);

/// Retained-component norm ||(I - B1 B1^T) v_i|| as r_relax runs 0..rank;
/// asserts it never decreases.
ExperimentReport relaxation_monotonicity(const Generator& g, const std::vector<double>& z,
                                         const RegionMask& mask_a, const RegionMask& mask_b,
                                         const RegionPcpConfig& cfg);

/// Appendix-C analog sweep over lambda = 1/n; reports effective rank and
/// null-space dimension of region B per n plus projection metrics, and
/// asserts the null-space dimension is nondecreasing in n.
ExperimentReport lambda_sweep(const Generator& g, const std::vector<double>& z,
                              const RegionMask& mask_a, const RegionMask& mask_b,
                              const std::vector<std::size_t>& n_values,
                              const RegionPcpConfig& cfg);

struct RecoveryThresholds {
    double max_recovery_error = 1e-5;
    double max_seconds_per_solve = 10.0;
    double max_feasibility = 1e-7;
};

/// Exact-recovery battery: seeded rank-r + sparse instances at the standard
/// lambda; checks recovery error, feasibility, objective sanity against the
/// planted pair, the monotone residual tail, and wall time per solve.
ExperimentReport rpca_recovery(std::size_t n_instances, std::size_t n, std::size_t rank,
                               double corruption_frac, double magnitude,
                               const RecoveryThresholds& thr);

/// Chain rule vs central differences across a generator zoo.
ExperimentReport jacobian_check(const std::vector<std::pair<std::string, Generator>>& zoo,
                                std::size_t n_latents, double step, double tol);

// ---- verify suite -----------------------------------------------------------

/// The fixed generator zoo used by verify and the acceptance suite.
std::vector<std::pair<std::string, Generator>> standard_zoo();

/// Runs every experiment with the pinned desk-scale defaults. Reports are
/// written to out_dir (one JSON per experiment plus index.json) unless
/// out_dir is empty; `only` filters experiments by substring.
struct VerifyResult {
    std::vector<ExperimentReport> reports;
    bool all_pass = true;
};

VerifyResult run_verify_suite(const std::string& out_dir, const std::string& only = "",
                              const std::string& zoo_dir = "");

}  // namespace lorank
