#include "lorank/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "lorank/pgm.hpp"
#include "lorank/svd.hpp"

namespace lorank {

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string ExperimentReport::to_json() const {
    std::ostringstream out;
    out << "{\n  \"name\": \"" << json_escape(name) << "\",\n  \"parameters\": {";
    bool first = true;
    for (const auto& [k, v] : parameters) {
        out << (first ? "\n" : ",\n") << "    \"" << json_escape(k) << "\": \""
            << json_escape(v) << "\"";
        first = false;
    }
    out << (parameters.empty() ? "" : "\n  ") << "},\n  \"metrics\": {";
    first = true;
    for (const auto& [k, v] : metrics) {
        out << (first ? "\n" : ",\n") << "    \"" << json_escape(k) << "\": " << format_real(v);
        first = false;
    }
    out << (metrics.empty() ? "" : "\n  ") << "},\n  \"artifacts\": [";
    first = true;
    for (const auto& a : artifacts) {
        out << (first ? "\n" : ",\n") << "    \"" << json_escape(a) << "\"";
        first = false;
    }
    out << (artifacts.empty() ? "" : "\n  ") << "],\n  \"pass\": " << (pass ? "true" : "false")
        << "\n}\n";
    return out.str();
}

Heatmap make_heatmap(const std::vector<double>& before, const std::vector<double>& after,
                     std::size_t grid) {
    if (before.size() != after.size())
        throw std::invalid_argument("heatmap: length mismatch");
    Matrix img = as_image(before, grid);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data()[i] = std::fabs(before[i] - after[i]);
    return Heatmap{std::move(img)};
}

double heatmap_total(const Heatmap& h) {
    double s = 0.0;
    for (double v : h.values.entries()) s += v;
    return s;
}

double masked_mse(const std::vector<double>& before, const std::vector<double>& after,
                  const RegionMask& exclude) {
    if (before.size() != after.size())
        throw std::invalid_argument("masked_mse: length mismatch");
    if (exclude.count() >= before.size())
        throw std::invalid_argument("masked_mse: exclusion covers everything");
    double s = 0.0;
    std::size_t next = 0, kept = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (next < exclude.indices.size() && exclude.indices[next] == i) {
            ++next;
            continue;
        }
        const double d = before[i] - after[i];
        s += d * d;
        ++kept;
    }
    return s / static_cast<double>(kept);
}

double region_mse(const std::vector<double>& before, const std::vector<double>& after,
                  const RegionMask& region) {
    if (before.size() != after.size())
        throw std::invalid_argument("region_mse: length mismatch");
    double s = 0.0;
    for (std::size_t i : region.indices) {
        const double d = before[i] - after[i];
        s += d * d;
    }
    return s / static_cast<double>(region.count());
}

PcpConfig RegionPcpConfig::pcp_for(const Matrix& gram) const {
    PcpConfig cfg;
    cfg.lambda = lambda;
    if (fro_norm(gram) > 0.0) cfg.mu = mu_scale * auto_mu(gram);
    cfg.rel_tol = rel_tol;
    cfg.max_iter = max_iter;
    return cfg;
}

AttributeBasis region_basis(const Matrix& j, const RegionMask& region,
                            const RegionPcpConfig& cfg) {
    Matrix gram = region_gram(j, region);
    return attribute_basis(gram, region, cfg.pcp_for(gram), cfg.rank_tol);
}

namespace {

void record_region_config(ExperimentReport& rep, const RegionPcpConfig& cfg) {
    rep.parameters["pcp.lambda"] = format_real(cfg.lambda);
    rep.parameters["pcp.mu_scale"] = format_real(cfg.mu_scale);
    rep.parameters["pcp.rel_tol"] = format_real(cfg.rel_tol);
    rep.parameters["pcp.max_iter"] = std::to_string(cfg.max_iter);
    rep.parameters["rank_tol"] = format_real(cfg.rank_tol);
}

std::vector<double> edited(const Generator& g, const std::vector<double>& z,
                           const std::vector<double>& dir, double alpha) {
    std::vector<double> zs = z;
    for (std::size_t i = 0; i < zs.size(); ++i) zs[i] += alpha * dir[i];
    return forward(g, zs);
}

}  // namespace

ExperimentReport nullspace_effect(const Generator& g, const std::vector<double>& z,
                                  const RegionMask& mask_a, const RegionMask& mask_b,
                                  double alpha, const RegionPcpConfig& cfg,
                                  const NullspaceThresholds& thr,
                                  const std::string& artifact_dir, Heatmap* heatmap_out) {
    ExperimentReport rep;
    rep.name = "nullspace_effect";
    rep.parameters["alpha"] = format_real(alpha);
    rep.parameters["threshold.max_change_b_abs"] = format_real(thr.max_change_b_abs);
    rep.parameters["threshold.max_ratio_b_to_a"] = format_real(thr.max_ratio_b_to_a);
    rep.parameters["threshold.min_change_a"] = format_real(thr.min_change_a);
    rep.parameters["threshold.mode"] = thr.use_absolute ? "absolute" : "ratio";
    record_region_config(rep, cfg);

    const Matrix j = jacobian(g, z);
    const AttributeBasis basis_a = region_basis(j, mask_a, cfg);
    const AttributeBasis basis_b = region_basis(j, mask_b, cfg);
    if (basis_b.rank >= g.d_z)
        throw NumericError("nullspace_effect: empty null space (rank = d_z)");

    // A direction inside region-B's null space: project region-A's top
    // attribute onto the columns beyond rank (B2 B2^T v1, renormalized).
    std::vector<double> v1(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) v1[i] = basis_a.v(i, 0);
    const std::vector<double> dir = null_project(v1, ProjectionSpec{basis_b, 0});

    const std::vector<double> before = forward(g, z);
    const std::vector<double> after = edited(g, z, dir, alpha);
    const double change_a = region_mse(before, after, mask_a);
    const double change_b = region_mse(before, after, mask_b);

    rep.metrics["rank_a"] = static_cast<double>(basis_a.rank);
    rep.metrics["rank_b"] = static_cast<double>(basis_b.rank);
    rep.metrics["null_dim_b"] = static_cast<double>(g.d_z - basis_b.rank);
    rep.metrics["change_a"] = change_a;
    rep.metrics["change_b"] = change_b;
    rep.metrics["ratio_b_to_a"] = change_a > 0.0 ? change_b / change_a : 0.0;
    for (double a : {0.5, 1.0, 2.0}) {
        const std::vector<double> sweep = edited(g, z, dir, a);
        std::ostringstream key;
        key << "alpha_" << format_real(a);
        rep.metrics["change_a_" + key.str()] = region_mse(before, sweep, mask_a);
        rep.metrics["change_b_" + key.str()] = region_mse(before, sweep, mask_b);
    }

    bool ok = change_a >= thr.min_change_a;
    if (thr.use_absolute) {
        ok = ok && change_b <= thr.max_change_b_abs;
    } else {
        ok = ok && change_a > 0.0 && change_b / change_a <= thr.max_ratio_b_to_a;
    }
    rep.pass = ok;

    const std::size_t grid = image_grid(g);
    if (grid != 0) {
        Heatmap hm = make_heatmap(before, after, grid);
        if (heatmap_out) *heatmap_out = hm;
        if (!artifact_dir.empty()) {
            namespace fs = std::filesystem;
            fs::create_directories(artifact_dir);
            double lo = before[0], hi = before[0];
            for (double v : before) { lo = std::min(lo, v); hi = std::max(hi, v); }
            for (double v : after) { lo = std::min(lo, v); hi = std::max(hi, v); }
            const std::string stem = rep.name + "_";
            write_pgm(artifact_dir + "/" + stem + "before.pgm", as_image(before, grid), lo, hi);
            write_pgm(artifact_dir + "/" + stem + "after.pgm", as_image(after, grid), lo, hi);
            double hmax = 0.0;
            for (double v : hm.values.entries()) hmax = std::max(hmax, v);
            write_pgm(artifact_dir + "/" + stem + "heatmap.pgm", hm.values, 0.0, hmax);
            rep.artifacts = {stem + "before.pgm", stem + "after.pgm", stem + "heatmap.pgm"};
        }
    }
    return rep;
}

ExperimentReport projection_comparison(const Generator& g, const std::vector<double>& z,
                                       const RegionMask& mask_a, const RegionMask& mask_b,
                                       double alpha, std::size_t r_relax,
                                       const RegionPcpConfig& cfg,
                                       const ProjectionThresholds& thr) {
    ExperimentReport rep;
    rep.name = "projection_comparison";
    rep.parameters["alpha"] = format_real(alpha);
    rep.parameters["r_relax"] = std::to_string(r_relax);
    rep.parameters["threshold.max_mse_factor"] = format_real(thr.max_mse_factor);
    record_region_config(rep, cfg);

    const Matrix j = jacobian(g, z);
    const AttributeBasis basis_a = region_basis(j, mask_a, cfg);
    const AttributeBasis basis_b = region_basis(j, mask_b, cfg);
    std::vector<double> v1(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) v1[i] = basis_a.v(i, 0);
    const std::size_t relax = std::min(r_relax, basis_b.rank);
    const std::vector<double> p = null_project(v1, ProjectionSpec{basis_b, relax});

    const std::vector<double> before = forward(g, z);
    const double mse_without = masked_mse(before, edited(g, z, v1, alpha), mask_a);
    const double mse_with = masked_mse(before, edited(g, z, p, alpha), mask_a);

    rep.metrics["rank_a"] = static_cast<double>(basis_a.rank);
    rep.metrics["rank_b"] = static_cast<double>(basis_b.rank);
    rep.metrics["mse_without"] = mse_without;
    rep.metrics["mse_with"] = mse_with;
    rep.metrics["improvement_factor"] = mse_with > 0.0 ? mse_without / mse_with : 0.0;
    rep.pass = mse_with <= thr.max_mse_factor * mse_without ||
               (mse_with == 0.0 && mse_without == 0.0);
    return rep;
}

ExperimentReport generalization(const Generator& g, const std::vector<double>& z_ref,
                                const std::vector<std::vector<double>>& z_targets,
                                const RegionMask& mask_a, const RegionMask& mask_b,
                                double alpha, std::size_t r_relax,
                                const RegionPcpConfig& cfg,
                                const GeneralizationThresholds& thr) {
    ExperimentReport rep;
    rep.name = "generalization";
    rep.parameters["alpha"] = format_real(alpha);
    rep.parameters["r_relax"] = std::to_string(r_relax);
    rep.parameters["n_targets"] = std::to_string(z_targets.size());
    rep.parameters["threshold.min_ratio"] = format_real(thr.min_ratio);
    rep.parameters["threshold.min_fraction"] = format_real(thr.min_fraction);
    record_region_config(rep, cfg);

    const Matrix j = jacobian(g, z_ref);
    const AttributeBasis basis_a = region_basis(j, mask_a, cfg);
    const AttributeBasis basis_b = region_basis(j, mask_b, cfg);
    std::vector<double> v1(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) v1[i] = basis_a.v(i, 0);
    const std::size_t relax = std::min(r_relax, basis_b.rank);
    const std::vector<double> p = null_project(v1, ProjectionSpec{basis_b, relax});

    std::size_t hits = 0;
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < z_targets.size(); ++t) {
        const std::vector<double> before = forward(g, z_targets[t]);
        const std::vector<double> after = edited(g, z_targets[t], p, alpha);
        const double ca = region_mse(before, after, mask_a);
        const double cb = region_mse(before, after, mask_b);
        const double ratio = cb > 0.0 ? ca / cb : std::numeric_limits<double>::infinity();
        worst_ratio = std::min(worst_ratio, ratio);
        if (ca >= thr.min_ratio * cb) ++hits;
    }
    const double fraction =
        z_targets.empty() ? 0.0 : static_cast<double>(hits) / z_targets.size();
    rep.metrics["n_hit"] = static_cast<double>(hits);
    rep.metrics["fraction"] = fraction;
    rep.metrics["worst_ratio"] =
        std::isinf(worst_ratio) ? -1.0 : worst_ratio;  // -1 marks "region B never moved"
    rep.pass = fraction >= thr.min_fraction;
    return rep;
}

ExperimentReport mask_robustness(const Generator& g, const std::vector<double>& z,
                                 const std::vector<RegionMask>& submasks,
                                 const RegionMask& mask_b, double alpha,
                                 const RegionPcpConfig& cfg,
                                 const MaskRobustnessThresholds& thr) {
    if (submasks.size() < 2)
        throw std::invalid_argument("mask_robustness: need at least two submasks");
    ExperimentReport rep;
    rep.name = "mask_robustness";
    rep.parameters["alpha"] = format_real(alpha);
    rep.parameters["n_submasks"] = std::to_string(submasks.size());
    rep.parameters["threshold.min_mean_abs_cos"] = format_real(thr.min_mean_abs_cos);
    record_region_config(rep, cfg);

    const Matrix j = jacobian(g, z);
    const AttributeBasis basis_b = region_basis(j, mask_b, cfg);
    const std::size_t area_a = mask_b.complement(g.d_x).count();

    std::vector<std::vector<double>> dirs;
    for (const RegionMask& sub : submasks) {
        const AttributeBasis sub_basis = region_basis(j, sub, cfg);
        std::vector<double> v(g.d_z);
        for (std::size_t i = 0; i < g.d_z; ++i) v[i] = sub_basis.v(i, 0);
        // Small masks get the large-relaxation preset, clamped to the rank.
        const bool small = 2 * sub.count() < area_a;
        const std::size_t relax = small ? std::min<std::size_t>(20, basis_b.rank) : 0;
        dirs.push_back(null_project(v, ProjectionSpec{basis_b, relax}));
    }
    double sum = 0.0, min_cos = 1.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < dirs.size(); ++a) {
        for (std::size_t b = a + 1; b < dirs.size(); ++b) {
            const double c = std::fabs(dot(dirs[a], dirs[b]));
            sum += c;
            min_cos = std::min(min_cos, c);
            ++pairs;
        }
    }
    const double mean = sum / static_cast<double>(pairs);
    rep.metrics["mean_abs_cos"] = mean;
    rep.metrics["min_abs_cos"] = min_cos;
    rep.metrics["rank_b"] = static_cast<double>(basis_b.rank);
    rep.pass = mean >= thr.min_mean_abs_cos;
    return rep;
}

ExperimentReport rank_monotonicity(const Generator& g, const std::vector<double>& z,
                                   double rel_tol) {
    ExperimentReport rep;
    rep.name = "rank_monotonicity";
    rep.parameters["rel_tol"] = format_real(rel_tol);
    rep.parameters["d_z"] = std::to_string(g.d_z);
    rep.parameters["intrinsic_dim"] = std::to_string(g.intrinsic_dim);

    const std::vector<Matrix> jacs = layer_jacobians(g, z);
    bool monotone = true;
    std::size_t prev = 0;
    for (std::size_t k = 0; k < jacs.size(); ++k) {
        const Matrix gram = matmul(transpose(jacs[k]), jacs[k]);
        const std::size_t r = numerical_rank(gram, rel_tol);
        rep.metrics["rank_" + std::to_string(k)] = static_cast<double>(r);
        if (k > 0 && r > prev) monotone = false;
        prev = r;
    }
    const std::size_t first = static_cast<std::size_t>(rep.metrics.at("rank_0"));
    const bool bottleneck_ok = g.intrinsic_dim >= g.d_z || first < g.d_z;
    rep.metrics["monotone"] = monotone ? 1.0 : 0.0;
    rep.metrics["first_rank"] = static_cast<double>(first);
    rep.pass = monotone && bottleneck_ok;
    return rep;
}

ExperimentReport principal_direction_gain(const Generator& g, const std::vector<double>& z,
                                          const RegionMask& region, double alpha,
                                          std::size_t n_random, std::uint64_t seed,
                                          const DirectionGainThresholds& thr) {
    ExperimentReport rep;
    rep.name = "principal_direction_gain";
    rep.parameters["alpha"] = format_real(alpha);
    rep.parameters["n_random"] = std::to_string(n_random);
    rep.parameters["seed"] = std::to_string(seed);
    rep.parameters["threshold.min_beaten"] = std::to_string(thr.min_beaten);

    const Matrix j = jacobian(g, z);
    const Matrix gram = region_gram(j, region);
    const std::vector<double> v1 = principal_direction(gram);

    const std::vector<double> base = forward(g, z);
    auto gain_of = [&](const std::vector<double>& dir) {
        const std::vector<double> out = edited(g, z, dir, alpha);
        double s = 0.0;
        for (std::size_t i : region.indices) {
            const double d = out[i] - base[i];
            s += d * d;
        }
        return std::sqrt(s);
    };
    const double gain_v1 = gain_of(v1);

    Rng rng(seed);
    std::size_t beaten = 0;
    for (std::size_t t = 0; t < n_random; ++t) {
        std::vector<double> d(g.d_z);
        for (double& x : d) x = rng.normal();
        const double nd = norm(d);
        for (double& x : d) x /= nd;
        if (gain_v1 >= gain_of(d)) ++beaten;
    }
    rep.metrics["gain_v1"] = gain_v1;
    rep.metrics["beaten"] = static_cast<double>(beaten);
    rep.pass = beaten >= thr.min_beaten;
    return rep;
}

ExperimentReport relaxation_monotonicity(const Generator& g, const std::vector<double>& z,
                                         const RegionMask& mask_a, const RegionMask& mask_b,
                                         const RegionPcpConfig& cfg) {
    ExperimentReport rep;
    rep.name = "relaxation_monotonicity";
    record_region_config(rep, cfg);

    const Matrix j = jacobian(g, z);
    const AttributeBasis basis_a = region_basis(j, mask_a, cfg);
    const AttributeBasis basis_b = region_basis(j, mask_b, cfg);
    std::vector<double> v1(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) v1[i] = basis_a.v(i, 0);

    bool monotone = true;
    double prev = -1.0;
    for (std::size_t r = 0; r <= basis_b.rank; ++r) {
        const double n = projection_residual_norm(v1, ProjectionSpec{basis_b, r});
        rep.metrics["residual_r" + std::to_string(r)] = n;
        if (n + 1e-12 < prev) monotone = false;
        prev = n;
    }
    rep.metrics["monotone"] = monotone ? 1.0 : 0.0;
    rep.metrics["rank_b"] = static_cast<double>(basis_b.rank);
    rep.pass = monotone;
    return rep;
}

ExperimentReport lambda_sweep(const Generator& g, const std::vector<double>& z,
                              const RegionMask& mask_a, const RegionMask& mask_b,
                              const std::vector<std::size_t>& n_values,
                              const RegionPcpConfig& cfg) {
    ExperimentReport rep;
    rep.name = "lambda_sweep";
    record_region_config(rep, cfg);
    {
        std::ostringstream ns;
        for (std::size_t i = 0; i < n_values.size(); ++i)
            ns << (i ? "," : "") << n_values[i];
        rep.parameters["n_values"] = ns.str();
    }

    const Matrix j = jacobian(g, z);
    const Matrix gram_b = region_gram(j, mask_b);
    const double sigma1 = svd(gram_b).sigma[0];
    const AttributeBasis basis_a = region_basis(j, mask_a, cfg);
    std::vector<double> v1(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) v1[i] = basis_a.v(i, 0);
    const std::vector<double> before = forward(g, z);

    bool monotone = true;
    double prev_null = -1.0;
    for (std::size_t n : n_values) {
        PcpConfig pc = cfg.pcp_for(gram_b);
        pc.lambda = 1.0 / static_cast<double>(n);
        PcpSolution sol = pcp(gram_b, pc);
        Matrix l = std::move(sol.l);
        for (std::size_t a = 0; a < l.rows(); ++a)
            for (std::size_t b = a + 1; b < l.cols(); ++b) {
                const double avg = 0.5 * (l(a, b) + l(b, a));
                l(a, b) = avg;
                l(b, a) = avg;
            }
        SvdResult ls = svd(l);
        // Rank anchored at the gram's top singular value: a near-zero L*
        // reads as rank 0 instead of junk rank 1.
        std::size_t rank = 0;
        while (rank < ls.sigma.size() && ls.sigma[rank] > cfg.rank_tol * sigma1) ++rank;
        const double null_dim = static_cast<double>(g.d_z - rank);
        const std::string suffix = "_n" + std::to_string(n);
        rep.metrics["rank" + suffix] = static_cast<double>(rank);
        rep.metrics["null_dim" + suffix] = null_dim;
        rep.metrics["pcp_iterations" + suffix] = static_cast<double>(sol.iterations);
        rep.metrics["pcp_converged" + suffix] = sol.converged ? 1.0 : 0.0;

        // Projection metrics against this basis (r_relax = 0).
        AttributeBasis basis_n;
        basis_n.v = std::move(ls.v);
        basis_n.sigma = std::move(ls.sigma);
        basis_n.rank = rank;
        basis_n.region = mask_b;
        const double resid = projection_residual_norm(v1, ProjectionSpec{basis_n, 0});
        rep.metrics["projection_residual" + suffix] = resid;
        if (resid > 1e-10) {
            const std::vector<double> p = null_project(v1, ProjectionSpec{basis_n, 0});
            rep.metrics["mse_with" + suffix] = masked_mse(before, edited(g, z, p, 1.0), mask_a);
        } else {
            rep.metrics["mse_with" + suffix] = -1.0;  // projection vanished
        }
        rep.metrics["mse_without" + suffix] =
            masked_mse(before, edited(g, z, v1, 1.0), mask_a);

        if (null_dim + 1e-9 < prev_null) monotone = false;
        prev_null = null_dim;
    }
    rep.metrics["monotone_null_dim"] = monotone ? 1.0 : 0.0;
    rep.pass = monotone;
    return rep;
}

ExperimentReport rpca_recovery(std::size_t n_instances, std::size_t n, std::size_t rank,
                               double corruption_frac, double magnitude,
                               const RecoveryThresholds& thr) {
    ExperimentReport rep;
    rep.name = "rpca_recovery";
    rep.parameters["n_instances"] = std::to_string(n_instances);
    rep.parameters["n"] = std::to_string(n);
    rep.parameters["rank"] = std::to_string(rank);
    rep.parameters["corruption_frac"] = format_real(corruption_frac);
    rep.parameters["magnitude"] = format_real(magnitude);
    rep.parameters["threshold.max_recovery_error"] = format_real(thr.max_recovery_error);
    rep.parameters["threshold.max_feasibility"] = format_real(thr.max_feasibility);

    const double lambda = 1.0 / std::sqrt(static_cast<double>(n));
    rep.parameters["lambda"] = format_real(lambda);

    double max_err = 0.0, max_feas = 0.0;
    bool objective_ok = true, tail_ok = true, all_converged = true;
    for (std::size_t inst = 0; inst < n_instances; ++inst) {
        Rng rng(9000 + inst);
        Matrix a(n, rank), b(n, rank);
        for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
        for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
        const Matrix l0 = matmul(a, transpose(b));
        Matrix s0(n, n);
        std::vector<std::size_t> pos(n * n);
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
        for (std::size_t i = pos.size(); i > 1; --i)
            std::swap(pos[i - 1], pos[rng.next_u64() % i]);
        const std::size_t k =
            static_cast<std::size_t>(std::lround(corruption_frac * double(n) * double(n)));
        for (std::size_t i = 0; i < k; ++i)
            s0.data()[pos[i]] = rng.uniform() < 0.5 ? -magnitude : magnitude;
        const Matrix m = add(l0, s0);

        PcpConfig cfg;
        cfg.lambda = lambda;
        std::vector<double> history;
        const PcpSolution sol = pcp(m, cfg, &history);
        all_converged = all_converged && sol.converged;

        const double err = fro_norm(sub(sol.l, l0)) / fro_norm(l0);
        max_err = std::max(max_err, err);
        max_feas = std::max(max_feas, sol.final_residual);

        const double obj_sol = nuclear_norm(sol.l) + lambda * l1_norm(sol.s);
        const double obj_planted = nuclear_norm(l0) + lambda * l1_norm(s0);
        if (obj_sol > obj_planted + 1e-6 * obj_planted) objective_ok = false;

        const std::size_t tail = std::min<std::size_t>(10, history.size());
        for (std::size_t i = history.size() - tail; i + 1 < history.size(); ++i)
            if (history[i + 1] > history[i]) tail_ok = false;

        rep.metrics["recovery_error_" + std::to_string(inst)] = err;
        rep.metrics["iterations_" + std::to_string(inst)] =
            static_cast<double>(sol.iterations);
    }
    rep.metrics["max_recovery_error"] = max_err;
    rep.metrics["max_feasibility"] = max_feas;
    rep.metrics["objective_sane"] = objective_ok ? 1.0 : 0.0;
    rep.metrics["residual_tail_monotone"] = tail_ok ? 1.0 : 0.0;
    rep.metrics["all_converged"] = all_converged ? 1.0 : 0.0;
    rep.pass = all_converged && objective_ok && tail_ok &&
               max_err <= thr.max_recovery_error && max_feas <= thr.max_feasibility;
    return rep;
}

ExperimentReport jacobian_check(const std::vector<std::pair<std::string, Generator>>& zoo,
                                std::size_t n_latents, double step, double tol) {
    ExperimentReport rep;
    rep.name = "jacobian_check";
    rep.parameters["n_latents"] = std::to_string(n_latents);
    rep.parameters["step"] = format_real(step);
    rep.parameters["threshold.max_abs_deviation"] = format_real(tol);

    double worst = 0.0;
    for (const auto& [name, g] : zoo) {
        double gen_worst = 0.0;
        for (std::size_t t = 0; t < n_latents; ++t) {
            const std::vector<double> z = sample_latent(g.d_z, 5000 + t);
            const Matrix exact = jacobian(g, z);
            const Matrix fd = jacobian_fd(g, z, step);
            gen_worst = std::max(gen_worst, max_abs(sub(exact, fd)));
        }
        rep.metrics["max_abs_deviation." + name] = gen_worst;
        worst = std::max(worst, gen_worst);
    }
    rep.metrics["max_abs_deviation"] = worst;
    rep.pass = worst <= tol;
    return rep;
}

std::vector<std::pair<std::string, Generator>> standard_zoo() {
    std::vector<std::pair<std::string, Generator>> zoo;
    zoo.emplace_back("linear_8", make_linear(8, 8, 101));
    zoo.emplace_back("linear_32_256", make_linear(32, 256, 102));
    zoo.emplace_back("mlp_32_8_256", make_mlp({32, 8, 256}, 103));
    zoo.emplace_back("mlp_32_16_8_256", make_mlp({32, 16, 8, 256}, 104));
    zoo.emplace_back("mlp_8_8_8", make_mlp({8, 8, 8}, 105));
    zoo.emplace_back("blocky_c0", make_blocky(32, 16, 16, 0.0, 7));
    zoo.emplace_back("blocky_c002", make_blocky(32, 16, 16, 0.02, 7));
    zoo.emplace_back("blocky_c005", make_blocky(32, 16, 16, 0.05, 7));
    return zoo;
}

namespace {

// Deterministic sub-boxes of the left half-image covering at least a quarter
// of it.
std::vector<RegionMask> seeded_subboxes(std::size_t grid, std::size_t count,
                                        std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t half = grid / 2;
    const std::size_t min_area = (half * grid + 3) / 4;
    std::vector<RegionMask> out;
    while (out.size() < count) {
        const std::size_t x0 = rng.next_u64() % half;
        const std::size_t y0 = rng.next_u64() % grid;
        const std::size_t x1 = x0 + 1 + rng.next_u64() % (half - x0);
        const std::size_t y1 = y0 + 1 + rng.next_u64() % (grid - y0);
        if ((x1 - x0) * (y1 - y0) < min_area) continue;
        out.push_back(RegionMask::rectangle(grid, x0, y0, x1, y1));
    }
    return out;
}

const Generator& zoo_member(const std::vector<std::pair<std::string, Generator>>& zoo,
                            const std::string& name) {
    for (const auto& [n, g] : zoo)
        if (n == name) return g;
    throw std::logic_error("zoo member missing: " + name);
}

}  // namespace

VerifyResult run_verify_suite(const std::string& out_dir, const std::string& only,
                              const std::string& zoo_dir) {
    namespace fs = std::filesystem;
    const bool writing = !out_dir.empty();
    if (writing) fs::create_directories(out_dir);

    // Materialize the zoo as fixtures and reload, so the suite also
    // exercises the generator round-trip. Existing files are reused.
    std::vector<std::pair<std::string, Generator>> zoo = standard_zoo();
    if (writing) {
        const std::string zdir = zoo_dir.empty() ? out_dir + "/zoo" : zoo_dir;
        fs::create_directories(zdir);
        for (auto& [name, g] : zoo) {
            const std::string path = zdir + "/" + name + ".gen.txt";
            if (!fs::exists(path)) save_generator(path, g);
            try {
                g = load_generator(path);
            } catch (const std::exception& e) {
                throw std::runtime_error("fixture " + path + ": " + e.what());
            }
        }
    }

    const Generator& blocky_c0 = zoo_member(zoo, "blocky_c0");
    const Generator& blocky_c002 = zoo_member(zoo, "blocky_c002");
    const Generator& blocky_c005 = zoo_member(zoo, "blocky_c005");
    const std::size_t grid = 16;
    const RegionMask mask_a = left_half_mask(grid);
    const RegionMask mask_b = right_half_mask(grid);
    const std::vector<double> z = sample_latent(32, 1001);
    const RegionPcpConfig rcfg;

    std::vector<ExperimentReport> reports;
    auto want = [&](const std::string& name) {
        return only.empty() || name.find(only) != std::string::npos;
    };
    auto run = [&](const std::string& name, auto&& fn) {
        if (!want(name)) return;
        ExperimentReport rep = fn();
        rep.name = name;
        reports.push_back(std::move(rep));
    };

    run("rpca_recovery", [&] {
        return rpca_recovery(20, 200, 10, 0.05, 10.0, RecoveryThresholds{});
    });
    run("rpca_symmetry", [&] {
        ExperimentReport rep;
        rep.parameters["threshold.max_rel_asymmetry"] = format_real(1e-8);
        rep.parameters["threshold.max_feasibility"] = format_real(1e-7);
        double worst_asym = 0.0, worst_feas = 0.0;
        bool all_converged = true;
        // Symmetric inputs: region Grams plus a planted symmetric instance.
        std::vector<std::pair<Matrix, PcpConfig>> cases;
        {
            const Matrix j = jacobian(blocky_c005, z);
            Matrix gram = region_gram(j, mask_b);
            cases.emplace_back(gram, rcfg.pcp_for(gram));
        }
        {
            Rng rng(8800);
            const std::size_t n = 60, r = 4;
            Matrix a(n, r);
            for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
            Matrix m = matmul(a, transpose(a));
            for (std::size_t reps = 0; reps < n; ++reps) {
                const std::size_t i = rng.next_u64() % n, jx = rng.next_u64() % n;
                const double v = rng.uniform() < 0.5 ? -8.0 : 8.0;
                m(i, jx) += v;
                m(jx, i) += (i == jx) ? 0.0 : v;
            }
            PcpConfig cfg;
            cfg.lambda = default_lambda(m);
            cases.emplace_back(std::move(m), cfg);
        }
        for (auto& [m, cfg] : cases) {
            const PcpSolution sol = pcp(m, cfg);
            all_converged = all_converged && sol.converged;
            worst_feas = std::max(worst_feas, sol.final_residual);
            const double asym =
                fro_norm(sub(sol.l, transpose(sol.l))) / std::max(fro_norm(sol.l), 1e-300);
            worst_asym = std::max(worst_asym, asym);
        }
        rep.metrics["max_rel_asymmetry"] = worst_asym;
        rep.metrics["max_feasibility"] = worst_feas;
        rep.metrics["all_converged"] = all_converged ? 1.0 : 0.0;
        rep.pass = all_converged && worst_asym <= 1e-8 && worst_feas <= 1e-7;
        return rep;
    });
    run("jacobian_check", [&] { return jacobian_check(standard_zoo(), 10, 1e-4, 1e-6); });
    run("rank_monotonicity", [&] {
        ExperimentReport rep;
        rep.parameters["rel_tol"] = format_real(1e-8);
        rep.parameters["n_latents"] = "10";
        bool all_ok = true;
        for (const auto& [name, g] : zoo) {
            bool gen_ok = true;
            for (std::size_t t = 0; t < 10; ++t) {
                const ExperimentReport sub =
                    rank_monotonicity(g, sample_latent(g.d_z, 5000 + t), 1e-8);
                gen_ok = gen_ok && sub.pass;
                if (t == 0)
                    for (const auto& [k, v] : sub.metrics)
                        if (k.rfind("rank_", 0) == 0) rep.metrics[name + "." + k] = v;
            }
            rep.metrics[name + ".pass"] = gen_ok ? 1.0 : 0.0;
            all_ok = all_ok && gen_ok;
        }
        rep.pass = all_ok;
        return rep;
    });
    run("principal_direction_gain", [&] {
        ExperimentReport rep;
        rep.parameters["alpha"] = format_real(0.1);
        rep.parameters["n_random"] = "100";
        rep.parameters["threshold.min_beaten"] = "99";
        bool all_ok = true;
        std::size_t idx = 0;
        for (const auto& [name, g] : zoo) {
            std::vector<std::size_t> all(g.d_x);
            for (std::size_t i = 0; i < g.d_x; ++i) all[i] = i;
            const RegionMask full = RegionMask::from_indices(all, g.d_x);
            const ExperimentReport sub = principal_direction_gain(
                g, sample_latent(g.d_z, 6000 + idx), full, 0.1, 100, 40000 + idx,
                DirectionGainThresholds{});
            rep.metrics[name + ".beaten"] = sub.metrics.at("beaten");
            all_ok = all_ok && sub.pass;
            ++idx;
        }
        rep.pass = all_ok;
        return rep;
    });
    run("nullspace_c0", [&] {
        NullspaceThresholds thr;
        thr.use_absolute = true;
        return nullspace_effect(blocky_c0, z, mask_a, mask_b, 1.0, rcfg, thr,
                                writing ? out_dir + "/artifacts_c0" : "");
    });
    run("nullspace_c005", [&] {
        NullspaceThresholds thr;
        thr.use_absolute = false;
        return nullspace_effect(blocky_c005, z, mask_a, mask_b, 1.0, rcfg, thr,
                                writing ? out_dir + "/artifacts_c005" : "");
    });
    run("projection_c002", [&] {
        return projection_comparison(blocky_c002, z, mask_a, mask_b, 1.0, 0, rcfg,
                                     ProjectionThresholds{});
    });
    run("projection_c005", [&] {
        return projection_comparison(blocky_c005, z, mask_a, mask_b, 1.0, 0, rcfg,
                                     ProjectionThresholds{});
    });
    run("generalization", [&] {
        std::vector<std::vector<double>> targets;
        for (std::size_t t = 0; t < 50; ++t) targets.push_back(sample_latent(32, 20000 + t));
        return generalization(blocky_c005, z, targets, mask_a, mask_b, 1.0, 0, rcfg,
                              GeneralizationThresholds{});
    });
    run("generalization_linear", [&] {
        // Constant Jacobian: the same direction moves every latent by the
        // same output delta.
        ExperimentReport rep;
        rep.parameters["threshold.max_delta_deviation"] = format_real(1e-10);
        const Generator& lin = zoo_member(zoo, "linear_32_256");
        std::vector<double> dir(32, 0.0);
        dir[0] = 0.6;
        dir[3] = -0.8;
        std::vector<double> ref_delta;
        double worst = 0.0;
        for (std::size_t t = 0; t < 10; ++t) {
            const std::vector<double> zt = sample_latent(32, 21000 + t);
            const std::vector<double> before = forward(lin, zt);
            const std::vector<double> after = edited(lin, zt, dir, 1.0);
            std::vector<double> delta(before.size());
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = after[i] - before[i];
            if (t == 0) {
                ref_delta = delta;
            } else {
                for (std::size_t i = 0; i < delta.size(); ++i)
                    worst = std::max(worst, std::fabs(delta[i] - ref_delta[i]));
            }
        }
        rep.metrics["max_delta_deviation"] = worst;
        rep.pass = worst <= 1e-10;
        return rep;
    });
    run("mask_robustness", [&] {
        return mask_robustness(blocky_c005, z, seeded_subboxes(grid, 5, 30007), mask_b, 1.0,
                               rcfg, MaskRobustnessThresholds{});
    });
    run("relaxation_monotonicity", [&] {
        ExperimentReport a = relaxation_monotonicity(blocky_c0, z, mask_a, mask_b, rcfg);
        ExperimentReport b = relaxation_monotonicity(blocky_c005, z, mask_a, mask_b, rcfg);
        ExperimentReport rep;
        rep.parameters = a.parameters;
        for (const auto& [k, v] : a.metrics) rep.metrics["c0." + k] = v;
        for (const auto& [k, v] : b.metrics) rep.metrics["c005." + k] = v;
        rep.pass = a.pass && b.pass;
        return rep;
    });
    run("lambda_sweep", [&] {
        return lambda_sweep(blocky_c005, z, mask_a, mask_b, {20, 40, 60, 80}, rcfg);
    });

    VerifyResult result;
    result.reports = std::move(reports);
    for (const ExperimentReport& r : result.reports) result.all_pass &= r.pass;

    if (writing) {
        for (const ExperimentReport& r : result.reports) {
            std::ofstream out(out_dir + "/" + r.name + ".json");
            out << r.to_json();
        }
        std::ostringstream idx;
        idx << "{\n  \"all_pass\": " << (result.all_pass ? "true" : "false")
            << ",\n  \"experiments\": [";
        for (std::size_t i = 0; i < result.reports.size(); ++i) {
            idx << (i ? ",\n" : "\n") << "    {\"name\": \"" << result.reports[i].name
                << "\", \"pass\": " << (result.reports[i].pass ? "true" : "false")
                << ", \"report\": \"" << result.reports[i].name << ".json\"}";
        }
        idx << (result.reports.empty() ? "" : "\n  ") << "]\n}\n";
        std::ofstream out(out_dir + "/index.json");
        out << idx.str();
    }
    return result;
}

}  // namespace lorank
