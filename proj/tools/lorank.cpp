// Command-line front end: build toy generators, discover attribute bases
// via region-Gram robust PCA, apply null-space-projected edits, and run the
// verification suite.
//
// Exit codes: 0 success, 1 solver/assertion failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lorank/generator.hpp"
#include "lorank/harness.hpp"
#include "lorank/pgm.hpp"
#include "lorank/rpca.hpp"
#include "lorank/subspace.hpp"
#include "lorank/svd.hpp"

namespace fs = std::filesystem;
using namespace lorank;

namespace {

std::string out_directory(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("LORANK_OUT"); env && *env) return env;
    return ".";
}

std::vector<std::size_t> parse_dims(const std::string& spec) {
    std::vector<std::size_t> dims;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        dims.push_back(static_cast<std::size_t>(std::stoul(tok)));
    return dims;
}

// Rectangle "x0,y0,x1,y1", inclusive-exclusive on the image grid.
RegionMask parse_region(const std::string& rect, const std::string& indices,
                        const Generator& g) {
    if (!rect.empty()) {
        const std::size_t grid = image_grid(g);
        if (grid == 0)
            throw CLI::ValidationError("--region needs a square-image generator");
        const std::vector<std::size_t> v = parse_dims(rect);
        if (v.size() != 4) throw CLI::ValidationError("--region expects x0,y0,x1,y1");
        return RegionMask::rectangle(grid, v[0], v[1], v[2], v[3]);
    }
    if (!indices.empty())
        return RegionMask::from_indices(parse_dims(indices), g.d_x);
    throw CLI::ValidationError("one of --region or --indices is required");
}

constexpr const char* kRegionHelp =
    "Rectangle x0,y0,x1,y1 on the image grid, inclusive-exclusive: on a 4x4 "
    "image, 0,0,2,4 selects the left two columns, i.e. row-major pixel "
    "indices 0,1,4,5,8,9,12,13";

int cmd_gen(const std::string& kind, std::size_t d_z, std::size_t d_x, std::size_t grid,
            std::size_t split, double coupling, const std::string& dims, bool identity_init,
            std::uint64_t seed, const std::string& out_flag) {
    Generator g;
    if (kind == "blocky") {
        g = make_blocky(d_z, grid, split, coupling, seed);
    } else if (kind == "linear") {
        g = make_linear(d_z, d_x, seed, identity_init);
    } else if (kind == "mlp") {
        std::vector<std::size_t> d = parse_dims(dims);
        if (d.empty()) d = {d_z, d_z / 2 ? d_z / 2 : 1, d_x};
        g = make_mlp(d, seed);
    } else {
        throw CLI::ValidationError("unknown --kind '" + kind + "'");
    }
    const std::string dir = out_directory(out_flag);
    fs::create_directories(dir);
    const std::string path = dir + "/" + kind + ".gen.txt";
    save_generator(path, g);
    std::cout << "wrote " << path << "\nintrinsic_dim " << g.intrinsic_dim << "\nlayers";
    for (const Layer& l : g.layers)
        std::cout << ' ' << l.weight.rows() << 'x' << l.weight.cols() << ':'
                  << activation_name(l.act);
    std::cout << '\n';
    return 0;
}

int cmd_discover(const std::string& gen_path, std::uint64_t latent_seed,
                 const std::string& rect, const std::string& indices, double lambda,
                 double lambda_n, double mu, double rel_tol, std::size_t max_iter,
                 double rank_tol, const std::string& out_flag) {
    const Generator g = load_generator(gen_path);
    const RegionMask region = parse_region(rect, indices, g);
    const std::vector<double> z = sample_latent(g.d_z, latent_seed);
    const Matrix j = jacobian(g, z);
    const Matrix gram = region_gram(j, region);

    PcpConfig cfg;
    if (lambda_n > 0.0)
        cfg.lambda = 1.0 / lambda_n;
    else
        cfg.lambda = lambda > 0.0 ? lambda : default_lambda(gram);
    if (mu > 0.0) cfg.mu = mu;
    cfg.rel_tol = rel_tol;
    cfg.max_iter = max_iter;

    PcpSolution sol;
    const AttributeBasis basis = attribute_basis(gram, region, cfg, rank_tol, &sol);

    const std::string dir = out_directory(out_flag);
    fs::create_directories(dir);
    const std::string path = dir + "/basis.txt";
    save_basis(path, basis);

    std::cout << "wrote " << path << "\nrank " << basis.rank << "\ntop_sigma";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, basis.sigma.size()); ++i)
        std::cout << ' ' << format_real(basis.sigma[i]);
    std::cout << "\npcp " << sol.iterations << " iterations, residual "
              << format_real(sol.final_residual) << ", converged "
              << (sol.converged ? "yes" : "no") << '\n';
    if (!sol.converged) {
        std::cerr << "pcp did not converge within " << cfg.max_iter << " iterations\n";
        return 1;
    }
    return 0;
}

int cmd_edit(const std::string& gen_path, const std::string& basis_a_path,
             const std::string& basis_b_path, std::size_t index, double alpha,
             std::size_t r_relax, std::uint64_t z_seed, const std::string& out_flag) {
    const Generator g = load_generator(gen_path);
    const AttributeBasis basis_a = load_basis(basis_a_path);
    if (index >= basis_a.rank)
        throw CLI::ValidationError("--index " + std::to_string(index) +
                                   " out of range; basis rank is " +
                                   std::to_string(basis_a.rank) + ", valid indices are 0.." +
                                   std::to_string(basis_a.rank ? basis_a.rank - 1 : 0));

    std::vector<double> dir(g.d_z);
    for (std::size_t i = 0; i < g.d_z; ++i) dir[i] = basis_a.v(i, index);

    if (!basis_b_path.empty()) {
        const AttributeBasis basis_b = load_basis(basis_b_path);
        const std::size_t relax = std::min(r_relax, basis_b.rank);
        dir = null_project(dir, ProjectionSpec{basis_b, relax});
    }

    const std::vector<double> z = sample_latent(g.d_z, z_seed);
    const std::vector<double> before = forward(g, z);
    EditRequest req{z, dir, alpha};
    const std::vector<double> after = edit(g, req);

    const std::size_t grid = image_grid(g);
    if (grid == 0) throw CLI::ValidationError("edit: generator output is not a square image");
    const std::string dirname = out_directory(out_flag);
    fs::create_directories(dirname);

    double lo = before[0], hi = before[0];
    for (double v : before) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : after) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const bool binary = g.d_x > 4096;
    write_pgm(dirname + "/before.pgm", as_image(before, grid), lo, hi, binary);
    write_pgm(dirname + "/after.pgm", as_image(after, grid), lo, hi, binary);
    const Heatmap hm = make_heatmap(before, after, grid);
    double hmax = 0.0;
    for (double v : hm.values.entries()) hmax = std::max(hmax, v);
    write_pgm(dirname + "/heatmap.pgm", hm.values, 0.0, hmax, binary);

    const double inside = region_mse(before, after, basis_a.region);
    const double outside = masked_mse(before, after, basis_a.region);
    std::cout << "wrote " << dirname << "/{before,after,heatmap}.pgm\n"
              << "mse_inside_region " << format_real(inside) << '\n'
              << "mse_outside_region " << format_real(outside) << '\n';
    return 0;
}

int cmd_verify(const std::string& only, const std::string& out_flag) {
    const std::string dir = out_directory(out_flag);
    const VerifyResult result = run_verify_suite(dir, only);
    for (const ExperimentReport& r : result.reports)
        std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.name << '\n';
    if (result.reports.empty()) {
        std::cerr << "no experiment matches filter '" << only << "'\n";
        return 2;
    }
    if (!result.all_pass) {
        for (const ExperimentReport& r : result.reports)
            if (!r.pass) std::cerr << "failed: " << r.name << '\n';
        return 1;
    }
    std::cout << "all experiments passed; reports in " << dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lorank: low-rank Jacobian subspaces of toy generators"};
    app.require_subcommand(1);

    std::string kind = "blocky", dims, out_flag, gen_path, rect, indices;
    std::string basis_a_path, basis_b_path, only;
    std::size_t d_z = 32, d_x = 256, grid = 16, split = 16, max_iter = 1000;
    std::size_t index = 0, r_relax = 0;
    double coupling = 0.0, alpha = 1.0, lambda = 0.0, lambda_n = 0.0, mu = 0.0;
    double rel_tol = 1e-7, rank_tol = 1e-6;
    std::uint64_t seed = 0, latent_seed = 0, z_seed = 0;
    bool identity_init = false;

    CLI::App* gen = app.add_subcommand("gen", "write a seeded zoo generator");
    gen->set_config("--config", "", "flat key = value file; flags override");
    gen->add_option("--kind", kind, "linear | mlp | blocky")->required();
    gen->add_option("--dz", d_z, "latent dimension")->required();
    gen->add_option("--dx", d_x, "output dimension (linear/mlp)");
    gen->add_option("--grid", grid, "image side (blocky)");
    gen->add_option("--split", split, "latent block split (blocky)");
    gen->add_option("--coupling", coupling, "cross-block coupling in [0,1]");
    gen->add_option("--dims", dims, "comma widths for mlp, e.g. 32,8,256");
    gen->add_flag("--identity-init", identity_init,
                  "identity weights for square linear generators");
    gen->add_option("--seed", seed, "construction seed");
    gen->add_option("--out", out_flag, "output directory (default LORANK_OUT or .)");

    CLI::App* discover = app.add_subcommand("discover", "region Gram -> pcp -> basis");
    discover->set_config("--config", "", "flat key = value file; flags override");
    discover->add_option("--gen", gen_path, "generator file")->required();
    discover->add_option("--latent-seed", latent_seed, "seed for the analysis latent");
    discover->add_option("--region", rect, kRegionHelp);
    discover->add_option("--indices", indices, "explicit output indices i,j,k,...");
    discover->add_option("--lambda", lambda, "pcp sparsity weight (default 1/sqrt(d_z))");
    discover->add_option("--lambda-n", lambda_n, "use lambda = 1/n, e.g. 60");
    discover->add_option("--mu", mu, "pcp penalty (default auto)");
    discover->add_option("--rel-tol", rel_tol, "pcp stopping residual");
    discover->add_option("--max-iter", max_iter, "pcp iteration cap");
    discover->add_option("--rank-tol", rank_tol, "effective-rank threshold");
    discover->add_option("--out", out_flag, "output directory");

    CLI::App* edit_cmd = app.add_subcommand("edit", "apply an attribute edit, write PGMs");
    edit_cmd->set_config("--config", "", "flat key = value file; flags override");
    edit_cmd->add_option("--gen", gen_path, "generator file")->required();
    edit_cmd->add_option("--basis-a", basis_a_path, "attribute basis of the edited region")
        ->required();
    edit_cmd->add_option("--basis-b", basis_b_path,
                         "complement-region basis for null-space projection");
    edit_cmd->add_option("--index", index, "attribute index i (0-based)");
    edit_cmd->add_option("--alpha", alpha, "editing strength");
    edit_cmd->add_option("--r-relax", r_relax, "precision relaxation");
    edit_cmd->add_option("--z-seed", z_seed, "seed for the edited latent");
    edit_cmd->add_option("--out", out_flag, "output directory");

    CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
    verify->set_config("--config", "", "flat key = value file; flags override");
    verify->add_option("--only", only, "substring filter on experiment names");
    verify->add_option("--out", out_flag, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen(kind, d_z, d_x, grid, split, coupling, dims, identity_init, seed,
                           out_flag);
        if (discover->parsed())
            return cmd_discover(gen_path, latent_seed, rect, indices, lambda, lambda_n, mu,
                                rel_tol, max_iter, rank_tol, out_flag);
        if (edit_cmd->parsed())
            return cmd_edit(gen_path, basis_a_path, basis_b_path, index, alpha, r_relax,
                            z_seed, out_flag);
        if (verify->parsed()) return cmd_verify(only, out_flag);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
