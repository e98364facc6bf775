#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "lorank/matrix.hpp"

namespace lorank {

/// Deterministic random source: mt19937_64 plus an explicit Box-Muller
/// transform, so draws do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

enum class Activation { identity, tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation act = Activation::identity;
};

/// Layered differentiable map R^{d_z} -> R^{d_x} with exact per-layer
/// Jacobians. Immutable after construction.
struct Generator {
    std::string kind;  // linear | mlp | blocky
    std::vector<Layer> layers;
    std::size_t d_z = 0;
    std::size_t d_x = 0;
    std::size_t intrinsic_dim = 0;  // known manifold dimension by construction

    void validate() const;
};

/// Image side length when d_x is a perfect square, else 0.
std::size_t image_grid(const Generator& g);

/// Subset of output indices; strictly increasing, nonempty, in [0, d_x).
struct RegionMask {
    std::vector<std::size_t> indices;

    static RegionMask from_indices(std::vector<std::size_t> idx, std::size_t d_x);
    /// Pixels with x0 <= col < x1, y0 <= row < y1 on a grid x grid image,
    /// row-major.
    static RegionMask rectangle(std::size_t grid, std::size_t x0, std::size_t y0,
                                std::size_t x1, std::size_t y1);
    RegionMask complement(std::size_t d_x) const;
    std::size_t count() const { return indices.size(); }
};

std::vector<double> forward(const Generator& g, const std::vector<double>& z);

/// Exact chain-rule Jacobian, d_x x d_z.
Matrix jacobian(const Generator& g, const std::vector<double>& z);

/// Central differences (G(z + h e_k) - G(z - h e_k)) / (2h) with
/// h = step * max(1, |z_k|); the verification oracle for jacobian().
Matrix jacobian_fd(const Generator& g, const std::vector<double>& z, double step);

/// Jacobians of the remaining sub-network with respect to each layer input;
/// the first entry equals jacobian(g, z).
std::vector<Matrix> layer_jacobians(const Generator& g, const std::vector<double>& z);

Generator make_linear(std::size_t d_z, std::size_t d_x, std::uint64_t seed,
                      bool identity_init = false);

/// Fully-connected tanh network with an identity last layer;
/// dims = {d_z, hidden..., d_x}.
Generator make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

/// Grid^2-pixel generator whose left half-image is driven by latent block
/// [0, block_split) and right half by [block_split, d_z) through a random
/// tanh layer, with a coupling-scaled random cross-term mixing the blocks.
/// coupling 0 gives exactly separable halves.
Generator make_blocky(std::size_t d_z, std::size_t grid, std::size_t block_split,
                      double coupling, std::uint64_t seed);

RegionMask left_half_mask(std::size_t grid);
RegionMask right_half_mask(std::size_t grid);

/// Latent draw used across the tooling: d_z independent unit normals.
std::vector<double> sample_latent(std::size_t d_z, std::uint64_t seed);

void write_generator(std::ostream& out, const Generator& g);
Generator read_generator(std::istream& in);
void save_generator(const std::string& path, const Generator& g);
Generator load_generator(const std::string& path);

}  // namespace lorank
