#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lorank/generator.hpp"
#include "lorank/matrix.hpp"
#include "lorank/svd.hpp"

using namespace lorank;

TEST_CASE("linear generator forward is W z + bias") {
    Generator g = make_linear(4, 3, 11);
    std::vector<double> z{0.3, -1.2, 0.7, 2.0};
    const std::vector<double> out = forward(g, z);
    const std::vector<double> expected = matvec(g.layers[0].weight, z);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-15));
    CHECK_THROWS_AS(forward(g, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("odd activations fix the origin") {
    Generator lin = make_linear(5, 5, 12);
    for (double v : forward(lin, std::vector<double>(5, 0.0))) CHECK(v == 0.0);
    Generator mlp = make_mlp({6, 4, 8}, 13);
    for (Layer& l : mlp.layers) l.bias.assign(l.bias.size(), 0.0);
    for (double v : forward(mlp, std::vector<double>(6, 0.0))) CHECK(v == 0.0);
}

TEST_CASE("jacobian of a linear map is its weight") {
    Generator g = make_linear(6, 9, 14);
    const Matrix j = jacobian(g, sample_latent(6, 1));
    CHECK(max_abs(sub(j, g.layers[0].weight)) == 0.0);
}

TEST_CASE("single tanh layer jacobian closed form") {
    Generator g = make_mlp({3, 4}, 15);
    g.layers[0].act = Activation::tanh;  // make the only layer tanh
    const std::vector<double> z{0.4, -0.2, 1.1};
    const Matrix j = jacobian(g, z);
    const std::vector<double> pre = matvec(g.layers[0].weight, z);
    for (std::size_t i = 0; i < 4; ++i) {
        const double t = std::tanh(pre[i] + g.layers[0].bias[i]);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(j(i, c) ==
                  doctest::Approx((1.0 - t * t) * g.layers[0].weight(i, c)).epsilon(1e-14));
    }
}

TEST_CASE("chain rule matches central differences across the zoo") {
    const std::vector<std::pair<std::string, Generator>> zoo = {
        {"linear", make_linear(8, 12, 16)},
        {"mlp", make_mlp({8, 5, 10}, 17)},
        {"blocky", make_blocky(16, 8, 8, 0.1, 18)},
    };
    for (const auto& [name, g] : zoo) {
        CAPTURE(name);
        for (std::uint64_t t = 0; t < 10; ++t) {
            const std::vector<double> z = sample_latent(g.d_z, 500 + t);
            CHECK(max_abs(sub(jacobian(g, z), jacobian_fd(g, z, 1e-4))) <= 1e-6);
        }
    }
}

TEST_CASE("central differences are exact for affine maps") {
    Generator g = make_linear(5, 7, 19);
    const std::vector<double> z = sample_latent(5, 2);
    CHECK(max_abs(sub(jacobian_fd(g, z, 0.1), g.layers[0].weight)) <= 1e-12);
}

TEST_CASE("tiny finite-difference steps degrade with round-off") {
    Generator g = make_mlp({6, 6, 6}, 20);
    const std::vector<double> z = sample_latent(6, 3);
    const Matrix exact = jacobian(g, z);
    const double good = max_abs(sub(exact, jacobian_fd(g, z, 1e-4)));
    const double bad = max_abs(sub(exact, jacobian_fd(g, z, 1e-12)));
    CHECK(good <= 1e-6);
    CHECK(bad > 10.0 * good);
}

TEST_CASE("layer jacobians compose the chain rule") {
    // two-layer linear map: [W2 W1, W2]
    Generator g;
    g.kind = "mlp";
    g.d_z = 3;
    g.d_x = 2;
    g.intrinsic_dim = 2;
    Matrix w1(4, 3), w2(2, 4);
    Rng rng(21);
    for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] = rng.normal();
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = rng.normal();
    g.layers.push_back(Layer{w1, std::vector<double>(4, 0.0), Activation::identity});
    g.layers.push_back(Layer{w2, std::vector<double>(2, 0.0), Activation::identity});
    g.validate();

    const std::vector<double> z = sample_latent(3, 4);
    const std::vector<Matrix> jl = layer_jacobians(g, z);
    REQUIRE(jl.size() == 2);
    CHECK(max_abs(sub(jl[0], matmul(w2, w1))) <= 1e-14);
    CHECK(max_abs(sub(jl[1], w2)) <= 1e-14);
    CHECK(max_abs(sub(jl[0], jacobian(g, z))) == 0.0);
}

TEST_CASE("bottleneck caps the rank of every downstream layer jacobian") {
    Generator g = make_mlp({8, 4, 16}, 22);
    const std::vector<double> z = sample_latent(8, 5);
    for (const Matrix& j : layer_jacobians(g, z))
        CHECK(numerical_rank(matmul(transpose(j), j), 1e-8) <= 4);
}

TEST_CASE("rank sequence is nonincreasing across zoo generators") {
    const std::vector<Generator> zoo = {
        make_linear(8, 8, 23), make_mlp({32, 8, 256}, 24), make_mlp({32, 16, 8, 256}, 25),
        make_blocky(32, 16, 16, 0.0, 7), make_blocky(32, 16, 16, 0.05, 7)};
    for (const Generator& g : zoo) {
        for (std::uint64_t t = 0; t < 10; ++t) {
            const std::vector<double> z = sample_latent(g.d_z, 600 + t);
            std::size_t prev = g.d_z + 1;
            bool first = true;
            for (const Matrix& j : layer_jacobians(g, z)) {
                const std::size_t r = numerical_rank(matmul(transpose(j), j), 1e-8);
                if (first && g.intrinsic_dim < g.d_z) CHECK(r < g.d_z);
                if (!first) CHECK(r <= prev);
                prev = r;
                first = false;
            }
        }
    }
}

TEST_CASE("blocky separability at coupling zero") {
    Generator g = make_blocky(32, 16, 16, 0.0, 7);
    const std::vector<double> z = sample_latent(32, 6);
    const Matrix j = jacobian(g, z);
    const RegionMask right = right_half_mask(16);
    // right-half rows have exactly zero columns over latent block A
    for (std::size_t r : right.indices)
        for (std::size_t c = 0; c < 16; ++c) CHECK(j(r, c) == 0.0);

    // null space of the right-half gram contains all of block A's axes
    Matrix gram(32, 32);
    for (std::size_t row : right.indices)
        for (std::size_t a = 0; a < 32; ++a)
            for (std::size_t b = 0; b < 32; ++b) gram(a, b) += j(row, a) * j(row, b);
    const SvdResult s = svd(gram);
    CHECK(numerical_rank(gram, 1e-8) <= 16);
    // columns of V with nonzero sigma have no block-A support
    for (std::size_t col = 0; col < 16; ++col)
        for (std::size_t a = 0; a < 16; ++a) CHECK(std::fabs(s.v(a, col)) <= 1e-12);
}

TEST_CASE("blocky block-A-only latents leave the right half at its base pattern") {
    Generator g = make_blocky(32, 16, 16, 0.0, 7);
    std::vector<double> z(32, 0.0);
    const std::vector<double> base = forward(g, z);
    for (std::size_t i = 0; i < 16; ++i) z[i] = 1.5;  // move block A only
    const std::vector<double> moved = forward(g, z);
    const RegionMask right = right_half_mask(16);
    for (std::size_t p : right.indices) CHECK(moved[p] == base[p]);
    double change_left = 0.0;
    for (std::size_t p : left_half_mask(16).indices)
        change_left = std::max(change_left, std::fabs(moved[p] - base[p]));
    CHECK(change_left > 1e-3);
}

TEST_CASE("blocky cross columns scale with the coupling") {
    const double coupling = 0.2;
    Generator g = make_blocky(32, 16, 16, coupling, 7);
    const std::vector<double> z = sample_latent(32, 8);
    const Matrix j = jacobian(g, z);
    const RegionMask right = right_half_mask(16);
    double mean_cross = 0.0, mean_within = 0.0;
    for (std::size_t c = 0; c < 16; ++c) {
        double cross = 0.0, within = 0.0;
        for (std::size_t r = 0; r < g.d_x; ++r) {
            const bool is_right = (r % 16) >= 8;
            if (is_right)
                cross += j(r, c) * j(r, c);
            else
                within += j(r, c) * j(r, c);
        }
        mean_cross += std::sqrt(cross);
        mean_within += std::sqrt(within);
        CHECK(cross > 0.0);  // nonzero cross effect
    }
    CHECK(mean_cross <= coupling * mean_within);
}

TEST_CASE("make_blocky rejects bad shapes") {
    CHECK_THROWS_AS(make_blocky(32, 16, 32, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_blocky(32, 16, 0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_blocky(8, 2, 4, 0.0, 1), std::invalid_argument);
}

TEST_CASE("generator save/load round-trips byte-identically") {
    for (const Generator& g :
         {make_linear(6, 10, 26), make_mlp({8, 5, 12}, 27), make_blocky(16, 8, 8, 0.3, 28)}) {
        std::ostringstream first;
        write_generator(first, g);
        std::istringstream in(first.str());
        const Generator back = read_generator(in);
        std::ostringstream second;
        write_generator(second, back);
        CHECK(first.str() == second.str());

        const std::vector<double> z = sample_latent(g.d_z, 9);
        const std::vector<double> a = forward(g, z);
        const std::vector<double> b = forward(back, z);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("truncated generator files name the missing section") {
    Generator g = make_mlp({4, 3, 5}, 29);
    std::ostringstream out;
    write_generator(out, g);
    const std::string full = out.str();
    // drop the final line (the last bias row)
    const std::size_t cut = full.rfind('\n', full.size() - 2);
    std::istringstream in(full.substr(0, cut + 1));
    CHECK_THROWS_WITH_AS(read_generator(in), doctest::Contains("bias row"), ParseError);

    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(read_generator(empty), doctest::Contains("generator header"),
                         ParseError);
}

TEST_CASE("first-order expansion accuracy on tanh generators") {
    // ||G(z + a n) - G(z) - a J n|| stays o(a)
    Generator g = make_blocky(32, 16, 16, 0.05, 7);
    const std::vector<double> z = sample_latent(32, 10);
    const Matrix j = jacobian(g, z);
    std::vector<double> n(32, 0.0);
    n[2] = 0.6;
    n[17] = -0.8;
    const double alpha = 1e-3;
    std::vector<double> zshift = z;
    for (std::size_t i = 0; i < 32; ++i) zshift[i] += alpha * n[i];
    const std::vector<double> lhs = forward(g, zshift);
    const std::vector<double> base = forward(g, z);
    const std::vector<double> jn = matvec(j, n);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        err += std::pow(lhs[i] - base[i] - alpha * jn[i], 2);
        scale += jn[i] * jn[i];
    }
    CHECK(std::sqrt(err) / alpha <= 1e-4 * std::sqrt(scale));
}

TEST_CASE("region mask validation and complement") {
    CHECK_THROWS_AS(RegionMask::from_indices({}, 4), std::invalid_argument);
    CHECK_THROWS_AS(RegionMask::from_indices({0, 0}, 4), std::invalid_argument);
    CHECK_THROWS_AS(RegionMask::from_indices({5}, 4), std::invalid_argument);
    const RegionMask m = RegionMask::from_indices({0, 2}, 4);
    const RegionMask c = m.complement(4);
    CHECK(c.indices == std::vector<std::size_t>{1, 3});
    CHECK_THROWS_AS(RegionMask::rectangle(4, 2, 0, 2, 4), std::invalid_argument);
    const RegionMask rect = RegionMask::rectangle(4, 0, 0, 2, 4);
    CHECK(rect.indices == std::vector<std::size_t>{0, 1, 4, 5, 8, 9, 12, 13});
}
