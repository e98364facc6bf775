#include "lorank/generator.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lorank {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

const char* activation_name(Activation a) {
    return a == Activation::identity ? "identity" : "tanh";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    throw ParseError("unknown activation '" + name + "'");
}

void Generator::validate() const {
    if (layers.empty()) throw std::invalid_argument("generator: no layers");
    if (layers.front().weight.cols() != d_z)
        throw std::invalid_argument("generator: first layer input width != d_z");
    if (layers.back().weight.rows() != d_x)
        throw std::invalid_argument("generator: last layer output width != d_x");
    std::size_t min_width = std::min(d_z, d_x);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Layer& l = layers[k];
        if (l.bias.size() != l.weight.rows())
            throw std::invalid_argument("generator: bias size mismatch in layer " +
                                        std::to_string(k));
        if (k + 1 < layers.size() && l.weight.rows() != layers[k + 1].weight.cols())
            throw std::invalid_argument("generator: layer " + std::to_string(k) +
                                        " output width does not feed layer " +
                                        std::to_string(k + 1));
        min_width = std::min(min_width, l.weight.rows());
    }
    if (intrinsic_dim > min_width)
        throw std::invalid_argument("generator: intrinsic_dim exceeds narrowest width");
}

std::size_t image_grid(const Generator& g) {
    std::size_t r = static_cast<std::size_t>(std::sqrt(double(g.d_x)));
    while (r * r < g.d_x) ++r;
    return r * r == g.d_x ? r : 0;
}

RegionMask RegionMask::from_indices(std::vector<std::size_t> idx, std::size_t d_x) {
    if (idx.empty()) throw std::invalid_argument("region mask: empty");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= d_x) throw std::invalid_argument("region mask: index out of range");
        if (i && idx[i] <= idx[i - 1])
            throw std::invalid_argument("region mask: indices must be strictly increasing");
    }
    return RegionMask{std::move(idx)};
}

RegionMask RegionMask::rectangle(std::size_t grid, std::size_t x0, std::size_t y0,
                                 std::size_t x1, std::size_t y1) {
    if (x0 >= x1 || y0 >= y1 || x1 > grid || y1 > grid)
        throw std::invalid_argument("region mask: empty or out-of-range rectangle");
    std::vector<std::size_t> idx;
    idx.reserve((x1 - x0) * (y1 - y0));
    for (std::size_t r = y0; r < y1; ++r)
        for (std::size_t c = x0; c < x1; ++c) idx.push_back(r * grid + c);
    std::sort(idx.begin(), idx.end());
    return RegionMask{std::move(idx)};
}

RegionMask RegionMask::complement(std::size_t d_x) const {
    std::vector<std::size_t> out;
    out.reserve(d_x - indices.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < d_x; ++i) {
        if (next < indices.size() && indices[next] == i) {
            ++next;
        } else {
            out.push_back(i);
        }
    }
    if (out.empty()) throw std::invalid_argument("region mask: complement is empty");
    return RegionMask{std::move(out)};
}

RegionMask left_half_mask(std::size_t grid) {
    return RegionMask::rectangle(grid, 0, 0, grid / 2, grid);
}

RegionMask right_half_mask(std::size_t grid) {
    return RegionMask::rectangle(grid, grid / 2, 0, grid, grid);
}

std::vector<double> sample_latent(std::size_t d_z, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> z(d_z);
    for (double& v : z) v = rng.normal();
    return z;
}

namespace {

std::vector<double> apply_layer(const Layer& l, const std::vector<double>& x) {
    std::vector<double> out = matvec(l.weight, x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += l.bias[i];
    if (l.act == Activation::tanh)
        for (double& v : out) v = std::tanh(v);
    return out;
}

// diag(act'(pre)) * W for one layer evaluated at input x.
Matrix local_jacobian(const Layer& l, const std::vector<double>& x) {
    if (l.act == Activation::identity) return l.weight;
    std::vector<double> pre = matvec(l.weight, x);
    Matrix j = l.weight;
    for (std::size_t i = 0; i < j.rows(); ++i) {
        const double t = std::tanh(pre[i] + l.bias[i]);
        const double gain = 1.0 - t * t;
        for (std::size_t c = 0; c < j.cols(); ++c) j(i, c) *= gain;
    }
    return j;
}

}  // namespace

std::vector<double> forward(const Generator& g, const std::vector<double>& z) {
    if (z.size() != g.d_z) throw std::invalid_argument("forward: latent length != d_z");
    std::vector<double> x = z;
    for (const Layer& l : g.layers) x = apply_layer(l, x);
    return x;
}

Matrix jacobian(const Generator& g, const std::vector<double>& z) {
    if (z.size() != g.d_z) throw std::invalid_argument("jacobian: latent length != d_z");
    std::vector<double> x = z;
    Matrix acc;
    for (std::size_t k = 0; k < g.layers.size(); ++k) {
        Matrix local = local_jacobian(g.layers[k], x);
        acc = k == 0 ? std::move(local) : matmul(local, acc);
        x = apply_layer(g.layers[k], x);
    }
    return acc;
}

Matrix jacobian_fd(const Generator& g, const std::vector<double>& z, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("jacobian_fd: step must be positive");
    Matrix j(g.d_x, g.d_z);
    std::vector<double> zp = z, zm = z;
    for (std::size_t k = 0; k < g.d_z; ++k) {
        const double h = step * std::max(1.0, std::fabs(z[k]));
        zp[k] = z[k] + h;
        zm[k] = z[k] - h;
        const std::vector<double> fp = forward(g, zp);
        const std::vector<double> fm = forward(g, zm);
        for (std::size_t i = 0; i < g.d_x; ++i) j(i, k) = (fp[i] - fm[i]) / (2.0 * h);
        zp[k] = z[k];
        zm[k] = z[k];
    }
    return j;
}

std::vector<Matrix> layer_jacobians(const Generator& g, const std::vector<double>& z) {
    const std::size_t n = g.layers.size();
    std::vector<std::vector<double>> inputs(n);
    std::vector<double> x = z;
    for (std::size_t k = 0; k < n; ++k) {
        inputs[k] = x;
        x = apply_layer(g.layers[k], x);
    }
    std::vector<Matrix> out(n);
    Matrix acc;
    for (std::size_t k = n; k-- > 0;) {
        Matrix local = local_jacobian(g.layers[k], inputs[k]);
        acc = (k + 1 == n) ? std::move(local) : matmul(acc, local);
        out[k] = acc;
    }
    return out;
}

namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Orthonormal columns (rows >= cols) or rows (rows < cols) of a Gaussian
// draw, by modified Gram-Schmidt with one re-orthogonalization pass.
Matrix random_semiorthogonal(Rng& rng, std::size_t rows, std::size_t cols) {
    if (rows < cols) return transpose(random_semiorthogonal(rng, cols, rows));
    Matrix a = gaussian_matrix(rng, rows, cols, 1.0);
    for (std::size_t j = 0; j < cols; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < j; ++c) {
                double d = 0.0;
                for (std::size_t i = 0; i < rows; ++i) d += a(i, c) * a(i, j);
                for (std::size_t i = 0; i < rows; ++i) a(i, j) -= d * a(i, c);
            }
        }
        double nj = 0.0;
        for (std::size_t i = 0; i < rows; ++i) nj += a(i, j) * a(i, j);
        nj = std::sqrt(nj);
        if (nj < 1e-12) throw NumericError("random_semiorthogonal: degenerate draw");
        for (std::size_t i = 0; i < rows; ++i) a(i, j) /= nj;
    }
    return a;
}

std::vector<double> unit_gaussian(Rng& rng, std::size_t n) {
    std::vector<double> v = gaussian_vector(rng, n, 1.0);
    const double nv = norm(v);
    for (double& x : v) x /= nv;
    return v;
}

// Block weight scales; chosen so the tanh layer stays in its responsive
// range and region changes at alpha = 1 are O(0.1) per pixel.
constexpr double kBlockyScale1 = 0.4;
constexpr double kBlockyBias1 = 0.15;
constexpr double kBlockyDominance = 3.0;
constexpr double kBlockyCross = 0.8;
constexpr double kBlockyScale2 = 2.0;
constexpr double kBlockyBias2 = 0.5;

}  // namespace

Generator make_linear(std::size_t d_z, std::size_t d_x, std::uint64_t seed,
                      bool identity_init) {
    if (d_z == 0 || d_x == 0) throw std::invalid_argument("make_linear: zero dimension");
    Rng rng(seed);
    Layer l;
    if (identity_init) {
        if (d_z != d_x)
            throw std::invalid_argument("make_linear: identity init needs d_z == d_x");
        l.weight = Matrix::identity(d_z);
    } else {
        l.weight = gaussian_matrix(rng, d_x, d_z, 1.0 / std::sqrt(double(d_z)));
    }
    l.bias.assign(d_x, 0.0);
    l.act = Activation::identity;
    Generator g{"linear", {std::move(l)}, d_z, d_x, std::min(d_z, d_x)};
    g.validate();
    return g;
}

Generator make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least two dims");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("make_mlp: zero width");
    Rng rng(seed);
    Generator g;
    g.kind = "mlp";
    g.d_z = dims.front();
    g.d_x = dims.back();
    g.intrinsic_dim = *std::min_element(dims.begin(), dims.end());
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Layer l;
        l.weight = gaussian_matrix(rng, dims[k + 1], dims[k], 1.0 / std::sqrt(double(dims[k])));
        l.bias = gaussian_vector(rng, dims[k + 1], 0.1);
        l.act = (k + 2 < dims.size()) ? Activation::tanh : Activation::identity;
        g.layers.push_back(std::move(l));
    }
    g.validate();
    return g;
}

Generator make_blocky(std::size_t d_z, std::size_t grid, std::size_t block_split,
                      double coupling, std::uint64_t seed) {
    if (block_split == 0 || block_split >= d_z)
        throw std::invalid_argument("make_blocky: block_split must be in [1, d_z)");
    if (grid < 2) throw std::invalid_argument("make_blocky: grid too small");
    if (coupling < 0.0 || coupling > 1.0)
        throw std::invalid_argument("make_blocky: coupling must be in [0, 1]");
    const std::size_t d_x = grid * grid;
    const std::size_t nb = d_z - block_split;
    const RegionMask left = left_half_mask(grid);
    const std::size_t n_left = left.count();
    const std::size_t n_right = d_x - n_left;
    if (n_left < block_split || n_right < nb)
        throw std::invalid_argument("make_blocky: image halves narrower than latent blocks");

    Rng rng(seed);
    const std::vector<double> w_a = unit_gaussian(rng, block_split);
    const std::vector<double> w_b = unit_gaussian(rng, nb);
    Matrix ga = random_semiorthogonal(rng, block_split, block_split);
    Matrix gb = random_semiorthogonal(rng, nb, nb);
    const Matrix xa = random_semiorthogonal(rng, block_split, nb);
    const Matrix xb = random_semiorthogonal(rng, nb, block_split);
    const std::vector<double> b1 = gaussian_vector(rng, d_z, kBlockyBias1);
    const Matrix ra = random_semiorthogonal(rng, n_left, block_split);
    const Matrix rb = random_semiorthogonal(rng, n_right, nb);
    const std::vector<double> b2 = gaussian_vector(rng, d_x, kBlockyBias2);

    // Within-block drive Q (I + (dom-1) w w^T) scale: orthogonal mixing with a
    // dominant dense direction per block.
    auto boost = [](Matrix& q, const std::vector<double>& w) {
        const std::size_t n = q.rows();
        Matrix qw(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += q(i, j) * w[j];
            qw(i, 0) = s;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                q(i, j) = kBlockyScale1 * (q(i, j) + (kBlockyDominance - 1.0) * qw(i, 0) * w[j]);
    };
    boost(ga, w_a);
    boost(gb, w_b);

    Matrix w1(d_z, d_z);
    for (std::size_t i = 0; i < block_split; ++i) {
        for (std::size_t j = 0; j < block_split; ++j) w1(i, j) = ga(i, j);
        for (std::size_t j = 0; j < nb; ++j)
            w1(i, block_split + j) = coupling * kBlockyCross * kBlockyScale1 * xa(i, j);
    }
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < nb; ++j) w1(block_split + i, block_split + j) = gb(i, j);
        for (std::size_t j = 0; j < block_split; ++j)
            w1(block_split + i, j) = coupling * kBlockyCross * kBlockyScale1 * xb(i, j);
    }

    Matrix w2(d_x, d_z);
    const double scale_a = kBlockyScale2 * std::sqrt(double(n_left) / double(block_split));
    const double scale_b = kBlockyScale2 * std::sqrt(double(n_right) / double(nb));
    std::size_t li = 0, ri = 0;
    for (std::size_t p = 0; p < d_x; ++p) {
        if (p % grid < grid / 2) {
            for (std::size_t j = 0; j < block_split; ++j) w2(p, j) = scale_a * ra(li, j);
            ++li;
        } else {
            for (std::size_t j = 0; j < nb; ++j) w2(p, block_split + j) = scale_b * rb(ri, j);
            ++ri;
        }
    }

    Generator g;
    g.kind = "blocky";
    g.layers.push_back(Layer{std::move(w1), b1, Activation::tanh});
    g.layers.push_back(Layer{std::move(w2), b2, Activation::identity});
    g.d_z = d_z;
    g.d_x = d_x;
    g.intrinsic_dim = std::min(d_z, d_x);
    g.validate();
    return g;
}

void write_generator(std::ostream& out, const Generator& g) {
    out << g.kind << ' ' << g.d_z << ' ' << g.d_x << ' ' << g.intrinsic_dim << ' '
        << g.layers.size() << '\n';
    for (const Layer& l : g.layers) {
        out << l.weight.rows() << ' ' << l.weight.cols() << ' ' << activation_name(l.act)
            << '\n';
        for (std::size_t i = 0; i < l.weight.rows(); ++i) {
            for (std::size_t j = 0; j < l.weight.cols(); ++j) {
                if (j) out << ' ';
                out << format_real(l.weight(i, j));
            }
            out << '\n';
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) {
            if (i) out << ' ';
            out << format_real(l.bias[i]);
        }
        out << '\n';
    }
}

namespace {

std::string expect_line(std::istream& in, std::size_t& line_no, const std::string& what) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("line " + std::to_string(line_no + 1) + ": truncated input, missing " +
                         what);
    ++line_no;
    return line;
}

}  // namespace

Generator read_generator(std::istream& in) {
    std::size_t line_no = 0;
    Generator g;
    {
        std::istringstream h(expect_line(in, line_no, "generator header"));
        std::size_t n_layers = 0;
        if (!(h >> g.kind >> g.d_z >> g.d_x >> g.intrinsic_dim >> n_layers))
            throw ParseError("line 1: bad generator header, expected "
                             "'kind d_z d_x intrinsic_dim n_layers'");
        if (n_layers == 0) throw ParseError("line 1: generator must have at least one layer");
        g.layers.reserve(n_layers);
        for (std::size_t k = 0; k < n_layers; ++k) {
            std::istringstream lh(
                expect_line(in, line_no, "layer " + std::to_string(k) + " header"));
            std::size_t rows = 0, cols = 0;
            std::string act;
            if (!(lh >> rows >> cols >> act))
                throw ParseError("line " + std::to_string(line_no) + ": bad layer header");
            Layer layer;
            layer.act = activation_from_name(act);
            layer.weight = Matrix(rows, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                std::istringstream row(expect_line(
                    in, line_no, "weight row " + std::to_string(i) + " of layer " +
                                     std::to_string(k)));
                for (std::size_t j = 0; j < cols; ++j) {
                    double v;
                    if (!(row >> v) || !std::isfinite(v))
                        throw ParseError("line " + std::to_string(line_no) +
                                         ": bad weight entry");
                    layer.weight(i, j) = v;
                }
            }
            std::istringstream brow(
                expect_line(in, line_no, "bias row of layer " + std::to_string(k)));
            layer.bias.resize(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                if (!(brow >> layer.bias[i]) || !std::isfinite(layer.bias[i]))
                    throw ParseError("line " + std::to_string(line_no) + ": bad bias entry");
            }
            g.layers.push_back(std::move(layer));
        }
    }
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("invalid generator: ") + e.what());
    }
    return g;
}

void save_generator(const std::string& path, const Generator& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_generator(out, g);
}

Generator load_generator(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_generator(in);
}

}  // namespace lorank
