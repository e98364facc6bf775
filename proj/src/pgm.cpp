#include "lorank/pgm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace lorank {

namespace {

int to_pixel(double v, double lo, double hi) {
    if (!(hi > lo)) return 0;
    double t = (v - lo) / (hi - lo);
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return static_cast<int>(std::lround(255.0 * t));
}

}  // namespace

void write_pgm(const std::string& path, const Matrix& image, double lo, double hi,
               bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << (binary ? "P5" : "P2") << '\n'
        << "# range " << format_real(lo) << ' ' << format_real(hi) << '\n'
        << image.cols() << ' ' << image.rows() << '\n'
        << 255 << '\n';
    if (binary) {
        std::string bytes;
        bytes.reserve(image.size());
        for (double v : image.entries()) bytes.push_back(static_cast<char>(to_pixel(v, lo, hi)));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    } else {
        for (std::size_t i = 0; i < image.rows(); ++i) {
            for (std::size_t j = 0; j < image.cols(); ++j) {
                if (j) out << ' ';
                out << to_pixel(image(i, j), lo, hi);
            }
            out << '\n';
        }
    }
}

Matrix read_pgm(const std::string& path, double* lo, double* hi) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5") throw ParseError(path + ": not a P2/P5 PGM");
    in.ignore();
    // Optional comment lines; the range comment is "# range lo hi".
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        std::istringstream cs(comment);
        std::string hash, tag;
        double clo, chi;
        if (cs >> hash >> tag >> clo >> chi && tag == "range") {
            if (lo) *lo = clo;
            if (hi) *hi = chi;
        }
    }
    std::size_t w = 0, h = 0;
    int maxval = 0;
    in >> w >> h >> maxval;
    if (!in || maxval != 255) throw ParseError(path + ": bad PGM header");
    Matrix img(h, w);
    if (magic == "P2") {
        for (std::size_t i = 0; i < img.size(); ++i) {
            int v;
            if (!(in >> v)) throw ParseError(path + ": truncated P2 data");
            img.data()[i] = v;
        }
    } else {
        in.ignore();  // single whitespace after maxval
        std::string bytes(img.size(), '\0');
        in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
            throw ParseError(path + ": truncated P5 data");
        for (std::size_t i = 0; i < img.size(); ++i)
            img.data()[i] = static_cast<unsigned char>(bytes[i]);
    }
    return img;
}

Matrix as_image(const std::vector<double>& values, std::size_t grid) {
    if (values.size() != grid * grid)
        throw std::invalid_argument("as_image: length is not grid^2");
    Matrix img(grid, grid);
    for (std::size_t i = 0; i < values.size(); ++i) img.data()[i] = values[i];
    return img;
}

}  // namespace lorank
