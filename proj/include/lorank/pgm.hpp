#pragma once

#include "lorank/matrix.hpp"

namespace lorank {

/// Grayscale PGM with the value range recorded in a comment line:
///   P2|P5
///   # range <lo> <hi>
///   width height
///   255
/// pixel = round(255 * clamp((v - lo) / (hi - lo), 0, 1)); a degenerate
/// range (hi <= lo) maps everything to 0. ASCII (P2) by default, binary
/// (P5) for large images.
void write_pgm(const std::string& path, const Matrix& image, double lo, double hi,
               bool binary = false);

/// Reads either encoding back to pixel values 0..255 (for tests).
Matrix read_pgm(const std::string& path, double* lo = nullptr, double* hi = nullptr);

/// Wraps a flat output vector as a grid x grid image.
Matrix as_image(const std::vector<double>& values, std::size_t grid);

}  // namespace lorank
