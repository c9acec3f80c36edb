#pragma once

#include <complex>
#include <span>
#include <vector>

namespace sfo::detail {

/// Unnormalized DFT (inverse: positive exponent). Safe to call from several threads.
[[nodiscard]] std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, bool inverse = false);

/// Full linear convolution, length a.size() + b.size() - 1.
[[nodiscard]] std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

} // namespace sfo::detail
