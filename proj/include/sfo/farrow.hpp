#pragma once

#include <complex>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sfo {

/// Admissible fractional-delay interval, half-open [lo, hi).
struct DelayRange {
    double lo = -0.5;
    double hi = 0.5;

    [[nodiscard]] constexpr bool contains(double d) const noexcept { return d >= lo && d < hi; }

    friend constexpr bool operator==(const DelayRange&, const DelayRange&) = default;
};

/// Fractional delay of output sample n for offsets (delta, epsilon): n*delta + epsilon.
[[nodiscard]] constexpr double fractional_delay(std::ptrdiff_t n, double delta, double epsilon) noexcept { return static_cast<double>(n) * delta + epsilon; }

/**
 * Farrow filter bank: L+1 fixed FIR subfilters g_0..g_L of M taps each.
 *
 * The composite filter sum_k d^k G_k(z) approximates a delay of latency()+d samples.
 * With newest input index n the output is centered on input index c = n - latency();
 * it reads inputs c - history() .. c + lookahead().
 */
class FarrowBank {
public:
    FarrowBank(std::vector<std::vector<double>> subfilters, std::size_t latency, DelayRange d_valid = {});

    [[nodiscard]] int         order() const noexcept { return static_cast<int>(_rows) - 1; }
    [[nodiscard]] std::size_t taps() const noexcept { return _taps; }
    [[nodiscard]] std::size_t latency() const noexcept { return _latency; }
    [[nodiscard]] std::size_t history() const noexcept { return _taps - 1 - _latency; }
    [[nodiscard]] std::size_t lookahead() const noexcept { return _latency; }
    [[nodiscard]] DelayRange  d_valid() const noexcept { return _d_valid; }

    [[nodiscard]] std::span<const double> subfilter(std::size_t k) const { return {_coeffs.data() + k * _taps, _taps}; }
    [[nodiscard]] double                  coeff(std::size_t k, std::size_t m) const { return _coeffs[k * _taps + m]; }

    /// Impulse response of sum_k d^k g_k.
    [[nodiscard]] std::vector<double> composite(double d) const;

    /// DTFT of the composite filter at angular frequency omega (rad/sample).
    [[nodiscard]] std::complex<double> frequency_response(double omega, double d) const;

    friend bool operator==(const FarrowBank&, const FarrowBank&) = default;

private:
    std::size_t         _rows;
    std::size_t         _taps;
    std::size_t         _latency;
    DelayRange          _d_valid;
    std::vector<double> _coeffs; // row-major, (L+1) x M
};

/// Lagrange-interpolation Farrow bank: M = L+1 taps, latency floor(L/2). Valid for 1 <= L <= 5.
[[nodiscard]] FarrowBank design_lagrange(int order);

/// Long linear-phase bank: g_k is a Kaiser-windowed ideal k-th order differentiator scaled by (-1)^k/k!,
/// so sum_k d^k G_k approximates exp(-j w (D + d)) as its Taylor expansion in d. M = 2*half_length + 1.
[[nodiscard]] FarrowBank design_wideband(int order, std::size_t half_length = 16, double beta = 8.0);

/// Subfilter outputs u_k(n) = (x * g_k)(n) over the steady-state region.
struct SubfilterOutputs {
    std::size_t         order = 0;
    std::size_t         valid_start = 0; // newest-input index of column 0 (= M-1)
    std::size_t         latency = 0;
    std::vector<double> values;          // column-major: column j holds u_0(n)..u_L(n), n = valid_start + j

    [[nodiscard]] std::size_t              rows() const noexcept { return order + 1; }
    [[nodiscard]] std::size_t              cols() const noexcept { return values.size() / rows(); }
    [[nodiscard]] double                   at(std::size_t k, std::size_t j) const { return values[j * rows() + k]; }
    [[nodiscard]] std::span<const double>  column(std::size_t j) const { return {values.data() + j * rows(), rows()}; }
    [[nodiscard]] std::ptrdiff_t           first_center() const noexcept { return static_cast<std::ptrdiff_t>(valid_start) - static_cast<std::ptrdiff_t>(latency); }
};

[[nodiscard]] SubfilterOutputs subfilter_outputs(const FarrowBank& bank, std::span<const double> x);

/// Horner evaluation of sum_k d^k u_k.
[[nodiscard]] double evaluate(std::span<const double> u_col, double d) noexcept;

/// Compensated samples; samples[j] estimates the reference at index first_index + j.
template<typename T>
struct Aligned {
    std::vector<T> samples;
    std::ptrdiff_t first_index = 0;
};

/// Block compensation with d(c) = c*delta + epsilon at center index c.
/// Throws a range error (with the offending center index) if |d| exceeds d_max anywhere in the block.
[[nodiscard]] Aligned<double> compensate_block(const FarrowBank& bank, std::span<const double> x1, double delta, double epsilon, double d_max = 0.5);

/// Real and imaginary parts through two independent real branches sharing (delta, epsilon).
[[nodiscard]] Aligned<std::complex<double>> compensate_complex(const FarrowBank& bank, std::span<const std::complex<double>> x1, double delta, double epsilon, double d_max = 0.5);

/**
 * Streaming compensator without the |d| <= 0.5 block restriction.
 *
 * Output m reads x1 at continuous position m - d(m); the integer part of d(m) moves the center
 * index and the remainder in [-0.5, 0.5) drives the Farrow polynomial. Input before index 0 and
 * past the end of the stream (during flush) is taken as zero.
 */
class StreamCompensator {
public:
    StreamCompensator(FarrowBank bank, double delta, double epsilon);

    void push(double x, std::vector<double>& out);
    void process(std::span<const double> x, std::vector<double>& out);
    /// Drains until `total` outputs have been emitted in all.
    void flush(std::size_t total, std::vector<double>& out);

    [[nodiscard]] std::size_t emitted() const noexcept { return static_cast<std::size_t>(_next_out); }
    [[nodiscard]] std::size_t consumed() const noexcept { return static_cast<std::size_t>(_received); }

private:
    bool   try_emit(std::vector<double>& out, bool draining);
    double sample(std::ptrdiff_t index) const;

    FarrowBank         _bank;
    double             _delta;
    double             _epsilon;
    std::deque<double> _window;
    std::ptrdiff_t     _window_start = 0;
    std::ptrdiff_t     _received = 0;
    std::ptrdiff_t     _next_out = 0;
    std::vector<double> _scratch;
};

/// Batch wrapper: output length equals input length, out[m] estimates x0[m].
[[nodiscard]] std::vector<double>               stream_compensate(const FarrowBank& bank, std::span<const double> x1, double delta, double epsilon);
[[nodiscard]] std::vector<std::complex<double>> stream_compensate_complex(const FarrowBank& bank, std::span<const std::complex<double>> x1, double delta, double epsilon);

// Coefficient exchange: one subfilter per line, k = 0..L, comma separated, round-trip precision.
[[nodiscard]] std::string to_csv(const FarrowBank& bank);
[[nodiscard]] FarrowBank  bank_from_csv(std::string_view text, std::size_t latency);
void                      save_csv(const FarrowBank& bank, const std::filesystem::path& path);
[[nodiscard]] FarrowBank  load_csv(const std::filesystem::path& path, std::size_t latency);

} // namespace sfo
