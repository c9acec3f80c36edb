#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace sfo {

using cplx = std::complex<double>;

/// Independent 64-bit seed for sub-stream `stream` of a base seed (splitmix64 finalizer).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// ---- 16-QAM ---------------------------------------------------------------

/// Gray label (4 bits: b3 b2 for I, b1 b0 for Q) to the unit-average-power point.
/// Per axis the levels -3, -1, 1, 3 carry the bit pairs 00, 01, 11, 10.
[[nodiscard]] cplx qam16_map(std::uint8_t label) noexcept;
/// Minimum-distance decision back to the Gray label.
[[nodiscard]] std::uint8_t qam16_demap(cplx point) noexcept;
/// Fraction of differing bits between hard decisions on `received` and the labels of `truth`.
[[nodiscard]] double ber_qam16(std::span<const cplx> received, std::span<const cplx> truth);

// ---- continuous-time signals ----------------------------------------------

/// x(t) = sum_i A_i cos(2 pi f_i t + phi_i), t in reference sample periods.
struct MultiSine {
    std::vector<double> amplitude;
    std::vector<double> frequency; // cycles per reference sample
    std::vector<double> phase;

    [[nodiscard]] double operator()(double t) const noexcept;
};

/// Tone amplitudes and phases are the magnitude and angle of random (unnormalized) 16-QAM points;
/// frequencies are uniform in (0, f_max].
[[nodiscard]] MultiSine gen_multisine(int n_tones, std::uint64_t seed, double f_max = 0.225);

struct NoiseSpec {
    double      f_lo        = 0.05; // band edges, cycles per reference sample
    double      f_hi        = 0.35;
    double      t_begin     = -64.0; // evaluable time span, reference samples
    double      t_end       = 1024.0;
    int         oversample  = 16;
    std::size_t filter_taps = 4097;
    double      filter_beta = 10.0;
};

/**
 * Bandpass-filtered white Gaussian noise with an exact value at any t in the span:
 * white noise on a fine grid is bandpass filtered, then read at arbitrary t through
 * 64-tap Kaiser-windowed sinc reconstruction. Normalized to unit power.
 */
class BandpassNoise {
public:
    static constexpr int    recon_half = 32;
    static constexpr double recon_beta = 12.0;
    static constexpr int    window_density = 1024;

    BandpassNoise(const NoiseSpec& spec, std::uint64_t seed);

    /// Throws a range error outside [spec.t_begin, spec.t_end].
    [[nodiscard]] double operator()(double t) const;

    [[nodiscard]] const NoiseSpec&           spec() const noexcept { return _spec; }
    [[nodiscard]] std::span<const double>    grid() const noexcept { return _grid; }
    /// Time of grid()[i] is grid_time(i).
    [[nodiscard]] double grid_time(std::size_t i) const noexcept { return _t0 + static_cast<double>(i) / _spec.oversample; }

private:
    NoiseSpec           _spec;
    double              _t0;
    std::vector<double> _grid;
    std::vector<double> _window; // Kaiser window over [0, recon_half], tabulated at window_density points per unit
};

[[nodiscard]] BandpassNoise gen_bandpass_noise(const NoiseSpec& spec, std::uint64_t seed);

struct OfdmSpec {
    std::size_t fft_size      = 2048;
    std::size_t active        = 1536; // centered, DC unused: k in [-active/2, -1] and [1, active/2]
    std::size_t cp            = 256;
    std::size_t symbols       = 4;
    std::size_t pilot_spacing = 8; // every pilot_spacing-th active subcarrier is a known pilot

    void                      validate() const;
    [[nodiscard]] std::size_t symbol_length() const noexcept { return fft_size + cp; }
    [[nodiscard]] std::size_t length() const noexcept { return symbols * symbol_length(); }
    /// Subcarrier index k of active slot a.
    [[nodiscard]] std::ptrdiff_t subcarrier(std::size_t a) const noexcept;
};

/// Unit-power OFDM burst, cyclic prefix first. Symbol s occupies [s*Ls, (s+1)*Ls); the first and last
/// symbols extend (as periodic continuations) before time 0 and past the end.
class Ofdm {
public:
    Ofdm(const OfdmSpec& spec, std::uint64_t seed);

    [[nodiscard]] cplx operator()(double t) const noexcept;
    /// out[i] = (*this)(t[i]); out.size() must equal t.size().
    void evaluate(std::span<const double> t, std::span<cplx> out) const noexcept;
    /// Samples at integer times first_index .. first_index + count - 1 via inverse FFT; equals operator() up to rounding.
    [[nodiscard]] std::vector<cplx> sample_grid(std::ptrdiff_t first_index, std::size_t count) const;

    [[nodiscard]] const OfdmSpec&         spec() const noexcept { return _spec; }
    /// Transmitted points, symbols() x active, subcarrier order as OfdmSpec::subcarrier.
    [[nodiscard]] std::span<const cplx>   payload(std::size_t symbol) const { return {_payload.data() + symbol * _spec.active, _spec.active}; }
    [[nodiscard]] std::span<const cplx>   payload() const noexcept { return _payload; }

private:
    OfdmSpec          _spec;
    std::vector<cplx> _payload;
    std::vector<cplx> _poly; // symbols x (active + 1) Horner coefficients, k = -active/2 .. active/2
};

[[nodiscard]] Ofdm gen_ofdm(const OfdmSpec& spec, std::uint64_t seed);

/// Carrier frequency offset (fraction of the subcarrier spacing fs/fft_size) and phase offset (rad).
struct CarrierOffset {
    double      cfo_fraction = 0.0;
    double      phase        = 0.0;
    std::size_t fft_size     = 2048;

    [[nodiscard]] cplx rotation(double t) const noexcept;
};

class SignalSampler {
public:
    using Kind = std::variant<MultiSine, BandpassNoise, Ofdm>;

    explicit SignalSampler(Kind kind) : _kind(std::move(kind)) {}

    /// The carrier offset multiplies the continuous-time signal, so every converter sees it.
    [[nodiscard]] SignalSampler with_carrier_offset(const CarrierOffset& offset) const;

    [[nodiscard]] cplx operator()(double t) const;
    [[nodiscard]] bool is_complex() const noexcept;
    /// Carrier rotation at t (1 without a carrier offset).
    [[nodiscard]] cplx carrier_rotation(double t) const noexcept;

    [[nodiscard]] const Kind& kind() const noexcept { return _kind; }
    [[nodiscard]] const Ofdm* ofdm() const noexcept { return std::get_if<Ofdm>(&_kind); }

private:
    Kind                         _kind;
    std::optional<CarrierOffset> _carrier;
};

template<typename T>
struct SignalPair {
    std::vector<T> x0;
    std::vector<T> x1;
};

/// x0[i] = x_a(n), x1[i] = x_a(n (1 + delta) + epsilon), n = first_index + i.
[[nodiscard]] SignalPair<cplx>   sample_pair(const SignalSampler& s, std::size_t count, double delta, double epsilon, std::ptrdiff_t first_index = 0);
/// Real part of sample_pair.
[[nodiscard]] SignalPair<double> sample_pair_real(const SignalSampler& s, std::size_t count, double delta, double epsilon, std::ptrdiff_t first_index = 0);

/// y(n) = x(n) exp(j (2 pi cfo_fraction n / fft_size + po)), n = first_index + i.
[[nodiscard]] std::vector<cplx> apply_cfo_po(std::span<const cplx> x, double cfo_fraction, double po, std::size_t fft_size, std::ptrdiff_t first_index = 0);

inline constexpr double no_noise = std::numeric_limits<double>::infinity();

/// Adds white Gaussian noise at the requested SNR relative to the measured power of x.
/// For complex input the noise power is split evenly between real and imaginary parts.
[[nodiscard]] std::vector<double> add_awgn(std::span<const double> x, double snr_db, std::uint64_t seed);
[[nodiscard]] std::vector<cplx>   add_awgn(std::span<const cplx> x, double snr_db, std::uint64_t seed);

inline constexpr double nmse_floor_db = -300.0;

/// 10 log10(sum |y - ref|^2 / sum |ref|^2), floored at nmse_floor_db.
[[nodiscard]] double nmse(std::span<const double> y, std::span<const double> ref);
[[nodiscard]] double nmse(std::span<const cplx> y, std::span<const cplx> ref);

// ---- OFDM receiver plumbing -----------------------------------------------

/// Equalized active subcarriers of each symbol, [symbol][slot]. y[i] is the sample at time first_index + i.
/// The FFT window of symbol s starts half a cyclic prefix early; the implied phase ramp is removed.
[[nodiscard]] std::vector<std::vector<cplx>> ofdm_demodulate(std::span<const cplx> y, const OfdmSpec& spec, std::ptrdiff_t first_index = 0);

/// Centre time of the FFT window used for symbol s.
[[nodiscard]] double ofdm_window_center(const OfdmSpec& spec, std::size_t symbol) noexcept;

struct PhaseFit {
    double cfo_fraction = 0.0; // fraction of the subcarrier spacing
    double phase        = 0.0; // rad at t = 0
};

/// Least-squares line through the unwrapped phases of equalized/pilots against time.
[[nodiscard]] PhaseFit residual_phase_fit(std::span<const cplx> equalized, std::span<const cplx> pilots, std::span<const double> times, std::size_t fft_size);

/// Pilot observations of a demodulated burst: every pilot_spacing-th slot of every symbol.
struct PilotSet {
    std::vector<cplx>   equalized;
    std::vector<cplx>   pilots;
    std::vector<double> times;
};
[[nodiscard]] PilotSet collect_pilots(const std::vector<std::vector<cplx>>& demod, const Ofdm& burst);

// ---- CSV dumps ------------------------------------------------------------

/// Columns index,real,imag; index is first_index + i.
void write_complex_csv(const std::filesystem::path& path, std::span<const cplx> values, std::ptrdiff_t first_index = 0);
void write_real_csv(const std::filesystem::path& path, std::span<const double> values, std::ptrdiff_t first_index = 0);

} // namespace sfo
