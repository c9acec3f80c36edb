#include <sfo/sigsim.hpp>

#include <sfo/error.hpp>

#include "fft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>

namespace sfo {

namespace {
constexpr double pi = std::numbers::pi;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z               = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z               = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double MultiSine::operator()(double t) const noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < amplitude.size(); ++i) {
        acc += amplitude[i] * std::cos(2.0 * pi * frequency[i] * t + phase[i]);
    }
    return acc;
}

MultiSine gen_multisine(int n_tones, std::uint64_t seed, double f_max) {
    if (n_tones < 2) {
        throw Error(ErrorCode::Parameter, fmt::format("multi-sine needs at least 2 tones, got {}", n_tones));
    }
    if (!(f_max > 0.0 && f_max < 0.5)) {
        throw Error(ErrorCode::Parameter, fmt::format("tone frequency limit {} outside (0, 0.5)", f_max));
    }
    std::mt19937_64                        rng(seed);
    std::uniform_int_distribution<int>     level(0, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MultiSine s;
    for (int i = 0; i < n_tones; ++i) {
        const cplx point{2.0 * level(rng) - 3.0, 2.0 * level(rng) - 3.0};
        s.amplitude.push_back(std::abs(point));
        s.phase.push_back(std::arg(point));
        s.frequency.push_back(f_max * (1.0 - unit(rng)));
    }
    return s;
}

namespace {

double kaiser(double r, double beta, double i0_beta) { return std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta; }

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x); }

} // namespace

BandpassNoise::BandpassNoise(const NoiseSpec& spec, std::uint64_t seed) : _spec(spec) {
    if (!(spec.f_lo > 0.0 && spec.f_lo < spec.f_hi && spec.f_hi < 0.5)) {
        throw Error(ErrorCode::Parameter, fmt::format("invalid noise band [{}, {}]", spec.f_lo, spec.f_hi));
    }
    if (!(spec.t_begin < spec.t_end) || spec.oversample < 2 || spec.filter_taps < 3 || spec.filter_taps % 2 == 0) {
        throw Error(ErrorCode::Parameter, "invalid noise span, oversampling or filter length");
    }
    const double os     = spec.oversample;
    const auto   margin = static_cast<std::size_t>(recon_half + 1);
    const auto   inner  = static_cast<std::size_t>(std::ceil((spec.t_end - spec.t_begin) * os));
    const auto   count  = inner + 2 * margin + 1;
    _t0                 = spec.t_begin - static_cast<double>(margin) / os;

    // linear-phase bandpass on the fine grid
    const std::size_t   taps   = spec.filter_taps;
    const double        centre = static_cast<double>(taps - 1) / 2.0;
    const double        lo     = spec.f_lo / os;
    const double        hi     = spec.f_hi / os;
    const double        i0b    = std::cyl_bessel_i(0.0, spec.filter_beta);
    std::vector<double> h(taps);
    for (std::size_t m = 0; m < taps; ++m) {
        const double x = static_cast<double>(m) - centre;
        h[m]           = (2.0 * hi * sinc(2.0 * hi * x) - 2.0 * lo * sinc(2.0 * lo * x)) * kaiser(x / centre, spec.filter_beta, i0b);
    }

    std::mt19937_64                  rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double>              white(count + taps - 1);
    for (auto& w : white) {
        w = gauss(rng);
    }
    const auto full = detail::convolve(white, h);
    _grid.assign(full.begin() + static_cast<std::ptrdiff_t>(taps - 1), full.begin() + static_cast<std::ptrdiff_t>(taps - 1 + count));

    double power = 0.0;
    for (double v : _grid) {
        power += v * v;
    }
    const double scale = 1.0 / std::sqrt(power / static_cast<double>(_grid.size()));
    for (auto& v : _grid) {
        v *= scale;
    }

    const double i0r = std::cyl_bessel_i(0.0, recon_beta);
    _window.resize(static_cast<std::size_t>(recon_half * window_density) + 2);
    for (std::size_t i = 0; i < _window.size(); ++i) {
        const double r = static_cast<double>(i) / (window_density * recon_half);
        _window[i]     = r >= 1.0 ? 0.0 : kaiser(r, recon_beta, i0r);
    }
}

double BandpassNoise::operator()(double t) const {
    if (!(t >= _spec.t_begin && t <= _spec.t_end)) {
        throw Error(ErrorCode::Range, fmt::format("noise evaluated at t={} outside [{}, {}]", t, _spec.t_begin, _spec.t_end));
    }
    const double x    = (t - _t0) * _spec.oversample;
    const double base = std::floor(x);
    const double frac = x - base;
    const auto   i0   = static_cast<std::ptrdiff_t>(base);
    if (frac == 0.0) {
        return _grid[static_cast<std::size_t>(i0)];
    }
    // sin(pi (x - m)) = (-1)^(i0 - m) sin(pi frac)
    const double s   = std::sin(pi * frac) / pi;
    double       acc = 0.0;
    for (std::ptrdiff_t m = i0 - recon_half + 1; m <= i0 + recon_half; ++m) {
        const double u    = x - static_cast<double>(m);
        const double pos  = std::abs(u) * window_density;
        const auto   cell = static_cast<std::size_t>(pos);
        const double w    = _window[cell] + (pos - static_cast<double>(cell)) * (_window[cell + 1] - _window[cell]);
        const double sign = ((i0 - m) % 2 == 0) ? 1.0 : -1.0;
        acc += _grid[static_cast<std::size_t>(m)] * w * sign * s / u;
    }
    return acc;
}

BandpassNoise gen_bandpass_noise(const NoiseSpec& spec, std::uint64_t seed) { return BandpassNoise(spec, seed); }

cplx CarrierOffset::rotation(double t) const noexcept { return std::polar(1.0, 2.0 * pi * cfo_fraction * t / static_cast<double>(fft_size) + phase); }

SignalSampler SignalSampler::with_carrier_offset(const CarrierOffset& offset) const {
    SignalSampler s = *this;
    s._carrier      = offset;
    return s;
}

cplx SignalSampler::carrier_rotation(double t) const noexcept { return _carrier ? _carrier->rotation(t) : cplx{1.0, 0.0}; }

bool SignalSampler::is_complex() const noexcept { return _carrier.has_value() || std::holds_alternative<Ofdm>(_kind); }

cplx SignalSampler::operator()(double t) const {
    const cplx v = std::visit([t](const auto& k) { return cplx(k(t)); }, _kind);
    return _carrier ? v * _carrier->rotation(t) : v;
}

SignalPair<cplx> sample_pair(const SignalSampler& s, std::size_t count, double delta, double epsilon, std::ptrdiff_t first_index) {
    if (!(std::abs(delta) < 0.01) || !std::isfinite(epsilon)) {
        throw Error(ErrorCode::Parameter, fmt::format("offsets out of range: delta={} epsilon={}", delta, epsilon));
    }
    SignalPair<cplx> p;
    p.x0.resize(count);
    p.x1.resize(count);
    std::vector<double> t1(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double n = static_cast<double>(first_index + static_cast<std::ptrdiff_t>(i));
        t1[i]          = n + (n * delta + epsilon);
    }
    const Ofdm* burst = s.ofdm();
    if (burst == nullptr) {
        for (std::size_t i = 0; i < count; ++i) {
            p.x0[i] = s(static_cast<double>(first_index + static_cast<std::ptrdiff_t>(i)));
            p.x1[i] = s(t1[i]);
        }
        return p;
    }
    p.x0 = burst->sample_grid(first_index, count);
    burst->evaluate(t1, p.x1);
    for (std::size_t i = 0; i < count; ++i) {
        p.x0[i] *= s.carrier_rotation(static_cast<double>(first_index + static_cast<std::ptrdiff_t>(i)));
        p.x1[i] *= s.carrier_rotation(t1[i]);
    }
    return p;
}

SignalPair<double> sample_pair_real(const SignalSampler& s, std::size_t count, double delta, double epsilon, std::ptrdiff_t first_index) {
    const auto         c = sample_pair(s, count, delta, epsilon, first_index);
    SignalPair<double> p;
    p.x0.resize(count);
    p.x1.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        p.x0[i] = c.x0[i].real();
        p.x1[i] = c.x1[i].real();
    }
    return p;
}

std::vector<cplx> apply_cfo_po(std::span<const cplx> x, double cfo_fraction, double po, std::size_t fft_size, std::ptrdiff_t first_index) {
    if (fft_size == 0) {
        throw Error(ErrorCode::Parameter, "fft_size must be positive");
    }
    const CarrierOffset rot{cfo_fraction, po, fft_size};
    std::vector<cplx>   y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] * rot.rotation(static_cast<double>(first_index + static_cast<std::ptrdiff_t>(i)));
    }
    return y;
}

namespace {

double noise_sigma(double power, double snr_db) {
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw Error(ErrorCode::Parameter, fmt::format("invalid SNR {}", snr_db));
    }
    if (!(power > 0.0)) {
        throw Error(ErrorCode::Parameter, "cannot add noise relative to a zero-power signal");
    }
    return std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
}

} // namespace

std::vector<double> add_awgn(std::span<const double> x, double snr_db, std::uint64_t seed) {
    std::vector<double> y(x.begin(), x.end());
    if (snr_db == no_noise) {
        return y;
    }
    double power = 0.0;
    for (double v : x) {
        power += v * v;
    }
    const double                     sigma = noise_sigma(x.empty() ? 0.0 : power / static_cast<double>(x.size()), snr_db);
    std::mt19937_64                  rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto& v : y) {
        v += gauss(rng);
    }
    return y;
}

std::vector<cplx> add_awgn(std::span<const cplx> x, double snr_db, std::uint64_t seed) {
    std::vector<cplx> y(x.begin(), x.end());
    if (snr_db == no_noise) {
        return y;
    }
    double power = 0.0;
    for (const auto& v : x) {
        power += std::norm(v);
    }
    const double                     sigma = noise_sigma(x.empty() ? 0.0 : power / static_cast<double>(x.size()), snr_db) / std::sqrt(2.0);
    std::mt19937_64                  rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto& v : y) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        v += cplx(re, im);
    }
    return y;
}

namespace {

template<typename T>
double nmse_impl(std::span<const T> y, std::span<const T> ref) {
    if (y.size() != ref.size() || y.empty()) {
        throw Error(ErrorCode::Parameter, fmt::format("NMSE needs equal non-empty lengths, got {} and {}", y.size(), ref.size()));
    }
    double err = 0.0;
    double pwr = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err += std::norm(y[i] - ref[i]);
        pwr += std::norm(ref[i]);
    }
    if (!(pwr > 0.0)) {
        throw Error(ErrorCode::Parameter, "NMSE reference has zero power");
    }
    if (err == 0.0) {
        return nmse_floor_db;
    }
    return std::max(nmse_floor_db, 10.0 * std::log10(err / pwr));
}

} // namespace

double nmse(std::span<const double> y, std::span<const double> ref) { return nmse_impl(y, ref); }
double nmse(std::span<const cplx> y, std::span<const cplx> ref) { return nmse_impl(y, ref); }

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
    }
    return out;
}

} // namespace

void write_complex_csv(const std::filesystem::path& path, std::span<const cplx> values, std::ptrdiff_t first_index) {
    auto out = open_for_write(path);
    out << "index,real,imag\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << fmt::format("{},{:.17g},{:.17g}\n", first_index + static_cast<std::ptrdiff_t>(i), values[i].real(), values[i].imag());
    }
}

void write_real_csv(const std::filesystem::path& path, std::span<const double> values, std::ptrdiff_t first_index) {
    auto out = open_for_write(path);
    out << "index,real,imag\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << fmt::format("{},{:.17g},0\n", first_index + static_cast<std::ptrdiff_t>(i), values[i]);
    }
}

} // namespace sfo
