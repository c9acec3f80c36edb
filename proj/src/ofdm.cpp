#include <sfo/sigsim.hpp>

#include <sfo/error.hpp>

#include "fft.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace sfo {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

void OfdmSpec::validate() const {
    if (fft_size < 4 || active < 2 || active % 2 != 0 || active >= fft_size) {
        throw Error(ErrorCode::Parameter, fmt::format("invalid OFDM layout: {} active of {} subcarriers (need an even count below the FFT size)", active, fft_size));
    }
    if (cp >= fft_size || symbols < 1 || pilot_spacing < 1) {
        throw Error(ErrorCode::Parameter, "invalid OFDM cyclic prefix, symbol count or pilot spacing");
    }
}

std::ptrdiff_t OfdmSpec::subcarrier(std::size_t a) const noexcept {
    const auto half = static_cast<std::ptrdiff_t>(active / 2);
    const auto i    = static_cast<std::ptrdiff_t>(a);
    return i < half ? i - half : i - half + 1;
}

Ofdm::Ofdm(const OfdmSpec& spec, std::uint64_t seed) : _spec(spec) {
    spec.validate();
    const std::size_t A = spec.active;

    std::mt19937_64                    rng(seed);
    std::uniform_int_distribution<int> label(0, 15);
    _payload.resize(spec.symbols * A);
    for (auto& p : _payload) {
        p = qam16_map(static_cast<std::uint8_t>(label(rng)));
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(A));
    _poly.assign(spec.symbols * (A + 1), cplx{});
    for (std::size_t s = 0; s < spec.symbols; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto pos                     = static_cast<std::size_t>(spec.subcarrier(a) + static_cast<std::ptrdiff_t>(A / 2));
            _poly[s * (A + 1) + pos] = _payload[s * A + a] * scale;
        }
    }
}

namespace {

struct Phase {
    std::size_t symbol;
    double      tau;
};

Phase locate(const OfdmSpec& spec, double t) noexcept {
    const double Ls  = static_cast<double>(spec.symbol_length());
    const double top = static_cast<double>(spec.symbols - 1);
    const double s   = std::clamp(std::floor(t / Ls), 0.0, top);
    return {static_cast<std::size_t>(s), t - s * Ls - static_cast<double>(spec.cp)};
}

} // namespace

cplx Ofdm::operator()(double t) const noexcept {
    cplx out;
    evaluate(std::span<const double>(&t, 1), std::span<cplx>(&out, 1));
    return out;
}

void Ofdm::evaluate(std::span<const double> t, std::span<cplx> out) const noexcept {
    constexpr std::size_t lanes = 4;
    const double          N     = static_cast<double>(_spec.fft_size);
    const std::size_t     A     = _spec.active;
    const double          shift = -two_pi * static_cast<double>(A / 2) / N;

    std::size_t i = 0;
    while (i < t.size()) {
        // up to four times of the same symbol share one pass over the coefficients
        const Phase first = locate(_spec, t[i]);
        std::size_t n     = 1;
        std::array<double, lanes> tau{first.tau, 0.0, 0.0, 0.0};
        while (n < lanes && i + n < t.size()) {
            const Phase p = locate(_spec, t[i + n]);
            if (p.symbol != first.symbol) {
                break;
            }
            tau[n++] = p.tau;
        }
        std::array<double, lanes> zr{};
        std::array<double, lanes> zi{};
        for (std::size_t l = 0; l < lanes; ++l) {
            zr[l] = std::cos(two_pi * tau[l] / N);
            zi[l] = std::sin(two_pi * tau[l] / N);
        }
        const cplx*               coef = _poly.data() + first.symbol * (A + 1);
        std::array<double, lanes> ar{};
        std::array<double, lanes> ai{};
        for (std::size_t k = A + 1; k-- > 0;) {
            const double cr = coef[k].real();
            const double ci = coef[k].imag();
            for (std::size_t l = 0; l < lanes; ++l) {
                const double r = ar[l] * zr[l] - ai[l] * zi[l] + cr;
                ai[l]          = ar[l] * zi[l] + ai[l] * zr[l] + ci;
                ar[l]          = r;
            }
        }
        for (std::size_t l = 0; l < n; ++l) {
            const double phi = shift * tau[l];
            const double c   = std::cos(phi);
            const double s   = std::sin(phi);
            out[i + l]       = {ar[l] * c - ai[l] * s, ar[l] * s + ai[l] * c};
        }
        i += n;
    }
}

std::vector<cplx> Ofdm::sample_grid(std::ptrdiff_t first_index, std::size_t count) const {
    const std::size_t N = _spec.fft_size;
    const std::size_t A = _spec.active;

    std::vector<std::vector<cplx>> time(_spec.symbols);
    for (std::size_t s = 0; s < _spec.symbols; ++s) {
        std::vector<cplx> bins(N);
        for (std::size_t a = 0; a < A; ++a) {
            const auto k                                                  = _spec.subcarrier(a);
            bins[static_cast<std::size_t>((k + static_cast<std::ptrdiff_t>(N)) % static_cast<std::ptrdiff_t>(N))] = _payload[s * A + a];
        }
        time[s] = detail::dft(bins, true);
    }

    const double      scale = 1.0 / std::sqrt(static_cast<double>(A));
    const auto        Ls    = static_cast<std::ptrdiff_t>(_spec.symbol_length());
    const auto        last  = static_cast<std::ptrdiff_t>(_spec.symbols) - 1;
    const auto        Nn    = static_cast<std::ptrdiff_t>(N);
    std::vector<cplx> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::ptrdiff_t n   = first_index + static_cast<std::ptrdiff_t>(i);
        const std::ptrdiff_t s   = std::clamp(n >= 0 ? n / Ls : -((-n + Ls - 1) / Ls), std::ptrdiff_t{0}, last);
        const std::ptrdiff_t tau = n - s * Ls - static_cast<std::ptrdiff_t>(_spec.cp);
        out[i]                   = time[static_cast<std::size_t>(s)][static_cast<std::size_t>(((tau % Nn) + Nn) % Nn)] * scale;
    }
    return out;
}

Ofdm gen_ofdm(const OfdmSpec& spec, std::uint64_t seed) { return Ofdm(spec, seed); }

double ofdm_window_center(const OfdmSpec& spec, std::size_t symbol) noexcept {
    const double start = static_cast<double>(symbol * spec.symbol_length() + spec.cp - spec.cp / 2);
    return start + (static_cast<double>(spec.fft_size) - 1.0) / 2.0;
}

std::vector<std::vector<cplx>> ofdm_demodulate(std::span<const cplx> y, const OfdmSpec& spec, std::ptrdiff_t first_index) {
    spec.validate();
    const std::size_t N     = spec.fft_size;
    const std::size_t A     = spec.active;
    const auto        back  = static_cast<std::ptrdiff_t>(spec.cp / 2);
    const double      scale = std::sqrt(static_cast<double>(A)) / static_cast<double>(N);

    std::vector<std::vector<cplx>> out(spec.symbols, std::vector<cplx>(A));
    for (std::size_t s = 0; s < spec.symbols; ++s) {
        const auto start = static_cast<std::ptrdiff_t>(s * spec.symbol_length() + spec.cp) - back - first_index;
        if (start < 0 || static_cast<std::size_t>(start) + N > y.size()) {
            throw Error(ErrorCode::Range, fmt::format("symbol {} FFT window not covered by the record", s), start + first_index);
        }
        const auto X = detail::dft(y.subspan(static_cast<std::size_t>(start), N));
        for (std::size_t a = 0; a < A; ++a) {
            const auto k   = spec.subcarrier(a);
            const auto bin = static_cast<std::size_t>((k + static_cast<std::ptrdiff_t>(N)) % static_cast<std::ptrdiff_t>(N));
            out[s][a]      = X[bin] * scale * std::polar(1.0, two_pi * static_cast<double>(k * back) / static_cast<double>(N));
        }
    }
    return out;
}

PhaseFit residual_phase_fit(std::span<const cplx> equalized, std::span<const cplx> pilots, std::span<const double> times, std::size_t fft_size) {
    if (equalized.size() != pilots.size() || pilots.size() != times.size()) {
        throw Error(ErrorCode::Parameter, "pilot, observation and time counts differ");
    }
    if (pilots.size() < 2 || fft_size == 0) {
        throw Error(ErrorCode::Parameter, "phase fit needs at least two pilots");
    }
    std::vector<std::size_t> order(pilots.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<double> phase(order.size());
    double              previous = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t j = order[i];
        if (pilots[j] == cplx{} || equalized[j] == cplx{}) {
            throw Error(ErrorCode::Parameter, "zero pilot or observation");
        }
        double p = std::arg(equalized[j] / pilots[j]);
        if (i > 0) {
            p += two_pi * std::round((previous - p) / two_pi);
        }
        phase[i] = p;
        previous = p;
    }

    double t_mean = 0.0;
    double p_mean = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        t_mean += times[order[i]];
        p_mean += phase[i];
    }
    t_mean /= static_cast<double>(order.size());
    p_mean /= static_cast<double>(order.size());
    double stt = 0.0;
    double stp = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double dt = times[order[i]] - t_mean;
        stt += dt * dt;
        stp += dt * (phase[i] - p_mean);
    }
    if (!(stt > 0.0)) {
        throw Error(ErrorCode::Parameter, "all pilots share one time instant; slope is undetermined");
    }
    const double slope = stp / stt;
    return {slope * static_cast<double>(fft_size) / two_pi, p_mean - slope * t_mean};
}

PilotSet collect_pilots(const std::vector<std::vector<cplx>>& demod, const Ofdm& burst) {
    const auto& spec = burst.spec();
    if (demod.size() != spec.symbols) {
        throw Error(ErrorCode::Parameter, fmt::format("expected {} demodulated symbols, got {}", spec.symbols, demod.size()));
    }
    PilotSet set;
    for (std::size_t s = 0; s < spec.symbols; ++s) {
        const auto truth = burst.payload(s);
        for (std::size_t a = 0; a < spec.active; a += spec.pilot_spacing) {
            set.equalized.push_back(demod[s][a]);
            set.pilots.push_back(truth[a]);
            set.times.push_back(ofdm_window_center(spec, s));
        }
    }
    return set;
}

} // namespace sfo
