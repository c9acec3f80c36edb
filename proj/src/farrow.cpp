#include <sfo/farrow.hpp>

#include <sfo/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

namespace sfo {

FarrowBank::FarrowBank(std::vector<std::vector<double>> subfilters, std::size_t latency, DelayRange d_valid)
    : _rows(subfilters.size()), _taps(subfilters.empty() ? 0 : subfilters.front().size()), _latency(latency), _d_valid(d_valid) {
    if (_rows < 2) {
        throw Error(ErrorCode::InvalidOrder, "a Farrow bank needs at least two subfilters");
    }
    if (_taps == 0) {
        throw Error(ErrorCode::Parameter, "subfilters must have at least one tap");
    }
    if (_latency >= _taps) {
        throw Error(ErrorCode::Parameter, fmt::format("latency {} must be below the tap count {}", _latency, _taps));
    }
    if (!(d_valid.lo < d_valid.hi)) {
        throw Error(ErrorCode::Parameter, "empty fractional-delay range");
    }
    _coeffs.reserve(_rows * _taps);
    for (const auto& row : subfilters) {
        if (row.size() != _taps) {
            throw Error(ErrorCode::Parameter, "all subfilters must have the same length");
        }
        for (double c : row) {
            if (!std::isfinite(c)) {
                throw Error(ErrorCode::Parameter, "non-finite subfilter coefficient");
            }
            _coeffs.push_back(c);
        }
    }
}

std::vector<double> FarrowBank::composite(double d) const {
    std::vector<double> h(_taps, 0.0);
    for (std::size_t k = _rows; k-- > 0;) {
        for (std::size_t m = 0; m < _taps; ++m) {
            h[m] = h[m] * d + coeff(k, m);
        }
    }
    return h;
}

std::complex<double> FarrowBank::frequency_response(double omega, double d) const {
    const auto           h = composite(d);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t m = 0; m < _taps; ++m) {
        acc += h[m] * std::polar(1.0, -omega * static_cast<double>(m));
    }
    return acc;
}

FarrowBank design_lagrange(int order) {
    if (order < 1 || order > 5) {
        throw Error(ErrorCode::InvalidOrder, fmt::format("Lagrange order must be in [1, 5], got {}", order));
    }
    const auto L = static_cast<std::size_t>(order);
    const auto D = static_cast<double>(L / 2);

    // tap m weight: prod_{j != m} (D + d - j) / (m - j), expanded as a polynomial in d
    std::vector<std::vector<double>> rows(L + 1, std::vector<double>(L + 1, 0.0));
    for (std::size_t m = 0; m <= L; ++m) {
        std::vector<double> poly(L + 1, 0.0);
        poly[0] = 1.0;
        std::size_t degree = 0;
        for (std::size_t j = 0; j <= L; ++j) {
            if (j == m) {
                continue;
            }
            const double denom = static_cast<double>(m) - static_cast<double>(j);
            const double root  = D - static_cast<double>(j);
            for (std::size_t i = degree + 1; i-- > 0;) {
                poly[i + 1] += poly[i] / denom;
                poly[i] *= root / denom;
            }
            ++degree;
        }
        for (std::size_t k = 0; k <= L; ++k) {
            rows[k][m] = poly[k];
        }
    }
    return FarrowBank(std::move(rows), L / 2);
}

namespace {

// (1/2pi) * integral_{-pi}^{pi} (jw)^k exp(jwn) dw, i.e. the k-th derivative of sinc at integer n.
double ideal_differentiator(int k, std::ptrdiff_t n) {
    constexpr double pi = std::numbers::pi;
    if (n == 0) {
        if (k % 2 != 0) {
            return 0.0;
        }
        return ((k / 2) % 2 == 0 ? 1.0 : -1.0) * std::pow(pi, k) / (k + 1);
    }
    // J_q = integral w^q exp(jwn) dw, by parts: J_q = (-1)^n pi^q (1 - (-1)^q) / (jn) - q J_{q-1} / (jn), J_0 = 0
    const std::complex<double> jn{0.0, static_cast<double>(n)};
    const double               sign_n = (n % 2 == 0) ? 1.0 : -1.0;
    std::complex<double>       J{0.0, 0.0};
    for (int q = 1; q <= k; ++q) {
        const double boundary = sign_n * std::pow(pi, q) * (q % 2 == 0 ? 0.0 : 2.0);
        J                     = (boundary - static_cast<double>(q) * J) / jn;
    }
    std::complex<double> jk{1.0, 0.0};
    for (int q = 0; q < k; ++q) {
        jk *= std::complex<double>{0.0, 1.0};
    }
    return (jk * J).real() / (2.0 * pi);
}

} // namespace

FarrowBank design_wideband(int order, std::size_t half_length, double beta) {
    if (order < 1 || order > 5) {
        throw Error(ErrorCode::InvalidOrder, fmt::format("Farrow order must be in [1, 5], got {}", order));
    }
    if (half_length < 1) {
        throw Error(ErrorCode::Parameter, "wideband bank needs half_length >= 1");
    }
    const std::size_t taps = 2 * half_length + 1;
    const double      i0b  = std::cyl_bessel_i(0.0, beta);
    const double      half = static_cast<double>(half_length);

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(order) + 1, std::vector<double>(taps, 0.0));
    double                           factorial = 1.0;
    for (int k = 0; k <= order; ++k) {
        if (k > 0) {
            factorial *= k;
        }
        const double scale = ((k % 2 == 0) ? 1.0 : -1.0) / factorial;
        for (std::size_t m = 0; m < taps; ++m) {
            const auto   n      = static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(half_length);
            const double r      = static_cast<double>(n) / half;
            const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
            rows[static_cast<std::size_t>(k)][m] = n == 0 && k == 0 ? 1.0 : scale * ideal_differentiator(k, n) * window;
        }
    }
    return FarrowBank(std::move(rows), half_length);
}

SubfilterOutputs subfilter_outputs(const FarrowBank& bank, std::span<const double> x) {
    const std::size_t M = bank.taps();
    if (x.size() < M + 1) {
        throw Error(ErrorCode::InsufficientSamples, fmt::format("need at least {} samples for a {}-tap bank, got {}", M + 1, M, x.size()));
    }
    const std::size_t rows = static_cast<std::size_t>(bank.order()) + 1;
    const std::size_t cols = x.size() - (M - 1);

    SubfilterOutputs u;
    u.order       = rows - 1;
    u.valid_start = M - 1;
    u.latency     = bank.latency();
    u.values.assign(rows * cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t n = j + M - 1;
        for (std::size_t k = 0; k < rows; ++k) {
            const auto g   = bank.subfilter(k);
            double     acc = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                acc += g[m] * x[n - m];
            }
            u.values[j * rows + k] = acc;
        }
    }
    return u;
}

double evaluate(std::span<const double> u_col, double d) noexcept {
    double acc = 0.0;
    for (std::size_t k = u_col.size(); k-- > 0;) {
        acc = acc * d + u_col[k];
    }
    return acc;
}

Aligned<double> compensate_block(const FarrowBank& bank, std::span<const double> x1, double delta, double epsilon, double d_max) {
    const auto u = subfilter_outputs(bank, x1);

    Aligned<double> y;
    y.first_index = u.first_center();
    y.samples.resize(u.cols());
    for (std::size_t j = 0; j < u.cols(); ++j) {
        const std::ptrdiff_t c = y.first_index + static_cast<std::ptrdiff_t>(j);
        const double         d = fractional_delay(c, delta, epsilon);
        if (std::abs(d) > d_max) {
            throw Error(ErrorCode::Range, fmt::format("|d| = {} exceeds {} at index {}; re-block or stream", std::abs(d), d_max, c), c);
        }
        y.samples[j] = evaluate(u.column(j), d);
    }
    return y;
}

Aligned<std::complex<double>> compensate_complex(const FarrowBank& bank, std::span<const std::complex<double>> x1, double delta, double epsilon, double d_max) {
    std::vector<double> re(x1.size());
    std::vector<double> im(x1.size());
    std::ranges::transform(x1, re.begin(), [](const auto& z) { return z.real(); });
    std::ranges::transform(x1, im.begin(), [](const auto& z) { return z.imag(); });

    const auto yr = compensate_block(bank, re, delta, epsilon, d_max);
    const auto yi = compensate_block(bank, im, delta, epsilon, d_max);

    Aligned<std::complex<double>> y;
    y.first_index = yr.first_index;
    y.samples.resize(yr.samples.size());
    for (std::size_t j = 0; j < y.samples.size(); ++j) {
        y.samples[j] = {yr.samples[j], yi.samples[j]};
    }
    return y;
}

StreamCompensator::StreamCompensator(FarrowBank bank, double delta, double epsilon) : _bank(std::move(bank)), _delta(delta), _epsilon(epsilon) {
    if (!std::isfinite(delta) || !std::isfinite(epsilon)) {
        throw Error(ErrorCode::Parameter, "non-finite offset parameters");
    }
}

double StreamCompensator::sample(std::ptrdiff_t index) const {
    if (index < 0 || index >= _received) {
        return 0.0;
    }
    return _window[static_cast<std::size_t>(index - _window_start)];
}

bool StreamCompensator::try_emit(std::vector<double>& out, bool draining) {
    const double         d        = fractional_delay(_next_out, _delta, _epsilon);
    const double         shift    = std::floor(d + 0.5);
    const double         fraction = d - shift;
    const std::ptrdiff_t center   = _next_out - static_cast<std::ptrdiff_t>(shift);
    const std::ptrdiff_t newest   = center + static_cast<std::ptrdiff_t>(_bank.lookahead());
    if (!draining && newest >= _received) {
        return false;
    }

    const std::size_t rows = static_cast<std::size_t>(_bank.order()) + 1;
    const std::size_t M    = _bank.taps();
    auto&             u    = _scratch;
    u.resize(rows);
    for (std::size_t k = 0; k < rows; ++k) {
        const auto g   = _bank.subfilter(k);
        double     acc = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            acc += g[m] * sample(newest - static_cast<std::ptrdiff_t>(m));
        }
        u[k] = acc;
    }
    out.push_back(evaluate(u, fraction));
    ++_next_out;

    // the center index never decreases for |delta| < 1, so older samples can go
    const std::ptrdiff_t oldest_needed = center - static_cast<std::ptrdiff_t>(_bank.history()) - 1;
    while (!_window.empty() && _window_start < oldest_needed) {
        _window.pop_front();
        ++_window_start;
    }
    return true;
}

void StreamCompensator::push(double x, std::vector<double>& out) {
    _window.push_back(x);
    ++_received;
    while (try_emit(out, false)) {
    }
}

void StreamCompensator::process(std::span<const double> x, std::vector<double>& out) {
    for (double v : x) {
        push(v, out);
    }
}

void StreamCompensator::flush(std::size_t total, std::vector<double>& out) {
    while (emitted() < total) {
        try_emit(out, true);
    }
}

std::vector<double> stream_compensate(const FarrowBank& bank, std::span<const double> x1, double delta, double epsilon) {
    StreamCompensator   sc(bank, delta, epsilon);
    std::vector<double> out;
    out.reserve(x1.size() + 8);
    sc.process(x1, out);
    sc.flush(x1.size(), out);
    out.resize(x1.size());
    return out;
}

std::vector<std::complex<double>> stream_compensate_complex(const FarrowBank& bank, std::span<const std::complex<double>> x1, double delta, double epsilon) {
    std::vector<double> re(x1.size());
    std::vector<double> im(x1.size());
    std::ranges::transform(x1, re.begin(), [](const auto& z) { return z.real(); });
    std::ranges::transform(x1, im.begin(), [](const auto& z) { return z.imag(); });
    const auto yr = stream_compensate(bank, re, delta, epsilon);
    const auto yi = stream_compensate(bank, im, delta, epsilon);

    std::vector<std::complex<double>> y(x1.size());
    for (std::size_t m = 0; m < y.size(); ++m) {
        y[m] = {yr[m], yi[m]};
    }
    return y;
}

std::string to_csv(const FarrowBank& bank) {
    std::string text;
    for (std::size_t k = 0; k <= static_cast<std::size_t>(bank.order()); ++k) {
        const auto g = bank.subfilter(k);
        for (std::size_t m = 0; m < g.size(); ++m) {
            if (m > 0) {
                text += ',';
            }
            text += fmt::format("{:.17g}", g[m]);
        }
        text += '\n';
    }
    return text;
}

FarrowBank bank_from_csv(std::string_view text, std::size_t latency) {
    std::vector<std::vector<double>> rows;
    std::size_t                      line_no = 0;
    while (!text.empty()) {
        const auto       eol  = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text                  = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        while (true) {
            const auto       comma = line.find(',');
            std::string_view field = line.substr(0, comma);
            while (!field.empty() && field.front() == ' ') {
                field.remove_prefix(1);
            }
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (ec != std::errc{} || ptr != field.data() + field.size()) {
                throw Error(ErrorCode::Parameter, fmt::format("bad coefficient '{}' on line {}", field, line_no));
            }
            row.push_back(value);
            if (comma == std::string_view::npos) {
                break;
            }
            line.remove_prefix(comma + 1);
        }
        rows.push_back(std::move(row));
    }
    return FarrowBank(std::move(rows), latency);
}

void save_csv(const FarrowBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
    }
    out << to_csv(bank);
}

FarrowBank load_csv(const std::filesystem::path& path, std::size_t latency) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, fmt::format("cannot read '{}'", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return bank_from_csv(buffer.str(), latency);
}

} // namespace sfo
