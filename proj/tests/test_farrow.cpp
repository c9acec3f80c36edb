#include <doctest.h>

#include <sfo/error.hpp>
#include <sfo/farrow.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

using namespace sfo;

namespace {

constexpr double pi = std::numbers::pi;

// Solve A x = b by Gaussian elimination with partial pivoting (A is n x n, row-major).
std::vector<double> solve(std::vector<double> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(A[r * n + c]) > std::abs(A[piv * n + c])) {
                piv = r;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(A[c * n + k], A[piv * n + k]);
        }
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r * n + c] / A[c * n + c];
            for (std::size_t k = c; k < n; ++k) {
                A[r * n + k] -= f * A[c * n + k];
            }
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t k = r + 1; k < n; ++k) {
            s -= A[r * n + k] * x[k];
        }
        x[r] = s / A[r * n + r];
    }
    return x;
}

double lagrange_weight(int L, int m, double point) {
    double w = 1.0;
    for (int j = 0; j <= L; ++j) {
        if (j != m) {
            w *= (point - j) / static_cast<double>(m - j);
        }
    }
    return w;
}

double nmse_db(const std::vector<double>& y, const std::vector<double>& ref) {
    double e = 0.0;
    double p = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        e += (y[i] - ref[i]) * (y[i] - ref[i]);
        p += ref[i] * ref[i];
    }
    return 10.0 * std::log10(e / p);
}

std::vector<double> sampled(std::size_t count, double delta, double eps, double f) {
    std::vector<double> x(count);
    for (std::size_t n = 0; n < count; ++n) {
        const double t = static_cast<double>(n);
        x[n]           = std::sin(2.0 * pi * f * (t + t * delta + eps));
    }
    return x;
}

} // namespace

TEST_CASE("first-order Lagrange bank is linear interpolation") {
    const auto bank = design_lagrange(1);
    CHECK(bank.order() == 1);
    CHECK(bank.taps() == 2);
    CHECK(bank.latency() == 0);
    CHECK(bank.coeff(0, 0) == 1.0);
    CHECK(bank.coeff(0, 1) == 0.0);
    CHECK(bank.coeff(1, 0) == -1.0);
    CHECK(bank.coeff(1, 1) == 1.0);
}

TEST_CASE("Lagrange order outside 1..5 is rejected") {
    for (int L : {0, 6, -1}) {
        try {
            (void)design_lagrange(L);
            FAIL("expected invalid-order");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidOrder);
        }
    }
}

TEST_CASE("Lagrange coefficients solve the Vandermonde system") {
    for (int L = 1; L <= 5; ++L) {
        const auto        bank = design_lagrange(L);
        const int         D    = L / 2;
        const std::size_t n    = static_cast<std::size_t>(L) + 1;
        // sample the weight of tap m at L+1 distinct d and recover the polynomial coefficients
        std::vector<double> V(n * n);
        std::vector<double> ds(n);
        for (std::size_t i = 0; i < n; ++i) {
            ds[i] = -0.5 + static_cast<double>(i) / static_cast<double>(L);
            for (std::size_t k = 0; k < n; ++k) {
                V[i * n + k] = std::pow(ds[i], static_cast<double>(k));
            }
        }
        for (int m = 0; m <= L; ++m) {
            std::vector<double> w(n);
            for (std::size_t i = 0; i < n; ++i) {
                w[i] = lagrange_weight(L, m, D + ds[i]);
            }
            const auto c = solve(V, w);
            for (std::size_t k = 0; k < n; ++k) {
                CHECK(bank.coeff(k, static_cast<std::size_t>(m)) == doctest::Approx(c[k]).epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("at d = 0 the composite filter is a pure delay of D") {
    for (int L = 1; L <= 5; ++L) {
        const auto bank = design_lagrange(L);
        const auto h    = bank.composite(0.0);
        for (std::size_t m = 0; m < h.size(); ++m) {
            CHECK(h[m] == (m == bank.latency() ? 1.0 : 0.0));
        }
    }
    const auto wb = design_wideband(3);
    const auto h  = wb.composite(0.0);
    for (std::size_t m = 0; m < h.size(); ++m) {
        CHECK(h[m] == (m == wb.latency() ? 1.0 : 0.0));
    }
}

TEST_CASE("cubic bank on a ramp returns the ramp at n - D - d") {
    const auto          bank = design_lagrange(3);
    std::vector<double> x(20);
    for (std::size_t n = 0; n < x.size(); ++n) {
        x[n] = static_cast<double>(n);
    }
    const auto u = subfilter_outputs(bank, x);
    for (double d : {-0.5, -0.31, 0.0, 0.2, 0.49}) {
        for (std::size_t j = 0; j < u.cols(); ++j) {
            const double newest = static_cast<double>(j + u.valid_start);
            CHECK(evaluate(u.column(j), d) == doctest::Approx(newest - 1.0 - d).epsilon(1e-13));
        }
    }
}

TEST_CASE("Lagrange banks reproduce polynomials up to their order") {
    std::mt19937_64                        rng(11);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> dd(-0.5, 0.5);
    for (int L = 1; L <= 5; ++L) {
        const auto bank = design_lagrange(L);
        for (int deg = 0; deg <= L; ++deg) {
            std::vector<double> c(static_cast<std::size_t>(deg) + 1);
            for (auto& v : c) {
                v = coef(rng);
            }
            const auto poly = [&](double t) {
                double acc = 0.0;
                for (std::size_t k = c.size(); k-- > 0;) {
                    acc = acc * t + c[k];
                }
                return acc;
            };
            std::vector<double> x(16);
            for (std::size_t n = 0; n < x.size(); ++n) {
                x[n] = poly(static_cast<double>(n) / 8.0);
            }
            const auto u = subfilter_outputs(bank, x);
            for (int trial = 0; trial < 5; ++trial) {
                const double d = dd(rng);
                for (std::size_t j = 0; j < u.cols(); ++j) {
                    const double pos   = static_cast<double>(j + u.valid_start) - static_cast<double>(bank.latency()) - d;
                    const double truth = poly(pos / 8.0);
                    const double got   = evaluate(u.column(j), d);
                    CHECK(std::abs(got - truth) <= 1e-12 * std::max(1.0, std::abs(truth)));
                }
            }
        }
    }
}

TEST_CASE("subfilter outputs") {
    const auto bank = design_lagrange(3);

    SUBCASE("impulse reproduces each subfilter") {
        std::vector<double> x(12, 0.0);
        x[3]         = 1.0;
        const auto u = subfilter_outputs(bank, x);
        CHECK(u.rows() == 4);
        CHECK(u.valid_start == 3);
        // the newest input of column j is j + 3, so it sees the impulse through tap m = j
        for (std::size_t k = 0; k < 4; ++k) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(u.at(k, j) == bank.coeff(k, j));
            }
            for (std::size_t j = 4; j < u.cols(); ++j) {
                CHECK(u.at(k, j) == 0.0);
            }
        }
    }
    SUBCASE("zeros in, zeros out") {
        const std::vector<double> x(10, 0.0);
        const auto                u = subfilter_outputs(bank, x);
        for (double v : u.values) {
            CHECK(v == 0.0);
        }
    }
    SUBCASE("first-order hand convolution") {
        const auto                l1 = design_lagrange(1);
        const std::vector<double> x{1.0, 2.0, 3.0};
        const auto                u = subfilter_outputs(l1, x);
        REQUIRE(u.cols() == 2);
        CHECK(u.at(0, 0) == 2.0);
        CHECK(u.at(0, 1) == 3.0);
        CHECK(u.at(1, 0) == -1.0);
        CHECK(u.at(1, 1) == -1.0);
    }
    SUBCASE("input no longer than the bank is rejected") {
        const std::vector<double> x(4, 1.0);
        try {
            (void)subfilter_outputs(bank, x);
            FAIL("expected insufficient-samples");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InsufficientSamples);
        }
    }
}

TEST_CASE("Horner evaluation") {
    const std::vector<double> a{5.0, 2.0};
    CHECK(evaluate(a, 0.5) == 6.0);
    const std::vector<double> b{3.25, -1.0, 7.0};
    CHECK(evaluate(b, 0.0) == 3.25);
    const std::vector<double> c{1.0, 1.0, 1.0, 1.0};
    CHECK(evaluate(c, 2.0) == 15.0);
}

TEST_CASE("block compensation") {
    const auto lag = design_lagrange(3);
    const auto wb  = design_wideband(3);

    SUBCASE("zero offsets delay the input by D exactly") {
        std::mt19937_64                        rng(3);
        std::uniform_real_distribution<double> v(-1.0, 1.0);
        std::vector<double>                    x(64);
        for (auto& s : x) {
            s = v(rng);
        }
        for (const auto* bank : {&lag, &wb}) {
            const auto y = compensate_block(*bank, x, 0.0, 0.0);
            CHECK(y.first_index == static_cast<std::ptrdiff_t>(bank->history()));
            for (std::size_t j = 0; j < y.samples.size(); ++j) {
                CHECK(y.samples[j] == x[static_cast<std::size_t>(y.first_index) + j]);
            }
        }
    }

    SUBCASE("sine oracle") {
        const double delta = -200e-6;
        const double eps   = 0.03;
        const auto   x1    = sampled(300, delta, eps, 0.05);
        for (const auto* bank : {&lag, &wb}) {
            const auto          y = compensate_block(*bank, x1, delta, eps);
            std::vector<double> ref(y.samples.size());
            for (std::size_t j = 0; j < ref.size(); ++j) {
                ref[j] = std::sin(2.0 * pi * 0.05 * static_cast<double>(y.first_index + static_cast<std::ptrdiff_t>(j)));
            }
            CHECK(nmse_db(y.samples, ref) <= -60.0);
        }
    }

    SUBCASE("delay past d_max raises a range error at the first offending index") {
        const std::vector<double> x(256, 1.0);
        const double              delta = 0.6 / 255.0;
        std::ptrdiff_t            first = -1;
        for (std::ptrdiff_t c = 1; c < 255; ++c) {
            if (std::abs(fractional_delay(c, delta, 0.0)) > 0.5) {
                first = c;
                break;
            }
        }
        REQUIRE(first > 0);
        try {
            (void)compensate_block(lag, x, delta, 0.0);
            FAIL("expected range error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Range);
            REQUIRE(e.index().has_value());
            CHECK(*e.index() == first);
        }
    }

    SUBCASE("linearity") {
        std::mt19937_64                        rng(5);
        std::uniform_real_distribution<double> v(-1.0, 1.0);
        std::vector<double>                    a(200);
        std::vector<double>                    b(200);
        std::vector<double>                    mix(200);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i]   = v(rng);
            b[i]   = v(rng);
            mix[i] = 0.7 * a[i] - 2.5 * b[i];
        }
        for (const auto* bank : {&lag, &wb}) {
            const auto ya = compensate_block(*bank, a, 3e-4, -0.02);
            const auto yb = compensate_block(*bank, b, 3e-4, -0.02);
            const auto ym = compensate_block(*bank, mix, 3e-4, -0.02);
            for (std::size_t j = 0; j < ym.samples.size(); ++j) {
                const double expect = 0.7 * ya.samples[j] - 2.5 * yb.samples[j];
                CHECK(std::abs(ym.samples[j] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
            }
        }
    }
}

TEST_CASE("complex compensation runs two real branches") {
    const auto bank = design_wideband(3);
    const auto re   = sampled(200, -2e-4, 0.03, 0.05);
    const auto im   = sampled(200, -2e-4, 0.03, 0.11);

    std::vector<std::complex<double>> z(re.size());
    std::vector<std::complex<double>> real_only(re.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i]         = {re[i], im[i]};
        real_only[i] = {re[i], 0.0};
    }
    const auto yr = compensate_block(bank, re, -2e-4, 0.03);
    const auto yi = compensate_block(bank, im, -2e-4, 0.03);
    const auto yz = compensate_complex(bank, z, -2e-4, 0.03);
    const auto y0 = compensate_complex(bank, real_only, -2e-4, 0.03);
    REQUIRE(yz.samples.size() == yr.samples.size());
    CHECK(yz.first_index == yr.first_index);
    for (std::size_t j = 0; j < yz.samples.size(); ++j) {
        CHECK(yz.samples[j].real() == yr.samples[j]);
        CHECK(yz.samples[j].imag() == yi.samples[j]);
        CHECK(y0.samples[j].imag() == 0.0);
    }
}

TEST_CASE("complex exponential oracle") {
    const double                      delta = -200e-6;
    const double                      eps   = 0.03;
    std::vector<std::complex<double>> x1(300);
    for (std::size_t n = 0; n < x1.size(); ++n) {
        const double t = static_cast<double>(n);
        x1[n]          = std::polar(1.0, 2.0 * pi * 0.05 * (t + t * delta + eps));
    }
    for (const auto& bank : {design_lagrange(3), design_wideband(3)}) {
        const auto y   = compensate_complex(bank, x1, delta, eps);
        double     err = 0.0;
        for (std::size_t j = 0; j < y.samples.size(); ++j) {
            const auto ref = std::polar(1.0, 2.0 * pi * 0.05 * static_cast<double>(y.first_index + static_cast<std::ptrdiff_t>(j)));
            err += std::norm(y.samples[j] - ref);
        }
        CHECK(10.0 * std::log10(err / static_cast<double>(y.samples.size())) <= -60.0);
    }
}

TEST_CASE("streaming compensation") {
    const auto lag = design_lagrange(3);
    const auto wb  = design_wideband(3);

    SUBCASE("matches the block path wherever the block path is defined") {
        const auto x = sampled(400, 0.0, 0.0, 0.07);
        for (const auto* bank : {&lag, &wb}) {
            for (const auto& [delta, eps] : {std::pair{0.0, 0.3}, std::pair{-2e-4, 0.03}, std::pair{5e-4, -0.1}}) {
                const auto block  = compensate_block(*bank, x, delta, eps);
                const auto stream = stream_compensate(*bank, x, delta, eps);
                for (std::size_t j = 0; j < block.samples.size(); ++j) {
                    CHECK(stream[static_cast<std::size_t>(block.first_index) + j] == block.samples[j]);
                }
            }
        }
    }

    SUBCASE("long drift runs past the block limit") {
        const double delta = -200e-6;
        const double eps   = 0.0;
        const auto   x1    = sampled(10000, delta, eps, 0.05);
        const auto   y     = stream_compensate(lag, x1, delta, eps);
        std::vector<double> got;
        std::vector<double> ref;
        for (std::size_t m = 8; m + 8 < y.size(); ++m) {
            got.push_back(y[m]);
            ref.push_back(std::sin(2.0 * pi * 0.05 * static_cast<double>(m)));
        }
        CHECK(nmse_db(got, ref) <= -60.0);
    }

    SUBCASE("integer part of the delay shifts the centre") {
        const auto x      = sampled(100, 0.0, 0.0, 0.09);
        const auto stream = stream_compensate(lag, x, 0.0, 1.25);
        const auto block  = compensate_block(lag, x, 0.0, 0.25);
        // output m is centred on input m - 1 with fraction 0.25
        for (std::size_t j = 0; j < block.samples.size(); ++j) {
            const auto c = static_cast<std::size_t>(block.first_index) + j;
            if (c + 1 < stream.size()) {
                CHECK(stream[c + 1] == block.samples[j]);
            }
        }
    }

    SUBCASE("sample-by-sample pushing equals the batch wrapper") {
        const auto          x = sampled(300, -3e-4, 0.4, 0.08);
        StreamCompensator   sc(wb, -3e-4, 0.4);
        std::vector<double> out;
        for (double v : x) {
            sc.push(v, out);
        }
        sc.flush(x.size(), out);
        CHECK(sc.consumed() == x.size());
        const auto batch = stream_compensate(wb, x, -3e-4, 0.4);
        REQUIRE(out.size() >= batch.size());
        for (std::size_t m = 0; m < batch.size(); ++m) {
            CHECK(out[m] == batch[m]);
        }
    }
}

TEST_CASE("wideband composite response approximates a pure delay") {
    const auto bank = design_wideband(3);
    const auto D    = static_cast<double>(bank.latency());
    for (double d = -0.4; d <= 0.4 + 1e-12; d += 0.05) {
        for (int i = 1; i <= 200; ++i) {
            const double w = 0.5 * pi * i / 200.0;
            const auto   H = bank.frequency_response(w, d);
            CHECK(std::abs(H) >= 0.99);
            CHECK(std::abs(H) <= 1.01);
            // phase delay relative to the nominal delay
            const auto   rel   = H * std::polar(1.0, w * (D + d));
            const double delay = D + d - std::arg(rel) / w;
            CHECK(std::abs(delay - (D + d)) <= 0.01);
        }
    }
}

TEST_CASE("bank construction is validated") {
    auto expect_parameter = [](auto&& make) {
        try {
            make();
            FAIL("expected parameter error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Parameter);
        }
    };
    expect_parameter([] { FarrowBank({{1.0, 0.0}, {1.0}}, 0); });
    expect_parameter([] { FarrowBank({{1.0, 0.0}, {std::nan(""), 1.0}}, 0); });
    expect_parameter([] { FarrowBank({{1.0, 0.0}, {-1.0, 1.0}}, 2); });
}

TEST_CASE("coefficient CSV round trip") {
    for (const auto& bank : {design_lagrange(3), design_lagrange(5), design_wideband(4)}) {
        const auto text = to_csv(bank);
        CHECK(bank_from_csv(text, bank.latency()) == bank);
    }
    const auto path = std::filesystem::temp_directory_path() / "farrow_bank_roundtrip.csv";
    save_csv(design_wideband(3), path);
    CHECK(load_csv(path, 16) == design_wideband(3));
    std::filesystem::remove(path);

    try {
        (void)bank_from_csv("1,0\n-1,x\n", 0);
        FAIL("expected parameter error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parameter);
    }
}
