#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <mutex>

namespace sfo::detail {

namespace {

// FFTW's planner is not reentrant; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct Plan {
    fftw_plan p = nullptr;
    ~Plan() {
        if (p != nullptr) {
            std::scoped_lock lock(planner_mutex());
            fftw_destroy_plan(p);
        }
    }
};

fftw_complex* as_fftw(std::complex<double>* z) { return reinterpret_cast<fftw_complex*>(z); }

} // namespace

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, bool inverse) {
    std::vector<std::complex<double>> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size());
    if (x.empty()) {
        return out;
    }
    Plan plan;
    {
        std::scoped_lock lock(planner_mutex());
        plan.p = fftw_plan_dft_1d(static_cast<int>(x.size()), as_fftw(in.data()), as_fftw(out.data()), inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan.p);
    return out;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        return {};
    }
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t n       = std::bit_ceil(out_len);
    const std::size_t bins    = n / 2 + 1;

    std::vector<double>               buf(n);
    std::vector<std::complex<double>> fa(bins);
    std::vector<std::complex<double>> fb(bins);
    Plan                              fwd;
    Plan                              inv;
    {
        std::scoped_lock lock(planner_mutex());
        fwd.p = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), as_fftw(fa.data()), FFTW_ESTIMATE);
        inv.p = fftw_plan_dft_c2r_1d(static_cast<int>(n), as_fftw(fa.data()), buf.data(), FFTW_ESTIMATE);
    }
    std::ranges::fill(buf, 0.0);
    std::ranges::copy(a, buf.begin());
    fftw_execute_dft_r2c(fwd.p, buf.data(), as_fftw(fa.data()));
    std::ranges::fill(buf, 0.0);
    std::ranges::copy(b, buf.begin());
    fftw_execute_dft_r2c(fwd.p, buf.data(), as_fftw(fb.data()));

    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < bins; ++k) {
        fa[k] *= fb[k] * scale;
    }
    fftw_execute_dft_c2r(inv.p, as_fftw(fa.data()), buf.data());
    buf.resize(out_len);
    return buf;
}

} // namespace sfo::detail
