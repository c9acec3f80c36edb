#include <sfo/estimator.hpp>

#include <sfo/accum.hpp>
#include <sfo/error.hpp>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace sfo {

OffsetParams OffsetParams::from_physical(double f0, double delta_f, double epsilon) {
    if (!(f0 > 0.0) || !(f0 + delta_f > 0.0)) {
        throw Error(ErrorCode::Parameter, fmt::format("invalid sampling rates f0={} delta_f={}", f0, delta_f));
    }
    return {-delta_f / (f0 + delta_f), epsilon};
}

void EstimatorConfig::validate(const FarrowBank& bank) const {
    if (n_samples < 2 * bank.taps()) {
        throw Error(ErrorCode::Parameter, fmt::format("n_samples {} must be at least twice the bank length {}", n_samples, bank.taps()));
    }
    if (!(tol > 0.0)) {
        throw Error(ErrorCode::Parameter, "tolerance must be positive");
    }
    if (max_iters < 1) {
        throw Error(ErrorCode::Parameter, "max_iters must be at least 1");
    }
    if (!(d_max > 0.0) || !(hessian_det_floor >= 0.0) || max_halvings < 0) {
        throw Error(ErrorCode::Parameter, "invalid estimator limits");
    }
}

AlignedProblem make_problem(std::span<const double> x0, std::span<const double> x1, const FarrowBank& bank, const EstimatorConfig& cfg) {
    cfg.validate(bank);
    const std::size_t need = cfg.n_samples + bank.taps() - 1;
    if (x0.size() < need || x1.size() < need) {
        throw Error(ErrorCode::InsufficientSamples, fmt::format("need {} samples of each input, got {} and {}", need, x0.size(), x1.size()));
    }
    AlignedProblem p;
    p.u           = subfilter_outputs(bank, x1.first(need));
    p.first_index = p.u.first_center() - cfg.origin;
    const auto start = static_cast<std::size_t>(p.u.first_center());
    p.reference.assign(x0.begin() + static_cast<std::ptrdiff_t>(start), x0.begin() + static_cast<std::ptrdiff_t>(start + cfg.n_samples));
    return p;
}

namespace {

void check_region(const AlignedProblem& p) {
    if (p.size() < 2 || p.u.cols() < p.size()) {
        throw Error(ErrorCode::InsufficientSamples, "cost needs at least two aligned samples");
    }
}

double checked_delay(std::ptrdiff_t n, double delta, double epsilon, double d_max) {
    const double d = fractional_delay(n, delta, epsilon);
    if (!(std::abs(d) <= d_max)) {
        throw Error(ErrorCode::Range, fmt::format("|d| = {} exceeds {} at index {}", std::abs(d), d_max, n), n);
    }
    return d;
}

} // namespace

double cost(const AlignedProblem& p, double delta, double epsilon, double d_max) {
    check_region(p);
    double F = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto   n = p.first_index + static_cast<std::ptrdiff_t>(j);
        const double e = evaluate(p.u.column(j), checked_delay(n, delta, epsilon, d_max)) - p.reference[j];
        F += e * e;
    }
    return 0.5 * F;
}

SampleDerivatives per_sample_derivatives(std::span<const double> u_col, double x0_n, double d) noexcept {
    // p, p' and p'' in one Horner pass
    double p0 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
    for (std::size_t k = u_col.size(); k-- > 0;) {
        p2 = p2 * d + 2.0 * p1;
        p1 = p1 * d + p0;
        p0 = p0 * d + u_col[k];
    }
    const double e = p0 - x0_n;
    return {e * p1, p1 * p1 + e * p2};
}

GradientHessian assemble_gradient_hessian(const AlignedProblem& p, double delta, double epsilon, double d_max) {
    check_region(p);
    AccumulatorChain first(2);
    AccumulatorChain second(3);
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto n  = p.first_index + static_cast<std::ptrdiff_t>(j);
        const auto dv = per_sample_derivatives(p.u.column(j), p.reference[j], checked_delay(n, delta, epsilon, d_max));
        first.push(dv.dF);
        second.push(dv.d2F);
    }
    const auto s = first.weighted_sums(p.first_index);
    const auto h = second.weighted_sums(p.first_index);

    GradientHessian gh;
    gh.g       = {static_cast<double>(s.s1), static_cast<double>(s.s0)};
    const auto off = static_cast<double>(h.s1);
    gh.H       = {{{static_cast<double>(*h.s2), off}, {off, static_cast<double>(h.s0)}}};
    return gh;
}

std::array<double, 2> newton_step(const std::array<double, 2>& w, const std::array<double, 2>& g, const std::array<std::array<double, 2>, 2>& H, double det_floor) {
    const double det = H[0][0] * H[1][1] - H[0][1] * H[1][0];
    if (!(std::abs(det) >= det_floor) || det == 0.0) {
        throw Error(ErrorCode::SingularHessian, fmt::format("Hessian determinant {} below floor {}", det, det_floor));
    }
    const double inv = 1.0 / det;
    return {w[0] - inv * (H[1][1] * g[0] - H[0][1] * g[1]), w[1] - inv * (H[0][0] * g[1] - H[1][0] * g[0])};
}

EstimateResult estimate(const AlignedProblem& p, const EstimatorConfig& cfg) {
    const double N = static_cast<double>(p.size());

    EstimateResult r;
    std::array<double, 2> w{0.0, 0.0};
    double                F = cost(p, w[0], w[1], cfg.d_max);
    r.step_history.push_back(w);
    r.cost_history.push_back(F);

    for (int it = 0; it < cfg.max_iters; ++it) {
        const auto gh   = assemble_gradient_hessian(p, w[0], w[1], cfg.d_max);
        const auto full = newton_step(w, gh.g, gh.H, cfg.hessian_det_floor);
        std::array<double, 2> step{full[0] - w[0], full[1] - w[1]};
        const bool            small = std::max(std::abs(step[0]) * N, std::abs(step[1])) < cfg.tol;

        bool   accepted = false;
        double F_new    = F;
        for (int halvings = 0; halvings <= cfg.max_halvings; ++halvings) {
            const std::array<double, 2> candidate{w[0] + step[0], w[1] + step[1]};
            try {
                F_new = cost(p, candidate[0], candidate[1], cfg.d_max);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::Range || halvings == cfg.max_halvings) {
                    throw;
                }
                step = {0.5 * step[0], 0.5 * step[1]};
                continue;
            }
            if (F_new <= F) {
                w        = candidate;
                accepted = true;
                break;
            }
            if (small) {
                break;
            }
            step = {0.5 * step[0], 0.5 * step[1]};
        }
        if (!accepted) {
            r.converged = small;
            break;
        }
        F = F_new;
        ++r.iterations;
        r.step_history.push_back(w);
        r.cost_history.push_back(F);
        if (small) {
            r.converged = true;
            break;
        }
    }
    r.delta_hat   = w[0];
    r.epsilon_hat = w[1];
    r.final_cost  = F;
    return r;
}

EstimateResult estimate(std::span<const double> x0, std::span<const double> x1, const FarrowBank& bank, const EstimatorConfig& cfg) {
    return estimate(make_problem(x0, x1, bank, cfg), cfg);
}

EstimateResult estimate(std::span<const std::complex<double>> x0, std::span<const std::complex<double>> x1, const FarrowBank& bank, const EstimatorConfig& cfg) {
    const auto pick = [&](std::span<const std::complex<double>> z) {
        std::vector<double> out(z.size());
        std::ranges::transform(z, out.begin(), [&](const auto& v) { return cfg.component == Component::Real ? v.real() : v.imag(); });
        return out;
    };
    const auto r0 = pick(x0);
    const auto r1 = pick(x1);
    return estimate(std::span<const double>(r0), std::span<const double>(r1), bank, cfg);
}

ComplexityReport complexity_report(int order, long long n_samples) {
    if (order < 2 || n_samples < 1) {
        throw Error(ErrorCode::Parameter, fmt::format("complexity formulas need L >= 2 and N >= 1, got L={} N={}", order, n_samples));
    }
    const long long L = order;
    const long long N = n_samples;
    return {(L + 2) * N + 8, (2 * L - 3) * N + 5, (2 * L + 6) * N + 3, 1};
}

} // namespace sfo
