#pragma once

#include <sfo/farrow.hpp>

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sfo {

/// Period difference delta and timing offset epsilon (in reference periods T) of the second converter.
struct OffsetParams {
    double delta   = 0.0;
    double epsilon = 0.0;

    /// delta = -delta_f / (f0 + delta_f)
    [[nodiscard]] static OffsetParams from_physical(double f0, double delta_f, double epsilon = 0.0);

    [[nodiscard]] double delta_f(double f0) const noexcept { return -delta * f0 / (1.0 + delta); }
    [[nodiscard]] double f1(double f0) const noexcept { return f0 + delta_f(f0); }
    [[nodiscard]] double delta_ppm() const noexcept { return delta * 1e6; }
};

enum class Component { Real, Imag };

struct EstimatorConfig {
    std::size_t n_samples         = 256; // number of cost terms
    int         max_iters         = 10;
    double      tol               = 1e-9; // on max(|step_delta| * N, |step_epsilon|)
    Component   component         = Component::Real;
    double      d_max             = 0.5;
    double      hessian_det_floor = 1e-30;
    // array position of the sample with global index 0; d(n) = n*delta + epsilon uses global indices
    std::ptrdiff_t origin       = 0;
    int            max_halvings = 8;

    void validate(const FarrowBank& bank) const;
};

struct EstimateResult {
    double                             delta_hat   = 0.0;
    double                             epsilon_hat = 0.0;
    int                                iterations  = 0;
    double                             final_cost  = 0.0;
    bool                               converged   = false;
    std::vector<std::array<double, 2>> step_history; // iterates w(0) = (0, 0), w(1), ...
    std::vector<double>                cost_history; // F at each iterate
};

/**
 * Everything the cost depends on once the subfilter outputs are known.
 * Column j of u is centered on global index first_index + j; reference[j] is x0 at that index.
 */
struct AlignedProblem {
    SubfilterOutputs    u;
    std::vector<double> reference;
    std::ptrdiff_t      first_index = 0;

    [[nodiscard]] std::size_t size() const noexcept { return reference.size(); }
};

/// Builds the problem from the first n_samples + taps - 1 samples of x1 and the matching x0 samples.
[[nodiscard]] AlignedProblem make_problem(std::span<const double> x0, std::span<const double> x1, const FarrowBank& bank, const EstimatorConfig& cfg);

/// F = 1/2 sum_n (y_c(n) - x0(n))^2.
[[nodiscard]] double cost(const AlignedProblem& p, double delta, double epsilon, double d_max = 0.5);

struct SampleDerivatives {
    double dF  = 0.0;
    double d2F = 0.0;
};

/// First and second derivatives in d of F_n = 1/2 (sum_k d^k u_k - x0_n)^2.
[[nodiscard]] SampleDerivatives per_sample_derivatives(std::span<const double> u_col, double x0_n, double d) noexcept;

struct GradientHessian {
    std::array<double, 2>                g{};
    std::array<std::array<double, 2>, 2> H{};
};

/// Gradient and Hessian of F in (delta, epsilon); index-weighted sums come from accumulator chains.
[[nodiscard]] GradientHessian assemble_gradient_hessian(const AlignedProblem& p, double delta, double epsilon, double d_max = 0.5);

/// w - H^{-1} g by closed-form 2x2 inversion.
[[nodiscard]] std::array<double, 2> newton_step(const std::array<double, 2>& w, const std::array<double, 2>& g, const std::array<std::array<double, 2>, 2>& H, double det_floor = 1e-30);

[[nodiscard]] EstimateResult estimate(const AlignedProblem& p, const EstimatorConfig& cfg);
[[nodiscard]] EstimateResult estimate(std::span<const double> x0, std::span<const double> x1, const FarrowBank& bank, const EstimatorConfig& cfg);
[[nodiscard]] EstimateResult estimate(std::span<const std::complex<double>> x0, std::span<const std::complex<double>> x1, const FarrowBank& bank, const EstimatorConfig& cfg);

struct ComplexityReport {
    long long general_mults  = 0;
    long long constant_mults = 0;
    long long additions      = 0;
    long long divisions      = 0;

    friend bool operator==(const ComplexityReport&, const ComplexityReport&) = default;
};

/// Operation counts per estimation batch for order L and N samples. Requires L >= 2, N >= 1.
[[nodiscard]] ComplexityReport complexity_report(int order, long long n_samples);

} // namespace sfo
