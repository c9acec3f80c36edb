#include <sfo/accum.hpp>

#include <sfo/error.hpp>

#include <fmt/format.h>

namespace sfo {

AccumulatorChain::AccumulatorChain(int depth) : _depth(depth) {
    if (depth != 2 && depth != 3) {
        throw Error(ErrorCode::Parameter, fmt::format("accumulator depth must be 2 or 3, got {}", depth));
    }
}

WeightedSums AccumulatorChain::weighted_sums() const {
    if (_count == 0) {
        throw Error(ErrorCode::EmptyState, "weighted sums of an empty accumulator chain");
    }
    const auto   N = static_cast<accum_t>(_count);
    WeightedSums s;
    s.s0 = _state[0];
    s.s1 = N * _state[0] - _state[1];
    if (_depth == 3) {
        s.s2 = N * N * _state[0] - (2 * N + 1) * _state[1] + 2 * _state[2];
    }
    return s;
}

WeightedSums AccumulatorChain::weighted_sums(std::ptrdiff_t first_index) const {
    WeightedSums s = weighted_sums();
    if (first_index == 0) {
        return s;
    }
    // sum (n + a) v = S1 + a S0,  sum (n + a)^2 v = S2 + 2a S1 + a^2 S0
    const auto a = static_cast<accum_t>(first_index);
    if (s.s2) {
        s.s2 = *s.s2 + 2 * a * s.s1 + a * a * s.s0;
    }
    s.s1 = s.s1 + a * s.s0;
    return s;
}

WeightedSums brute_force_sums(std::span<const double> v) {
    WeightedSums s;
    accum_t      s2 = 0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        const auto idx = static_cast<accum_t>(n);
        s.s0 += v[n];
        s.s1 += idx * v[n];
        s2 += idx * idx * v[n];
    }
    s.s2 = s2;
    return s;
}

} // namespace sfo
