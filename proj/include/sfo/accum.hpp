#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

namespace sfo {

using accum_t = long double;

struct WeightedSums {
    accum_t                s0 = 0; // sum v_n
    accum_t                s1 = 0; // sum n v_n
    std::optional<accum_t> s2;     // sum n^2 v_n, depth-3 chains only

    friend bool operator==(const WeightedSums&, const WeightedSums&) = default;
};

/**
 * Cascade of two or three running accumulators.
 *
 * After pushing v_0..v_{N-1}:
 *   A1 = sum v_n,  A2 = sum (N-n) v_n,  A3 = sum (N-n)(N-n+1)/2 v_n,
 * from which the index-weighted sums follow without any per-sample multiplication by n.
 */
class AccumulatorChain {
public:
    explicit AccumulatorChain(int depth = 3);

    void push(accum_t v) noexcept {
        _state[0] += v;
        _state[1] += _state[0];
        if (_depth == 3) {
            _state[2] += _state[1];
        }
        ++_count;
    }

    void reset() noexcept {
        _state = {};
        _count = 0;
    }

    [[nodiscard]] int                     depth() const noexcept { return _depth; }
    [[nodiscard]] std::size_t             count() const noexcept { return _count; }
    [[nodiscard]] std::span<const accum_t> state() const noexcept { return {_state.data(), static_cast<std::size_t>(_depth)}; }

    /// S0, S1 and (depth 3) S2 with n counted from 0 at the first push.
    [[nodiscard]] WeightedSums weighted_sums() const;

    /// As weighted_sums() but with the first pushed sample carrying index `first_index`.
    [[nodiscard]] WeightedSums weighted_sums(std::ptrdiff_t first_index) const;

private:
    int                    _depth;
    std::array<accum_t, 3> _state{};
    std::size_t            _count = 0;
};

/// Direct sums over v, index n starting at 0.
[[nodiscard]] WeightedSums brute_force_sums(std::span<const double> v);

} // namespace sfo
