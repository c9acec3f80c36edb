#include <sfo/sigsim.hpp>

#include <sfo/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

namespace sfo {

namespace {

const double qam16_scale = 1.0 / std::sqrt(10.0);

// 2-bit Gray code <-> level index 0..3 (levels -3, -1, 1, 3)
constexpr unsigned gray_to_index(unsigned g) noexcept { return g ^ (g >> 1); }
constexpr unsigned index_to_gray(unsigned i) noexcept { return i ^ (i >> 1); }

unsigned decide_axis(double v) noexcept {
    const double i = std::round((v / qam16_scale + 3.0) / 2.0);
    return static_cast<unsigned>(std::clamp(i, 0.0, 3.0));
}

} // namespace

cplx qam16_map(std::uint8_t label) noexcept {
    const auto level = [](unsigned bits) { return 2.0 * static_cast<double>(gray_to_index(bits & 3u)) - 3.0; };
    return {level(label >> 2u) * qam16_scale, level(label) * qam16_scale};
}

std::uint8_t qam16_demap(cplx point) noexcept {
    return static_cast<std::uint8_t>((index_to_gray(decide_axis(point.real())) << 2u) | index_to_gray(decide_axis(point.imag())));
}

double ber_qam16(std::span<const cplx> received, std::span<const cplx> truth) {
    if (received.size() != truth.size() || received.empty()) {
        throw Error(ErrorCode::Parameter, fmt::format("BER needs equal non-empty symbol sets, got {} and {}", received.size(), truth.size()));
    }
    std::size_t errors = 0;
    for (std::size_t i = 0; i < received.size(); ++i) {
        errors += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(qam16_demap(received[i]) ^ qam16_demap(truth[i]))));
    }
    return static_cast<double>(errors) / (4.0 * static_cast<double>(received.size()));
}

} // namespace sfo
