#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include "anonphy/numerics.hpp"

namespace anonphy {

inline void check_psk_order(int m) {
    if (m < 2) throw std::invalid_argument("PSK order must be at least 2");
}

/// Constellation point e^{j(2m+1)pi/M}.
inline cdouble psk_point(int index, int m) {
    check_psk_order(m);
    if (index < 0 || index >= m) throw std::invalid_argument("psk_point: index out of range");
    return std::polar(1.0, (2.0 * index + 1.0) * std::numbers::pi / m);
}

inline ComplexVector psk_modulate(std::span<const int> indices, int m) {
    ComplexVector s(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) s(static_cast<Eigen::Index>(i)) = psk_point(indices[i], m);
    return s;
}

struct PskDecision {
    int index = 0;
    bool ambiguous = false;  // y == 0: no phase information
};

/// Wedge m covers angles (2 pi m / M, 2 pi (m+1) / M]; an angle exactly on
/// a boundary therefore goes to the lower index, and angle 0 to index 0.
inline PskDecision psk_decide(cdouble y, int m) {
    check_psk_order(m);
    if (y == cdouble(0.0, 0.0)) return {0, true};
    double theta = std::atan2(y.imag(), y.real());
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    if (theta <= 0.0) return {0, false};
    const double wedge = 2.0 * std::numbers::pi / m;
    int idx = static_cast<int>(std::ceil(theta / wedge)) - 1;
    if (idx < 0) idx = 0;
    if (idx >= m) idx = m - 1;
    return {idx, false};
}

inline int psk_demodulate(cdouble y, int m) { return psk_decide(y, m).index; }

/// Distance of y from the decision thresholds of symbol s:
/// Re(y s*) - |Im(y s*)| / tan(pi/M). Non-negative iff y is in the constructive region.
inline double constructive_margin(cdouble y, cdouble s, int m) {
    check_psk_order(m);
    const cdouble z = y * std::conj(s);
    return z.real() - std::abs(z.imag()) / std::tan(std::numbers::pi / m);
}

}  // namespace anonphy
