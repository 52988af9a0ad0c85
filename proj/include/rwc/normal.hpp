#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "error.hpp"

namespace rwc {

// Standard normal survival 1 - Phi(x). erfc keeps full relative accuracy in the tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * (1.0 / std::numbers::sqrt2)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * (1.0 / std::numbers::sqrt2)); }

// P(|N(0,1)| >= |z|).
inline double two_sided_pvalue(double z) { return std::erfc(std::abs(z) * (1.0 / std::numbers::sqrt2)); }

// Survival of the folded normal |N(tau,1)|: P(|N(tau,1)| > t).
inline double psi_bar(double t, double tau = 0.0) {
    if (tau == 0.0) return two_sided_pvalue(t);
    return normal_sf(t - tau) + normal_sf(t + tau);
}

// Inverse of the null folded survival: the t with P(|N(0,1)| > t) = q.
inline double psi_bar_inverse(double q) {
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("psi_bar_inverse: q must lie in (0,1]");
    if (q == 1.0) return 0.0;
    return std::numbers::sqrt2 * boost::math::erfc_inv(q);
}

// Lower end of the HC search range, psi_bar_inverse(1/2).
inline double half_mass_point() {
    static const double v = psi_bar_inverse(0.5);
    return v;
}

}  // namespace rwc
