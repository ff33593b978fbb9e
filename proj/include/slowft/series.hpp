#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "common.hpp"

namespace slowft {

constexpr int default_truncation_order = 24;

// Radius stand-in for series that converge everywhere (d = 0 Coulomb).
constexpr double unbounded_radius_cap = 1e6;

// Fitted-exponent stand-in for tails that vanish identically.
constexpr double faster_than_any_polynomial = 999.0;

// Truncated one-sided power series of f(1/x) near x = 0: sum_{n>=1} a_n x^n.
// coefficients[i] multiplies x^(i+1); there is no constant term.
struct SeriesAtInfinity {
    Side side = Side::positive;
    std::vector<double> coefficients;
    double radius = 0.0;
    int truncation_order = 0;
    double remainder_bound = 0.0;

    // Horner evaluation from the highest retained power.
    double eval(double x) const {
        double p = 0.0;
        for (size_t i = coefficients.size(); i-- > 0;) p = coefficients[i] + x * p;
        return x * p;
    }
};

enum class DecayClass { very_moderate, moderate };

struct DecaySample {
    double radius = 0.0;
    double max_abs = 0.0;
};

// Evidence that |f| <= constant / |x|^order for |x| > threshold.
struct DecayCertificate {
    DecayClass decay_class = DecayClass::very_moderate;
    int order = 1;
    double constant = 0.0;
    double threshold = 1.0;
    double fitted_exponent = 0.0;
    std::vector<DecaySample> evidence;

    bool passes() const {
        if (!(fitted_exponent >= static_cast<double>(order) - 0.15)) return false;
        for (const auto& s : evidence)
            if (s.radius > threshold &&
                s.max_abs > constant / std::pow(s.radius, order) * (1.0 + 1e-12))
                return false;
        return true;
    }
};

namespace detail {

// Geometric-tail majorization at x0 = radius/2. The growth rate comes from
// the median of the gap-scaled step ratios over the trailing coefficients
// (a single ratio is unreliable when conjugate singularities drive the
// coefficients through near-zero dips), floored by the root test. Exact
// polynomials (fewer than two nonzero terms) get a zero remainder.
inline double geometric_remainder(const std::vector<double>& a, double radius) {
    std::vector<int> nz;
    for (int i = 0; i < static_cast<int>(a.size()); ++i)
        if (a[static_cast<size_t>(i)] != 0.0) nz.push_back(i);
    if (nz.size() < 2) return 0.0;

    std::vector<double> rates;
    size_t first = nz.size() > 9 ? nz.size() - 9 : 1;
    for (size_t j = first; j < nz.size(); ++j) {
        int lo = nz[j - 1], hi = nz[j];
        rates.push_back(std::pow(
            std::abs(a[static_cast<size_t>(hi)] / a[static_cast<size_t>(lo)]), 1.0 / (hi - lo)));
    }
    auto mid = rates.begin() + static_cast<long>((rates.size() - 1) / 2);
    std::nth_element(rates.begin(), mid, rates.end());
    double q = *mid;
    for (size_t j = nz.size() / 2; j < nz.size(); ++j) {
        int i = nz[j];
        q = std::max(q, std::pow(std::abs(a[static_cast<size_t>(i)]), 1.0 / (i + 1)));
    }

    double x0 = radius / 2.0;
    double qx = q * x0;
    if (qx >= 1.0)
        throw std::logic_error("geometric_remainder: coefficient growth exceeds the stated radius");
    double amp = 0.0;
    for (size_t j = nz.size() / 2; j < nz.size(); ++j) {
        int i = nz[j];
        amp = std::max(amp, std::abs(a[static_cast<size_t>(i)]) / std::pow(q, i + 1));
    }
    int last = nz.back();
    return amp * std::pow(qx, last + 2) / (1.0 - qx);
}

inline SeriesAtInfinity make_series(Side side, std::vector<double> coeffs, double radius) {
    SeriesAtInfinity s;
    s.side = side;
    s.radius = radius;
    s.truncation_order = static_cast<int>(coeffs.size());
    s.remainder_bound = geometric_remainder(coeffs, radius);
    s.coefficients = std::move(coeffs);
    return s;
}

}  // namespace detail

// b_n = (-1)^n (2n)! / (2^(2n) (n!)^2) from Newton's theorem for (1+t)^(-1/2).
inline double newton_binomial_coeff(int n) {
    if (n < 0 || n > 30)
        throw std::invalid_argument("newton_binomial_coeff: n must lie in [0, 30]");
    if (n <= 20) {
        double num = 1.0, den = 1.0;  // (2n)! and (n!)^2
        for (int i = 1; i <= 2 * n; ++i) num *= i;
        for (int i = 1; i <= n; ++i) den *= static_cast<double>(i) * i;
        double b = num / (std::pow(4.0, n) * den);
        return (n % 2 == 0) ? b : -b;
    }
    double b = newton_binomial_coeff(20);
    for (int m = 20; m < n; ++m) b *= -(2.0 * m + 1.0) / (2.0 * m + 2.0);
    return b;
}

// Series at infinity of f_d(x) = 1/|x - d|: geometric progression with ratio d.
inline SeriesAtInfinity expand_coulomb1d(double d, Side side, int order = default_truncation_order) {
    if (order < 1) throw std::invalid_argument("expand_coulomb1d: order must be >= 1");
    std::vector<double> a(static_cast<size_t>(order), 0.0);
    double sign = (side == Side::positive) ? 1.0 : -1.0;
    double p = 1.0;
    for (int n = 0; n < order; ++n) {
        a[static_cast<size_t>(n)] = sign * p;
        p *= d;
    }
    double radius = (d == 0.0) ? unbounded_radius_cap : 1.0 / std::abs(d);
    return detail::make_series(side, std::move(a), radius);
}

// Series of f'(1/x) from the series of f(1/x): c_n = -(n-1) a_{n-1}, c_1 = 0.
inline SeriesAtInfinity differentiate_series(const SeriesAtInfinity& s) {
    if (s.truncation_order < 2)
        throw std::invalid_argument("differentiate_series: truncation_order must be >= 2");
    std::vector<double> c(s.coefficients.size(), 0.0);
    for (size_t n = 1; n < c.size(); ++n)
        c[n] = -static_cast<double>(n) * s.coefficients[n - 1];
    return detail::make_series(s.side, std::move(c), s.radius);
}

// Leading power n of f(1/x) = x^n u(x) and a bound on |u| over (0, radius/2),
// so |f(x)| <= constant / |x|^n for |x| > 2/radius.
inline std::pair<int, double> decay_order_from_series(const SeriesAtInfinity& s) {
    double scale = 0.0;
    for (double a : s.coefficients) scale = std::max(scale, std::abs(a));
    if (scale == 0.0) throw std::domain_error("decay_order_from_series: identically zero tail");
    size_t lead = 0;
    while (std::abs(s.coefficients[lead]) <= 1e-13 * scale) ++lead;
    int order = static_cast<int>(lead) + 1;
    double x0 = s.radius / 2.0;
    double m = 0.0;
    for (size_t n = s.coefficients.size(); n-- > lead;)
        m = std::abs(s.coefficients[n]) + x0 * m;
    m += s.remainder_bound / std::pow(x0, order);
    return {order, m};
}

}  // namespace slowft
