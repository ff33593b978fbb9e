#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace slowft {

using complex = std::complex<double>;

constexpr double pi = 3.141592653589793238462643383279502884;

// Seed for every randomized probe in the suite.
constexpr std::uint64_t probe_seed = 0x5EED;

// Which side of infinity a series at infinity describes: positive means the
// substitution x -> 1/x with x -> +infinity (series variable in (0, eps)),
// negative means x -> -infinity.
enum class Side { positive, negative };

inline const char* to_string(Side s) {
    return s == Side::positive ? "positive" : "negative";
}

// A point in R^dim, dim in {1,2,3}; trailing coordinates are zero.
struct Point {
    int dim = 0;
    std::array<double, 3> c{0.0, 0.0, 0.0};

    double& operator[](int i) { return c[static_cast<size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<size_t>(i)]; }
};

inline Point make_point(double x) { return Point{1, {x, 0.0, 0.0}}; }
inline Point make_point(double x, double y) { return Point{2, {x, y, 0.0}}; }
inline Point make_point(double x, double y, double z) { return Point{3, {x, y, z}}; }

inline double norm(const Point& p) {
    return std::sqrt(p.c[0] * p.c[0] + p.c[1] * p.c[1] + p.c[2] * p.c[2]);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// Least-squares line y = a + b*x; returns {a, b}.
inline std::pair<double, double> fit_line(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need two or more paired samples");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    if (det == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
    double b = (n * sxy - sx * sy) / det;
    double a = (sy - b * sx) / n;
    return {a, b};
}

}  // namespace slowft
