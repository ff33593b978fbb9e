#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "series.hpp"

namespace slowft {

using MultiIndex = std::array<int, 3>;

inline int order_of(const MultiIndex& mi) { return mi[0] + mi[1] + mi[2]; }

namespace detail {

// Dense trivariate polynomial with per-axis exponents 0..8. Only used to build
// small closed-form tables once; evaluation goes through compact term lists.
struct Poly3 {
    static constexpr int N = 9;
    std::array<double, N * N * N> c{};

    static size_t id(int i, int j, int k) {
        return static_cast<size_t>((i * N + j) * N + k);
    }
    double get(int i, int j, int k) const { return c[id(i, j, k)]; }
    void add(int i, int j, int k, double v) { c[id(i, j, k)] += v; }

    static Poly3 constant(double v) {
        Poly3 p;
        p.add(0, 0, 0, v);
        return p;
    }

    Poly3 deriv(int axis) const {
        Poly3 r;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    double v = get(i, j, k);
                    if (v == 0.0) continue;
                    int e[3] = {i, j, k};
                    if (e[axis] == 0) continue;
                    double f = e[axis];
                    e[axis] -= 1;
                    r.add(e[0], e[1], e[2], v * f);
                }
        return r;
    }

    Poly3 times_axis(int axis) const {
        Poly3 r;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    double v = get(i, j, k);
                    if (v == 0.0) continue;
                    int e[3] = {i, j, k};
                    e[axis] += 1;
                    r.add(e[0], e[1], e[2], v);
                }
        return r;
    }

    // multiply by x^2 + y^2 + z^2 (restricted to dim axes)
    Poly3 times_r2(int dim) const {
        Poly3 r;
        for (int a = 0; a < dim; ++a) {
            Poly3 t = times_axis(a).times_axis(a);
            for (size_t m = 0; m < t.c.size(); ++m) r.c[m] += t.c[m];
        }
        return r;
    }

    Poly3 scaled(double s) const {
        Poly3 r = *this;
        for (auto& v : r.c) v *= s;
        return r;
    }

    Poly3 operator+(const Poly3& o) const {
        Poly3 r = *this;
        for (size_t m = 0; m < c.size(); ++m) r.c[m] += o.c[m];
        return r;
    }

    Poly3 operator*(const Poly3& o) const {
        Poly3 r;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    double v = get(i, j, k);
                    if (v == 0.0) continue;
                    for (int a = 0; a + i < N; ++a)
                        for (int b = 0; b + j < N; ++b)
                            for (int d = 0; d + k < N; ++d) {
                                double w = o.get(a, b, d);
                                if (w != 0.0) r.add(i + a, j + b, k + d, v * w);
                            }
                }
        return r;
    }
};

struct PolyTerm {
    double coef;
    int i, j, k;
};

inline std::vector<PolyTerm> compact_terms(const Poly3& p) {
    std::vector<PolyTerm> t;
    for (int i = 0; i < Poly3::N; ++i)
        for (int j = 0; j < Poly3::N; ++j)
            for (int k = 0; k < Poly3::N; ++k) {
                double v = p.get(i, j, k);
                if (v != 0.0) t.push_back({v, i, j, k});
            }
    return t;
}

inline double eval_terms(const std::vector<PolyTerm>& terms, double x, double y, double z) {
    auto ipow = [](double b, int e) {
        double r = 1.0;
        while (e-- > 0) r *= b;
        return r;
    };
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * ipow(x, t.i) * ipow(y, t.j) * ipow(z, t.k);
    return s;
}

// Numerators P of d^alpha (1/|u|) = P(u)/|u|^(1+2m), m = |alpha|, built by the
// induction P_{alpha+e_i} = |u|^2 dP/du_i - (1+2m) u_i P.
inline const std::vector<PolyTerm>& coulomb_numerator(const MultiIndex& mi, int dim) {
    struct Table {
        std::map<MultiIndex, Poly3> polys;
        std::map<MultiIndex, std::vector<PolyTerm>> terms;
        explicit Table(int dim) {
            polys[{0, 0, 0}] = Poly3::constant(1.0);
            for (int m = 0; m < 4; ++m) {
                std::vector<std::pair<MultiIndex, Poly3>> next;
                for (const auto& [mi0, p] : polys) {
                    if (order_of(mi0) != m) continue;
                    for (int a = 0; a < dim; ++a) {
                        MultiIndex child = mi0;
                        child[static_cast<size_t>(a)] += 1;
                        next.emplace_back(
                            child, p.deriv(a).times_r2(dim) +
                                       p.times_axis(a).scaled(-(1.0 + 2.0 * m)));
                    }
                }
                for (auto& [k, v] : next) polys.emplace(k, v);
            }
            for (const auto& [k, v] : polys) terms[k] = compact_terms(v);
        }
    };
    static const Table t2(2), t3(3);
    const Table& t = (dim == 3) ? t3 : t2;
    auto it = t.terms.find(mi);
    if (it == t.terms.end())
        throw std::invalid_argument("partial_derivative: multi-index order above 4 unsupported");
    return it->second;
}

// a*log(b + r) with r = sqrt(b^2 + other2), stabilized near b + r = 0.
inline double xlog_term(double a, double b, double r, double other2) {
    if (a == 0.0) return 0.0;
    double s = b + r;
    if (s < 1e-280) {
        if (other2 <= 0.0) return 0.0;
        s = other2 / (2.0 * std::abs(b));
    }
    return a * std::log(s);
}

// integral of 1/|q - p| over the rectangle [x1,x2]x[y1,y2] around p = origin.
inline double rect_integral_inv_r(double x1, double x2, double y1, double y2) {
    auto corner = [](double x, double y) {
        double r = std::hypot(x, y);
        if (r == 0.0) return 0.0;
        return xlog_term(x, y, r, x * x) + xlog_term(y, x, r, y * y);
    };
    return corner(x2, y2) - corner(x1, y2) - corner(x2, y1) + corner(x1, y1);
}

// integral of 1/|q - p| over the box [x1,x2]x[y1,y2]x[z1,z2] around p = origin.
inline double box_integral_inv_r(double x1, double x2, double y1, double y2, double z1,
                                 double z2) {
    auto corner = [](double x, double y, double z) {
        double r = std::sqrt(x * x + y * y + z * z);
        if (r == 0.0) return 0.0;
        auto at = [](double num, double den) {
            return den == 0.0 ? 0.0 : std::atan(num / den);
        };
        return xlog_term(y * z, x, r, y * y + z * z) +
               xlog_term(x * z, y, r, x * x + z * z) +
               xlog_term(x * y, z, r, x * x + y * y) -
               0.5 * x * x * at(y * z, x * r) - 0.5 * y * y * at(x * z, y * r) -
               0.5 * z * z * at(x * y, z * r);
    };
    double s = 0.0;
    for (int ix = 0; ix < 2; ++ix)
        for (int iy = 0; iy < 2; ++iy)
            for (int iz = 0; iz < 2; ++iz) {
                // sign is (-1)^(number of lower bounds)
                double sign = ((ix + iy + iz) % 2 == 1) ? 1.0 : -1.0;
                s += sign * corner(ix ? x2 : x1, iy ? y2 : y1, iz ? z2 : z1);
            }
    return s;
}

}  // namespace detail

struct ShiftedCoulomb {
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double exclusion_radius = 0.5;  // the closed ball W = B(center, s)
};

struct DensityGrid {
    int dimension = 0;  // 2 or 3
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<int, 3> shape{1, 1, 1};
    std::vector<double> values;  // cell-center samples, flattened (i*ny + j)*nz + k
    double support_radius = 0.0;
    double sup_bound = 0.0;
    bool nonnegative = false;
    bool is_smooth = false;
    // Analytic derivative sampler (multi_index, point) -> d^alpha rho, if known.
    std::function<double(const MultiIndex&, const Point&)> derivative_sampler;
    int max_derivative_order = 0;

    size_t flat(int i, int j, int k) const {
        return static_cast<size_t>((i * shape[1] + j) * shape[2] + k);
    }
    Point cell_center(int i, int j, int k) const {
        Point p;
        p.dim = dimension;
        p.c = {origin[0] + i * spacing[0], origin[1] + j * spacing[1],
               dimension == 3 ? origin[2] + k * spacing[2] : 0.0};
        return p;
    }
    double cell_volume() const {
        double v = spacing[0] * spacing[1];
        return dimension == 3 ? v * spacing[2] : v;
    }
};

namespace detail {

struct DerivData {
    std::vector<double> mass;   // cell volume * sampled derivative value
    std::vector<double> value;  // sampled derivative value
};

struct PotentialImpl {
    DensityGrid grid;
    double cell_volume = 0.0;
    std::vector<double> px, py, pz;  // nonzero cell centers
    std::vector<int> ci, cj, ck;     // their grid indices
    DerivData base;
    std::vector<int> pos_of_flat;  // grid flat index -> nonzero position or -1
    double total_mass = 0.0;

    mutable std::mutex mu;
    mutable std::map<MultiIndex, std::shared_ptr<const DerivData>> dcache;
};

}  // namespace detail

struct DensityPotential {
    std::shared_ptr<const detail::PotentialImpl> impl;
    const DensityGrid& grid() const { return impl->grid; }
    double total_mass() const { return impl->total_mass; }
};

struct KernelFunction {
    int dimension = 0;
    std::variant<ShiftedCoulomb, DensityPotential> family;

    bool is_coulomb() const { return std::holds_alternative<ShiftedCoulomb>(family); }
    const ShiftedCoulomb& coulomb() const { return std::get<ShiftedCoulomb>(family); }
    const DensityPotential& density() const { return std::get<DensityPotential>(family); }
};

inline KernelFunction make_coulomb(int dim, std::array<double, 3> center,
                                   double exclusion_radius = 0.5) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("make_coulomb: dimension must be 1..3");
    if (!(exclusion_radius > 0.0))
        throw std::invalid_argument("make_coulomb: exclusion_radius must be positive");
    for (int a = dim; a < 3; ++a) center[static_cast<size_t>(a)] = 0.0;
    return KernelFunction{dim, ShiftedCoulomb{center, exclusion_radius}};
}

inline KernelFunction make_density_kernel(DensityGrid grid) {
    if (grid.dimension != 2 && grid.dimension != 3)
        throw std::invalid_argument("make_density_kernel: dimension must be 2 or 3");
    auto impl = std::make_shared<detail::PotentialImpl>();
    impl->grid = std::move(grid);
    const DensityGrid& g = impl->grid;
    impl->cell_volume = g.cell_volume();
    impl->pos_of_flat.assign(g.values.size(), -1);
    for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j)
            for (int k = 0; k < g.shape[2]; ++k) {
                double v = g.values[g.flat(i, j, k)];
                if (v == 0.0) continue;
                impl->pos_of_flat[g.flat(i, j, k)] = static_cast<int>(impl->px.size());
                Point c = g.cell_center(i, j, k);
                impl->px.push_back(c[0]);
                impl->py.push_back(c[1]);
                impl->pz.push_back(c[2]);
                impl->ci.push_back(i);
                impl->cj.push_back(j);
                impl->ck.push_back(k);
                impl->base.value.push_back(v);
                impl->base.mass.push_back(v * impl->cell_volume);
                impl->total_mass += v * impl->cell_volume;
            }
    if (impl->px.empty()) throw std::invalid_argument("make_density_kernel: rho != 0 required");
    return KernelFunction{impl->grid.dimension, DensityPotential{std::move(impl)}};
}

namespace detail {

// positions (into the nonzero-cell arrays) of cells adjacent to p, when p lies
// inside the grid box; these get the analytic cell integral instead of the
// point term.
inline void near_positions(const PotentialImpl& im, const Point& p, std::vector<int>& out) {
    out.clear();
    const DensityGrid& g = im.grid;
    int idx[3] = {0, 0, 0};
    for (int a = 0; a < g.dimension; ++a) {
        double t = (p[a] - g.origin[static_cast<size_t>(a)]) / g.spacing[static_cast<size_t>(a)];
        double r = std::round(t);
        if (r < -0.5 || r > g.shape[static_cast<size_t>(a)] - 0.5) return;  // outside box
        idx[a] = static_cast<int>(std::clamp(r, 0.0, g.shape[static_cast<size_t>(a)] - 1.0));
    }
    int kzlo = (g.dimension == 3) ? -1 : 0, kzhi = (g.dimension == 3) ? 1 : 0;
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
            for (int dk = kzlo; dk <= kzhi; ++dk) {
                int i = idx[0] + di, j = idx[1] + dj, k = idx[2] + dk;
                if (i < 0 || j < 0 || k < 0 || i >= g.shape[0] || j >= g.shape[1] ||
                    k >= g.shape[2])
                    continue;
                int pos = im.pos_of_flat[g.flat(i, j, k)];
                if (pos >= 0) out.push_back(pos);
            }
    std::sort(out.begin(), out.end());
}

inline double cell_integral_inv_r(const PotentialImpl& im, int pos, const Point& p) {
    const DensityGrid& g = im.grid;
    double hx = g.spacing[0] / 2.0, hy = g.spacing[1] / 2.0;
    double cx = im.px[static_cast<size_t>(pos)] - p[0];
    double cy = im.py[static_cast<size_t>(pos)] - p[1];
    if (g.dimension == 2)
        return rect_integral_inv_r(cx - hx, cx + hx, cy - hy, cy + hy);
    double hz = g.spacing[2] / 2.0;
    double cz = im.pz[static_cast<size_t>(pos)] - p[2];
    return box_integral_inv_r(cx - hx, cx + hx, cy - hy, cy + hy, cz - hz, cz + hz);
}

// potential of the given per-cell data: point terms everywhere, analytic cell
// integrals on the cells adjacent to p.
inline double potential_sum(const PotentialImpl& im, const DerivData& data, const Point& p) {
    thread_local std::vector<int> near;
    near_positions(im, p, near);
    const size_t n = im.px.size();
    double acc = 0.0;
    size_t start = 0;
    auto run = [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            double dx = p[0] - im.px[i], dy = p[1] - im.py[i], dz = p[2] - im.pz[i];
            acc += data.mass[i] / std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    };
    for (int pos : near) {
        run(start, static_cast<size_t>(pos));
        start = static_cast<size_t>(pos) + 1;
    }
    run(start, n);
    for (int pos : near)
        acc += data.value[static_cast<size_t>(pos)] * cell_integral_inv_r(im, pos, p);
    return acc;
}

// 4th-order central-difference derivative of the grid values along one axis,
// zero extension outside the box.
inline std::vector<double> fd_axis(const DensityGrid& g, const std::vector<double>& v, int axis,
                                   int order) {
    std::vector<double> out(v.size(), 0.0);
    double h = g.spacing[static_cast<size_t>(axis)];
    auto at = [&](int i, int j, int k) -> double {
        if (i < 0 || j < 0 || k < 0 || i >= g.shape[0] || j >= g.shape[1] || k >= g.shape[2])
            return 0.0;
        return v[g.flat(i, j, k)];
    };
    for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j)
            for (int k = 0; k < g.shape[2]; ++k) {
                int d[3] = {0, 0, 0};
                auto sh = [&](int s) {
                    d[axis] = s;
                    return at(i + d[0], j + d[1], k + d[2]);
                };
                double r;
                if (order == 1)
                    r = (sh(-2) - 8.0 * sh(-1) + 8.0 * sh(1) - sh(2)) / (12.0 * h);
                else
                    r = (-sh(-2) + 16.0 * sh(-1) - 30.0 * sh(0) + 16.0 * sh(1) - sh(2)) /
                        (12.0 * h * h);
                out[g.flat(i, j, k)] = r;
            }
    return out;
}

inline std::shared_ptr<const DerivData> derivative_data(const PotentialImpl& im,
                                                        const MultiIndex& mi) {
    std::lock_guard<std::mutex> lock(im.mu);
    auto it = im.dcache.find(mi);
    if (it != im.dcache.end()) return it->second;

    const DensityGrid& g = im.grid;
    auto data = std::make_shared<DerivData>();
    const size_t n = im.px.size();
    data->value.resize(n);
    data->mass.resize(n);
    if (g.derivative_sampler && order_of(mi) <= g.max_derivative_order) {
        for (size_t i = 0; i < n; ++i) {
            Point c;
            c.dim = g.dimension;
            c.c = {im.px[i], im.py[i], im.pz[i]};
            data->value[i] = g.derivative_sampler(mi, c);
            data->mass[i] = data->value[i] * im.cell_volume;
        }
    } else if (g.is_smooth && order_of(mi) <= 2) {
        std::vector<double> v = g.values;
        for (int a = 0; a < 3; ++a) {
            if (mi[static_cast<size_t>(a)] == 0) continue;
            v = fd_axis(g, v, a, mi[static_cast<size_t>(a)]);
        }
        for (size_t i = 0; i < n; ++i) {
            data->value[i] = v[g.flat(im.ci[i], im.cj[i], im.ck[i])];
            data->mass[i] = data->value[i] * im.cell_volume;
        }
    } else {
        throw std::domain_error(
            "partial_derivative: derivative data unavailable inside the support for this grid");
    }
    // A derivative of a compactly supported density integrates to zero; remove
    // the sampling residue so far fields keep the right decay order.
    double residue = 0.0;
    for (double m : data->mass) residue += m;
    double shift = residue / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        data->mass[i] -= shift;
        data->value[i] -= shift / im.cell_volume;
    }
    im.dcache.emplace(mi, data);
    return data;
}

// sum of mass_c * P(p - q_c)/|p - q_c|^(1+2m): differentiation under the
// integral with the closed-form point derivatives; valid outside the support.
inline double point_derivative_sum(const PotentialImpl& im, const MultiIndex& mi,
                                   const Point& p) {
    const auto& terms = coulomb_numerator(mi, im.grid.dimension);
    int m = order_of(mi);
    double acc = 0.0;
    for (size_t i = 0; i < im.px.size(); ++i) {
        double ux = p[0] - im.px[i], uy = p[1] - im.py[i], uz = p[2] - im.pz[i];
        double r2 = ux * ux + uy * uy + uz * uz;
        double r = std::sqrt(r2);
        double den = r;
        for (int t = 0; t < m; ++t) den *= r2;
        acc += im.base.mass[i] * eval_terms(terms, ux, uy, uz) / den;
    }
    return acc;
}

}  // namespace detail

inline double eval(const KernelFunction& k, const Point& p) {
    if (p.dim != k.dimension) throw std::invalid_argument("eval: point dimension mismatch");
    if (k.is_coulomb()) {
        const auto& c = k.coulomb();
        double dx = p[0] - c.center[0], dy = p[1] - c.center[1], dz = p[2] - c.center[2];
        double r = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (r <= c.exclusion_radius)
            throw std::domain_error("eval: point inside the excluded set W");
        return 1.0 / r;
    }
    const auto& im = *k.density().impl;
    return detail::potential_sum(im, im.base, p);
}

inline double partial_derivative(const KernelFunction& k, const MultiIndex& mi, const Point& p) {
    if (p.dim != k.dimension)
        throw std::invalid_argument("partial_derivative: point dimension mismatch");
    for (int a = 0; a < 3; ++a) {
        if (mi[static_cast<size_t>(a)] < 0)
            throw std::invalid_argument("partial_derivative: negative multi-index");
        if (a >= k.dimension && mi[static_cast<size_t>(a)] != 0)
            throw std::invalid_argument("partial_derivative: multi-index beyond dimension");
    }
    int m = order_of(mi);
    if (m > 4) throw std::invalid_argument("partial_derivative: multi-index order above 4 unsupported");
    if (m == 0) return eval(k, p);

    if (k.is_coulomb()) {
        const auto& c = k.coulomb();
        double ux = p[0] - c.center[0], uy = p[1] - c.center[1], uz = p[2] - c.center[2];
        double r2 = ux * ux + uy * uy + uz * uz;
        double r = std::sqrt(r2);
        if (r <= c.exclusion_radius)
            throw std::domain_error("partial_derivative: point inside the excluded set W");
        const auto& terms = detail::coulomb_numerator(mi, k.dimension);
        double den = r;
        for (int t = 0; t < m; ++t) den *= r2;
        return detail::eval_terms(terms, ux, uy, uz) / den;
    }

    const auto& im = *k.density().impl;
    const DensityGrid& g = im.grid;
    // outside the support the cell sums can be differentiated term by term,
    // which keeps derivatives exactly consistent with eval; inside, the
    // derivative is lifted onto the sampled density instead
    if (norm(p) > g.support_radius) return detail::point_derivative_sum(im, mi, p);
    int avail = g.derivative_sampler ? g.max_derivative_order : (g.is_smooth ? 2 : 0);
    if (g.is_smooth && m <= avail) {
        auto data = detail::derivative_data(im, mi);
        return detail::potential_sum(im, *data, p);
    }
    throw std::domain_error(
        "partial_derivative: inside the support of a density without smooth derivative data");
}

// 1D restriction of a kernel. Fixing fewer than dim-1 axes yields a partial
// fiber that must be completed with fix() before evaluation.
struct Fiber1D {
    KernelFunction parent;
    std::vector<std::pair<int, double>> fixed_axes;
    int free_axis = -1;
    int derivative_order = 0;

    bool complete() const { return free_axis >= 0; }

    double operator()(double t) const {
        if (!complete()) throw std::logic_error("Fiber1D: fiber is not one-dimensional yet");
        Point p;
        p.dim = parent.dimension;
        for (const auto& [a, v] : fixed_axes) p[a] = v;
        p[free_axis] = t;
        if (derivative_order == 0) return eval(parent, p);
        MultiIndex mi{0, 0, 0};
        mi[static_cast<size_t>(free_axis)] = derivative_order;
        return partial_derivative(parent, mi, p);
    }

    Fiber1D with_derivative(int m) const {
        if (m < 0 || m > 4)
            throw std::invalid_argument("Fiber1D: derivative_order must lie in [0, 4]");
        Fiber1D f = *this;
        f.derivative_order = m;
        return f;
    }

    // squared distance from the fiber line to the kernel center (coulomb)
    double center_offset2() const {
        if (!parent.is_coulomb()) return 0.0;
        double s = 0.0;
        for (const auto& [a, v] : fixed_axes) {
            double d = v - parent.coulomb().center[static_cast<size_t>(a)];
            s += d * d;
        }
        return s;
    }

    bool crosses_excluded_set() const {
        if (!parent.is_coulomb()) return false;
        return std::sqrt(center_offset2()) <= parent.coulomb().exclusion_radius;
    }

    // region along the free axis where the kernel varies on O(1) scales
    Interval feature_interval() const {
        if (parent.is_coulomb()) {
            double c = parent.coulomb().center[static_cast<size_t>(free_axis)];
            double w = parent.coulomb().exclusion_radius + 4.0;
            return {c - w, c + w};
        }
        double w = parent.density().grid().support_radius + 3.0;
        return {-w, w};
    }
};

inline Fiber1D fiber(const KernelFunction& k, const std::vector<std::pair<int, double>>& fixed) {
    Fiber1D f;
    f.parent = k;
    std::array<bool, 3> seen{false, false, false};
    for (const auto& [a, v] : fixed) {
        if (a < 0 || a >= k.dimension) throw std::invalid_argument("fiber: axis out of range");
        if (seen[static_cast<size_t>(a)]) throw std::invalid_argument("fiber: axis fixed twice");
        seen[static_cast<size_t>(a)] = true;
        f.fixed_axes.emplace_back(a, v);
    }
    if (static_cast<int>(fixed.size()) >= k.dimension)
        throw std::invalid_argument("fiber: at least one axis must stay free");
    if (static_cast<int>(fixed.size()) == k.dimension - 1) {
        for (int a = 0; a < k.dimension; ++a)
            if (!seen[static_cast<size_t>(a)]) f.free_axis = a;
    }
    return f;
}

inline Fiber1D fix(const Fiber1D& partial, const std::vector<std::pair<int, double>>& more) {
    std::vector<std::pair<int, double>> all = partial.fixed_axes;
    all.insert(all.end(), more.begin(), more.end());
    Fiber1D f = fiber(partial.parent, all);
    f.derivative_order = partial.derivative_order;
    return f;
}

namespace detail {

// Coefficients of y * sum_n b_n P(y)^n truncated at y^order, where
// P(y) = (alpha2 + b^2) y^2 - 2 b y; Newton's theorem applied to one fiber.
inline void accumulate_newton(std::vector<double>& acc, double weight, double alpha2, double b,
                              int order) {
    const double c2 = alpha2 + b * b, c1 = -2.0 * b;
    // S(y) = sum b_n P^n to degree order-1; series coefficient a_k = S[k-1].
    std::vector<double> pow(static_cast<size_t>(order), 0.0);  // current P^n
    pow[0] = 1.0;
    int lowest = 0;  // lowest possible degree of P^n
    acc[0] += weight;  // n = 0 term, b_0 = 1
    for (int n = 1; n < order && lowest < order; ++n) {
        std::vector<double> nxt(static_cast<size_t>(order), 0.0);
        for (int d = lowest; d < order; ++d) {
            double v = pow[static_cast<size_t>(d)];
            if (v == 0.0) continue;
            if (d + 1 < order) nxt[static_cast<size_t>(d + 1)] += v * c1;
            if (d + 2 < order) nxt[static_cast<size_t>(d + 2)] += v * c2;
        }
        pow.swap(nxt);
        lowest += (c1 != 0.0) ? 1 : 2;
        double bn = newton_binomial_coeff(n);
        for (int d = lowest; d < order; ++d)
            acc[static_cast<size_t>(d)] += weight * bn * pow[static_cast<size_t>(d)];
    }
}

}  // namespace detail

// Series at infinity of a kernel fiber via Newton's theorem; density fibers
// accumulate the per-cell expansions with the grid maximum as threshold.
inline SeriesAtInfinity expand_fiber_at_infinity(const Fiber1D& f, Side side,
                                                 int order = default_truncation_order) {
    if (!f.complete()) throw std::invalid_argument("expand_fiber_at_infinity: fiber incomplete");
    if (f.derivative_order != 0)
        throw std::invalid_argument(
            "expand_fiber_at_infinity: expansion is defined for the underlying fiber; use "
            "differentiate_series for derivatives");
    if (order < 1 || order > 30)
        throw std::invalid_argument("expand_fiber_at_infinity: order must lie in [1, 30]");

    std::vector<double> s(static_cast<size_t>(order), 0.0);
    double denom_max = 0.0;
    if (f.parent.is_coulomb()) {
        double alpha2 = f.center_offset2();
        double b = f.parent.coulomb().center[static_cast<size_t>(f.free_axis)];
        detail::accumulate_newton(s, 1.0, alpha2, b, order);
        denom_max = alpha2 + 2.0 * std::abs(b) + b * b;
    } else {
        const auto& im = *f.parent.density().impl;
        for (size_t i = 0; i < im.px.size(); ++i) {
            std::array<double, 3> q{im.px[i], im.py[i], im.pz[i]};
            double alpha2 = 0.0;
            for (const auto& [a, v] : f.fixed_axes) {
                double d = v - q[static_cast<size_t>(a)];
                alpha2 += d * d;
            }
            double b = q[static_cast<size_t>(f.free_axis)];
            detail::accumulate_newton(s, im.base.mass[i], alpha2, b, order);
            denom_max = std::max(denom_max, alpha2 + 2.0 * std::abs(b) + b * b);
        }
    }
    // the extra power of y in f(1/y) = y * S(y) makes s[k-1] the k-th coefficient
    if (side == Side::negative)
        for (auto& v : s) v = -v;
    double radius = denom_max > 1.0 / unbounded_radius_cap ? 1.0 / denom_max : unbounded_radius_cap;
    return detail::make_series(side, std::move(s), radius);
}

// bump density rho(x) = c (1 - |x|^2)^4 on |x| <= 1, unit mass, with analytic
// derivatives to order 4.
inline DensityGrid make_bump_density(int dim, int cells_per_axis = 0) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("make_bump_density: dim must be 2 or 3");
    int n = cells_per_axis > 0 ? cells_per_axis : (dim == 2 ? 256 : 64);
    // normalization: 2D integral of (1-r^2)^4 is pi/5, 3D is 4*pi*128/3465
    double c = (dim == 2) ? 5.0 / pi : 3465.0 / (512.0 * pi);

    detail::Poly3 base = detail::Poly3::constant(1.0);
    base.add(2, 0, 0, -1.0);
    base.add(0, 2, 0, -1.0);
    if (dim == 3) base.add(0, 0, 2, -1.0);
    detail::Poly3 sq = base * base;
    detail::Poly3 rho = (sq * sq).scaled(c);

    auto tables = std::make_shared<std::map<MultiIndex, std::vector<detail::PolyTerm>>>();
    std::map<MultiIndex, detail::Poly3> polys;
    polys[{0, 0, 0}] = rho;
    for (int m = 0; m < 4; ++m) {
        std::vector<std::pair<MultiIndex, detail::Poly3>> next;
        for (const auto& [mi, p] : polys) {
            if (order_of(mi) != m) continue;
            for (int a = 0; a < dim; ++a) {
                MultiIndex child = mi;
                child[static_cast<size_t>(a)] += 1;
                next.emplace_back(child, p.deriv(a));
            }
        }
        for (auto& [k, v] : next) polys.emplace(k, v);
    }
    for (const auto& [k, v] : polys) (*tables)[k] = detail::compact_terms(v);

    DensityGrid g;
    g.dimension = dim;
    g.shape = {n, n, dim == 3 ? n : 1};
    double h = 2.0 / n;
    g.spacing = {h, h, dim == 3 ? h : 1.0};
    g.origin = {-1.0 + h / 2.0, -1.0 + h / 2.0, dim == 3 ? -1.0 + h / 2.0 : 0.0};
    g.support_radius = 1.0;
    g.sup_bound = c;
    g.nonnegative = true;
    g.is_smooth = true;
    g.max_derivative_order = 4;
    g.values.assign(static_cast<size_t>(n) * n * (dim == 3 ? n : 1), 0.0);
    for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j)
            for (int k = 0; k < g.shape[2]; ++k) {
                Point p = g.cell_center(i, j, k);
                double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                if (r2 < 1.0) {
                    double t = 1.0 - r2;
                    g.values[g.flat(i, j, k)] = c * t * t * t * t;
                }
            }
    g.derivative_sampler = [tables](const MultiIndex& mi, const Point& p) -> double {
        double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        if (r2 >= 1.0) return 0.0;
        auto it = tables->find(mi);
        if (it == tables->end())
            throw std::invalid_argument("bump derivative sampler: order above 4");
        return detail::eval_terms(it->second, p[0], p[1], p[2]);
    };
    return g;
}

// split rho = rho+ + rho- for the quasi-split certification
inline std::pair<DensityGrid, DensityGrid> split_density(const DensityGrid& g) {
    DensityGrid pos = g, neg = g;
    for (size_t i = 0; i < g.values.size(); ++i) {
        pos.values[i] = std::max(g.values[i], 0.0);
        neg.values[i] = std::min(g.values[i], 0.0);
    }
    pos.nonnegative = true;
    neg.nonnegative = false;
    pos.derivative_sampler = nullptr;
    neg.derivative_sampler = nullptr;
    pos.max_derivative_order = 0;
    neg.max_derivative_order = 0;
    return {pos, neg};
}

struct DensityMetadata {
    bool is_smooth = false;
    std::optional<double> sup_bound;
    std::optional<bool> nonnegative;
};

// CSV schema: "# dim=<2|3> origin=<...> spacing=<...> support_radius=<M>" then
// rows "i,j[,k],value".
inline DensityGrid load_density(const std::string& path, const DensityMetadata& meta = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_density: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header.empty() || header[0] != '#')
        throw std::runtime_error("load_density: missing header line in " + path);

    auto field = [&](const std::string& key) {
        auto pos = header.find(key + "=");
        if (pos == std::string::npos)
            throw std::runtime_error("load_density: header lacks " + key + " in " + path);
        pos += key.size() + 1;
        auto end = header.find(' ', pos);
        return header.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    };
    auto split_nums = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        return v;
    };

    DensityGrid g;
    g.dimension = std::stoi(field("dim"));
    if (g.dimension != 2 && g.dimension != 3)
        throw std::runtime_error("load_density: dim must be 2 or 3 in " + path);
    auto org = split_nums(field("origin"));
    auto spc = split_nums(field("spacing"));
    if (static_cast<int>(org.size()) != g.dimension ||
        static_cast<int>(spc.size()) != g.dimension)
        throw std::runtime_error("load_density: origin/spacing arity mismatch in " + path);
    for (int a = 0; a < g.dimension; ++a) {
        g.origin[static_cast<size_t>(a)] = org[static_cast<size_t>(a)];
        g.spacing[static_cast<size_t>(a)] = spc[static_cast<size_t>(a)];
    }
    g.support_radius = std::stod(field("support_radius"));
    if (!(g.support_radius > 0.0))
        throw std::runtime_error("load_density: support_radius must be positive in " + path);

    struct Row {
        int i, j, k;
        double v;
    };
    std::vector<Row> rows;
    std::array<int, 3> maxidx{0, 0, 0};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> parts;
        while (std::getline(ss, tok, ',')) parts.push_back(tok);
        if (static_cast<int>(parts.size()) != g.dimension + 1)
            throw std::runtime_error("load_density: malformed row '" + line + "' in " + path);
        Row r{std::stoi(parts[0]), std::stoi(parts[1]),
              g.dimension == 3 ? std::stoi(parts[2]) : 0,
              std::stod(parts[static_cast<size_t>(g.dimension)])};
        if (r.i < 0 || r.j < 0 || r.k < 0)
            throw std::runtime_error("load_density: negative index in " + path);
        if (std::isnan(r.v)) throw std::runtime_error("load_density: NaN density in " + path);
        maxidx[0] = std::max(maxidx[0], r.i);
        maxidx[1] = std::max(maxidx[1], r.j);
        maxidx[2] = std::max(maxidx[2], r.k);
        rows.push_back(r);
    }
    g.shape = {maxidx[0] + 1, maxidx[1] + 1, g.dimension == 3 ? maxidx[2] + 1 : 1};
    g.values.assign(static_cast<size_t>(g.shape[0]) * g.shape[1] * g.shape[2], 0.0);
    for (const auto& r : rows) g.values[g.flat(r.i, r.j, r.k)] = r.v;

    double mx = 0.0, mn = 0.0;
    bool any = false;
    for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j)
            for (int k = 0; k < g.shape[2]; ++k) {
                double v = g.values[g.flat(i, j, k)];
                mx = std::max(mx, std::abs(v));
                mn = std::min(mn, v);
                if (v != 0.0) {
                    any = true;
                    if (norm(g.cell_center(i, j, k)) > g.support_radius)
                        throw std::runtime_error(
                            "load_density: support violation (nonzero value outside the declared "
                            "radius) in " +
                            path);
                }
            }
    if (!any) throw std::runtime_error("load_density: rho != 0 required in " + path);
    g.sup_bound = meta.sup_bound.value_or(mx);
    if (g.sup_bound < mx)
        throw std::runtime_error("load_density: declared sup_bound below max|rho| in " + path);
    g.nonnegative = meta.nonnegative.value_or(mn >= 0.0);
    if (g.nonnegative && mn < 0.0)
        throw std::runtime_error("load_density: negative values contradict metadata in " + path);
    g.is_smooth = meta.is_smooth;
    return g;
}

}  // namespace slowft
