#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "kernels.hpp"
#include "normality.hpp"
#include "oscquad.hpp"

namespace slowft {

// Diagnostics for the double-limit probes: the s_{m,n} table with per-m tail
// fits (2D), or the rectangle-truncation shape fit A/s + B/t + C/|(s,t)| (3D).
struct MooreOsgoodDiagnostics {
    bool present = false;
    bool already_converged = false;
    std::vector<double> m_values, n_values;
    std::vector<std::vector<complex>> table;  // [m][n]
    std::vector<double> tail_slopes;          // fitted per-m exponent of the n-tail
    std::vector<double> tail_constants;       // fitted per-m constant c in c/n
    double uniformity_spread = 0.0;           // max/min of tail_constants
    double shape_A = 0.0, shape_B = 0.0, shape_C = 0.0;
    double shape_max_ratio = 0.0;  // max measured / fitted over the (s,t) grid
    bool pass = false;
};

struct IteratedTransformReport {
    std::vector<double> wavevector;
    std::map<std::string, complex> values;  // 2D: xy, yx; 3D: A, B, C, F, G, H
    std::map<std::string, double> per_ordering_error;
    std::map<std::string, std::vector<std::pair<double, complex>>> traces;
    double max_pairwise_deviation = 0.0;
    MooreOsgoodDiagnostics moore_osgood;
    bool pass = false;
    bool converged = true;

    // pass rule: deviation no larger than the two largest error bars combined
    double error_allowance() const {
        double a = 0.0, b = 0.0;
        for (const auto& entry : per_ordering_error) {
            double e = entry.second;
            if (e > a) {
                b = a;
                a = e;
            } else if (e > b) {
                b = e;
            }
        }
        return a + b;
    }
};

struct IteratedConfig {
    QuadConfig quad;    // inner panel route
    ProbeConfig probe;  // certification probes
    double outer_tol = 1e-6;
    double outer_max_radius = 512.0;
    int outer_panels_per_period = 4;
    bool use_closed_form_inner = true;  // discrete sources have exact line transforms
    bool probe_table = true;            // compute the double-limit probe
    std::optional<NormalityCertificate> certificate;  // reuse to skip re-certification
};

namespace detail {

// Discrete line sources after collapsing the transformed axis: the transform
// of m/|x - p| along that axis is 2 w K0(|k| d) with the phase folded into w.
struct LineSource {
    complex weight{0.0, 0.0};
    double u = 0.0, v = 0.0;  // coordinates on the remaining axes
};

inline std::array<int, 2> remaining_axes(int axis, int dim) {
    if (axis < 0 || axis >= dim) throw std::invalid_argument("transform axis out of range");
    std::array<int, 2> out{-1, -1};
    int n = 0;
    for (int a = 0; a < dim; ++a)
        if (a != axis) out[static_cast<size_t>(n++)] = a;
    return out;
}

inline std::vector<LineSource> collapse_sources(const KernelFunction& k, int axis, double wave) {
    auto rem = remaining_axes(axis, k.dimension);
    std::vector<LineSource> out;
    if (k.is_coulomb()) {
        const auto& c = k.coulomb();
        LineSource s;
        s.weight = std::exp(complex(0.0, -wave * c.center[static_cast<size_t>(axis)]));
        s.u = c.center[static_cast<size_t>(rem[0])];
        if (rem[1] >= 0) s.v = c.center[static_cast<size_t>(rem[1])];
        out.push_back(s);
        return out;
    }
    const auto& im = *k.density().impl;
    auto coord = [&](int a, size_t i) {
        return a == 0 ? im.px[i] : (a == 1 ? im.py[i] : im.pz[i]);
    };
    auto index = [&](int a, size_t i) {
        return a == 0 ? im.ci[i] : (a == 1 ? im.cj[i] : im.ck[i]);
    };
    std::map<std::pair<int, int>, size_t> slot;
    for (size_t i = 0; i < im.px.size(); ++i) {
        std::pair<int, int> key{index(rem[0], i), rem[1] >= 0 ? index(rem[1], i) : 0};
        auto [it, fresh] = slot.try_emplace(key, out.size());
        if (fresh) {
            LineSource s;
            s.u = coord(rem[0], i);
            if (rem[1] >= 0) s.v = coord(rem[1], i);
            out.push_back(s);
        }
        out[it->second].weight +=
            im.base.mass[i] * std::exp(complex(0.0, -wave * coord(axis, i)));
    }
    return out;
}

inline TransformResult closed_line_transform(const std::vector<LineSource>& sources, double wave,
                                             double u, double v) {
    complex value{0.0, 0.0};
    double magnitude = 0.0;
    for (const auto& s : sources) {
        double d = std::hypot(u - s.u, v - s.v);
        if (d < 1e-9)
            throw std::domain_error("line transform: integration line passes through a source");
        double bessel = 2.0 * std::cyl_bessel_k(0.0, std::abs(wave) * d);
        value += s.weight * bessel;
        magnitude += std::abs(s.weight) * bessel;
    }
    TransformResult res;
    res.value = value;
    res.error_estimate = 1e-12 * magnitude;
    res.truncation_radius = std::numeric_limits<double>::infinity();
    res.converged = true;
    return res;
}

// A source plane and the share of the total weight that sits on it. The line
// transforms have log spikes at the planes; a plane carrying a concentrated
// share needs its quadrature panels refined toward it.
struct PlaneBreak {
    double pos = 0.0;
    double share = 0.0;   // fraction of the total absolute weight
    double weight = 0.0;  // absolute weight on the plane
};

inline std::vector<PlaneBreak> source_planes(const std::vector<LineSource>& sources,
                                             bool second) {
    std::vector<std::pair<double, double>> raw;
    for (const auto& s : sources) raw.emplace_back(second ? s.v : s.u, std::abs(s.weight));
    std::sort(raw.begin(), raw.end());
    std::vector<PlaneBreak> planes;
    double total = 0.0;
    for (const auto& [pos, w] : raw) {
        total += w;
        if (!planes.empty() && std::abs(pos - planes.back().pos) < 1e-9)
            planes.back().weight += w;
        else
            planes.push_back({pos, 0.0, w});
    }
    if (total > 0.0)
        for (auto& p : planes) p.share = p.weight / total;
    return planes;
}

// One quadrature axis: uniform oscillation-scaled panels anchored at `split`,
// with extra edges at source planes (the line transforms have log spikes
// there), panels ordered by distance from the origin for truncation sweeps.
struct PanelAxis {
    double wave = 0.0;
    std::vector<double> edges;
    std::vector<int> order;         // panel indices by ascending key
    std::vector<double> key;        // per panel: max(|lo|, |hi|)
    std::vector<double> nodes, nw;  // 8 GL nodes per panel, weight * half-width
    std::vector<complex> phase;     // e^{-i wave x} per node
    double spike_residual = 0.0;    // bound on the quadrature error left at refined planes

    int panels() const { return static_cast<int>(key.size()); }
};

// Gauss nodes never touch a log spike sitting at a panel endpoint, but they
// do not kill it either: on [0, h] the rule misses 8.8e-3 * h of the unit
// log mass, independent of scale. Stacking dyadic panels against the plane
// drives h down; the bound below uses 0.08 (margin over the measured
// constant, two sides, log coefficient 2|w|) times the innermost width.
inline PanelAxis build_axis(double wave, int ppp, double extent,
                            const std::vector<PlaneBreak>& breaks, double split = 0.0,
                            double refine_share = 0.25) {
    if (wave == 0.0) throw std::invalid_argument("panel axis: wave component must be nonzero");
    if (ppp < 4) throw std::invalid_argument("panel axis: panels_per_period must be >= 4");
    if (!(extent >= 32.0)) throw std::invalid_argument("panel axis: extent must be >= 32");
    double w = (2.0 * pi / std::abs(wave)) / ppp;

    PanelAxis ax;
    ax.wave = wave;
    for (double e = split; e > -(extent + w); e -= w) ax.edges.push_back(e);
    for (double e = split + w; e < extent + w; e += w) ax.edges.push_back(e);
    for (const auto& b : breaks) {
        if (std::abs(b.pos) >= extent) continue;
        ax.edges.push_back(b.pos);
        if (b.share < refine_share) continue;
        double hmin = 0.5 * w;
        for (double h = 0.5 * w; h > 3e-6 * w; h *= 0.5) {
            ax.edges.push_back(b.pos - h);
            ax.edges.push_back(b.pos + h);
            hmin = h;
        }
        ax.spike_residual += 0.08 * b.weight * hmin;
    }
    std::sort(ax.edges.begin(), ax.edges.end());
    ax.edges.erase(std::unique(ax.edges.begin(), ax.edges.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                   ax.edges.end());

    for (size_t i = 0; i + 1 < ax.edges.size(); ++i) {
        double lo = ax.edges[i], hi = ax.edges[i + 1];
        ax.key.push_back(std::max(std::abs(lo), std::abs(hi)));
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int t = 3; t >= 0; --t) ax.nodes.push_back(mid - half * gl8_x[t]);
        for (int t = 0; t < 4; ++t) ax.nodes.push_back(mid + half * gl8_x[t]);
        for (int t = 3; t >= 0; --t) ax.nw.push_back(half * gl8_w[t]);
        for (int t = 0; t < 4; ++t) ax.nw.push_back(half * gl8_w[t]);
    }
    for (double x : ax.nodes) ax.phase.push_back(complex(std::cos(wave * x), -std::sin(wave * x)));
    ax.order.resize(ax.key.size());
    for (size_t i = 0; i < ax.order.size(); ++i) ax.order[i] = static_cast<int>(i);
    std::stable_sort(ax.order.begin(), ax.order.end(),
                     [&](int a, int b) { return ax.key[static_cast<size_t>(a)] <
                                                ax.key[static_cast<size_t>(b)]; });
    return ax;
}

struct OuterIntegral {
    complex value{0.0, 0.0};
    double error = 0.0;
    double radius = 0.0;
    bool converged = false;
    std::vector<std::pair<double, complex>> trace;
};

// Truncation sweep of  ∫ f(x) e^{-i wave x} dx  with f supplied pointwise as
// (value, error). The tail control is the single-stretch bound past the locus
// region, (16/|wave|) * measured envelope at the boundary.
template <typename Func>
OuterIntegral outer_oscillatory(Func&& f, const PanelAxis& ax, double tol) {
    OuterIntegral out;
    complex acc{0.0, 0.0};
    double err_int = 0.0;
    size_t done = 0;
    double target = 16.0;
    double extent = ax.key.empty() ? 0.0 : ax.key[static_cast<size_t>(ax.order.back())];
    while (true) {
        double env = 0.0, radius = out.radius;
        while (done < ax.order.size() &&
               ax.key[static_cast<size_t>(ax.order[done])] <= target * (1.0 + 1e-12)) {
            int p = ax.order[done++];
            double pmax = 0.0;
            for (int t = 0; t < 8; ++t) {
                size_t n = static_cast<size_t>(8 * p + t);
                auto [val, err] = f(ax.nodes[n]);
                acc += ax.nw[n] * val * ax.phase[n];
                err_int += ax.nw[n] * err;
                pmax = std::max(pmax, std::abs(val));
            }
            radius = std::max(radius, ax.key[static_cast<size_t>(p)]);
            // envelope over the outermost two panel widths
            if (ax.key[static_cast<size_t>(p)] >= radius - 1e-9) env = std::max(env, pmax);
        }
        out.radius = radius;
        out.trace.emplace_back(radius, acc);
        out.value = acc;
        double tail = (16.0 / std::abs(ax.wave)) * env;
        if (out.trace.size() >= 2) {
            double diff =
                std::abs(out.trace.back().second - out.trace[out.trace.size() - 2].second);
            out.error = diff + tail + err_int + ax.spike_residual;
            if (diff < 0.5 * tol && tail < 0.5 * tol) {
                out.converged = true;
                break;
            }
        } else {
            out.error = tail + err_int + ax.spike_residual;
        }
        if (done >= ax.order.size() || target >= extent) break;
        target *= 2.0;
    }
    return out;
}

}  // namespace detail

// Single partial transform F(k1, .) (or its analog along another axis),
// evaluable pointwise with error estimates.
struct PartialTransform2D {
    KernelFunction kernel;
    int axis = 0;
    double wave = 0.0;
    IteratedConfig cfg;
    NormalityCertificate certificate;
    std::vector<detail::LineSource> sources;

    TransformResult operator()(double y) const {
        if (cfg.use_closed_form_inner)
            return detail::closed_line_transform(sources, wave, y, 0.0);
        auto rem = detail::remaining_axes(axis, kernel.dimension);
        return fourier_integral_1d(fiber(kernel, {{rem[0], y}}), wave, cfg.quad);
    }
};

inline PartialTransform2D partial_transform_2d(const KernelFunction& k, double k1,
                                               const IteratedConfig& cfg = {}, int axis = 0) {
    if (k1 == 0.0) throw std::invalid_argument("partial_transform_2d: k1 must be nonzero");
    if (k.dimension != 2)
        throw std::invalid_argument("partial_transform_2d: kernel must be two-dimensional");
    PartialTransform2D pt;
    pt.kernel = k;
    pt.axis = axis;
    pt.wave = k1;
    pt.cfg = cfg;
    pt.certificate = cfg.certificate ? *cfg.certificate : certify(k, 2, cfg.probe);
    if (pt.certificate.kind == CertKind::not_certified)
        throw std::domain_error("partial_transform_2d: kernel failed level-2 certification");
    pt.sources = detail::collapse_sources(k, axis, k1);
    return pt;
}

inline MooreOsgoodDiagnostics moore_osgood_monitor(
    const std::vector<std::vector<complex>>& table, const std::vector<double>& m_values,
    const std::vector<double>& n_values) {
    if (m_values.size() < 4 || n_values.size() < 4)
        throw std::invalid_argument("moore_osgood_monitor: need at least 4 values per axis");
    if (table.size() != m_values.size())
        throw std::invalid_argument("moore_osgood_monitor: degenerate table");
    for (const auto& row : table)
        if (row.size() != n_values.size())
            throw std::invalid_argument("moore_osgood_monitor: degenerate table");

    MooreOsgoodDiagnostics diag;
    diag.present = true;
    diag.m_values = m_values;
    diag.n_values = n_values;
    diag.table = table;

    double scale = 0.0;
    for (const auto& row : table)
        for (const auto& v : row) scale = std::max(scale, std::abs(v));

    bool moving = false;
    for (const auto& row : table)
        for (size_t j = 0; j + 1 < row.size(); ++j)
            if (std::abs(row[j + 1] - row[j]) > 1e-12 * std::max(1.0, scale)) moving = true;
    if (!moving) {
        diag.already_converged = true;
        diag.pass = true;
        return diag;
    }

    // consecutive-step fits: a c/n tail gives steps c(1/n_j - 1/n_{j+1}),
    // slope exactly 1 on a doubling grid
    for (const auto& row : table) {
        std::vector<double> lx, ly;
        for (size_t j = 0; j + 1 < row.size(); ++j) {
            double d = std::abs(row[j + 1] - row[j]);
            if (d > 0.0) {
                lx.push_back(std::log(n_values[j]));
                ly.push_back(std::log(d));
            }
        }
        if (lx.size() < 2) continue;
        auto [intercept, slope] = fit_line(lx, ly);
        diag.tail_slopes.push_back(-slope);
        diag.tail_constants.push_back(std::exp(intercept));
    }
    if (diag.tail_slopes.empty()) {
        diag.already_converged = true;
        diag.pass = true;
        return diag;
    }
    double cmin = diag.tail_constants.front(), cmax = cmin;
    for (double c : diag.tail_constants) {
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    diag.uniformity_spread = cmax / cmin;
    diag.pass = diag.uniformity_spread <= 3.0;
    for (double s : diag.tail_slopes)
        if (s < 0.8 || s > 1.2) diag.pass = false;
    return diag;
}

namespace detail {

// Raw symmetric truncations s_{m,n} of the double integral, by prefix sums of
// a panel tensor whose edges land exactly on the probe radii.
inline MooreOsgoodDiagnostics probe_table_2d(const KernelFunction& k, double k1, double k2,
                                             int ppp) {
    double P1 = 2.0 * pi / std::abs(k1), P2 = 2.0 * pi / std::abs(k2);
    // both truncation radii sit at quarter periods: at whole or half periods
    // sin(k R) vanishes and kills the leading boundary term, leaving the
    // next-order 1/R^2 tail in the table diffs instead of the 1/R one. The
    // strips stay much narrower than the smallest radius so the 1/n regime
    // holds across every row.
    std::vector<int> ncount = {(33 * ppp) / 4, (65 * ppp) / 4, (129 * ppp) / 4,
                               (257 * ppp) / 4};  // panels per side
    std::vector<int> mcount = {ppp / 4, (3 * ppp) / 4, (5 * ppp) / 4, (7 * ppp) / 4};
    double w1 = P1 / ppp, w2 = P2 / ppp;

    int nx = ncount.back(), ny = mcount.back();
    // per-side panel integrals: column pass over x for each y node
    std::vector<std::vector<complex>> panel(static_cast<size_t>(2 * ny),
                                            std::vector<complex>(static_cast<size_t>(2 * nx)));
    Point p;
    p.dim = 2;
    for (int qy = 0; qy < 2 * ny; ++qy) {
        int sy = qy < ny ? 1 : -1;
        int iy = qy < ny ? qy : qy - ny;
        double ylo = sy > 0 ? iy * w2 : -(iy + 1) * w2;
        double ymid = ylo + 0.5 * w2, yhalf = 0.5 * w2;
        for (int ty = 0; ty < 8; ++ty) {
            double sgn = ty < 4 ? -1.0 : 1.0;
            double gx = gl8_x[ty < 4 ? 3 - ty : ty - 4];
            double ynode = ymid + sgn * yhalf * gx;
            double wy = yhalf * gl8_w[ty < 4 ? 3 - ty : ty - 4];
            complex phy = wy * complex(std::cos(k2 * ynode), -std::sin(k2 * ynode));
            p[1] = ynode;
            for (int qx = 0; qx < 2 * nx; ++qx) {
                int sx = qx < nx ? 1 : -1;
                int ix = qx < nx ? qx : qx - nx;
                double xlo = sx > 0 ? ix * w1 : -(ix + 1) * w1;
                double xmid = xlo + 0.5 * w1, xhalf = 0.5 * w1;
                complex cell{0.0, 0.0};
                for (int tx = 0; tx < 8; ++tx) {
                    double sgx = tx < 4 ? -1.0 : 1.0;
                    double gxx = gl8_x[tx < 4 ? 3 - tx : tx - 4];
                    double xnode = xmid + sgx * xhalf * gxx;
                    double wx = xhalf * gl8_w[tx < 4 ? 3 - tx : tx - 4];
                    p[0] = xnode;
                    cell += wx * eval(k, p) *
                            complex(std::cos(k1 * xnode), -std::sin(k1 * xnode));
                }
                panel[static_cast<size_t>(qy)][static_cast<size_t>(qx)] += phy * cell;
            }
        }
    }

    MooreOsgoodDiagnostics diag;
    std::vector<std::vector<complex>> table;
    for (int mc : mcount) {
        std::vector<complex> row;
        for (int nc : ncount) {
            complex s{0.0, 0.0};
            for (int qy = 0; qy < 2 * ny; ++qy) {
                int iy = qy < ny ? qy : qy - ny;
                if (iy >= mc) continue;
                for (int qx = 0; qx < 2 * nx; ++qx) {
                    int ix = qx < nx ? qx : qx - nx;
                    if (ix >= nc) continue;
                    s += panel[static_cast<size_t>(qy)][static_cast<size_t>(qx)];
                }
            }
            row.push_back(s);
        }
        table.push_back(std::move(row));
    }
    std::vector<double> m_values, n_values;
    for (int mc : mcount) m_values.push_back(mc * w2);
    for (int nc : ncount) n_values.push_back(nc * w1);
    return moore_osgood_monitor(table, m_values, n_values);
}

}  // namespace detail

inline IteratedTransformReport full_transform_2d(const KernelFunction& k, double k1, double k2,
                                                 IteratedConfig cfg = {}) {
    if (k1 == 0.0 || k2 == 0.0)
        throw std::invalid_argument("full_transform_2d: wave components must be nonzero");
    if (!cfg.certificate) cfg.certificate = certify(k, 2, cfg.probe);
    if (cfg.certificate->kind == CertKind::not_certified)
        throw std::domain_error("full_transform_2d: kernel failed level-2 certification");

    auto Fx = partial_transform_2d(k, k1, cfg, 0);
    auto Gy = partial_transform_2d(k, k2, cfg, 1);

    IteratedTransformReport rep;
    rep.wavevector = {k1, k2};

    auto run_outer = [&](const PartialTransform2D& inner, double outer_wave) {
        double reach = 1.0;
        for (const auto& s : inner.sources)
            reach = std::max(reach, std::hypot(s.u, s.v));
        // the partial decays like exp(-|wave| distance-to-sources): 24
        // e-foldings past the farthest source is far below the outer tolerance
        double extent =
            std::min(cfg.outer_max_radius, std::max(33.0, reach + 24.0 / std::abs(inner.wave)));
        // every plane is a full-strength log spike for the 1d outer integral:
        // refine all of them, however small their share
        auto axis = detail::build_axis(outer_wave, cfg.outer_panels_per_period, extent,
                                       detail::source_planes(inner.sources, false), 0.0, 0.0);
        return detail::outer_oscillatory(
            [&](double y) {
                auto r = inner(y);
                return std::pair<complex, double>(r.value, r.error_estimate);
            },
            axis, cfg.outer_tol);
    };

    auto oxy = run_outer(Fx, k2);
    auto oyx = run_outer(Gy, k1);
    rep.values["xy"] = oxy.value;
    rep.values["yx"] = oyx.value;
    rep.per_ordering_error["xy"] = oxy.error;
    rep.per_ordering_error["yx"] = oyx.error;
    rep.traces["xy"] = oxy.trace;
    rep.traces["yx"] = oyx.trace;
    rep.converged = oxy.converged && oyx.converged;
    rep.max_pairwise_deviation = std::abs(oxy.value - oyx.value);
    rep.pass = rep.max_pairwise_deviation <= rep.error_allowance();

    if (cfg.probe_table && !k.is_coulomb())
        rep.moore_osgood = detail::probe_table_2d(k, k1, k2, cfg.outer_panels_per_period);
    return rep;
}

// Evaluable 3D partial transforms: singles A, B, C (one axis transformed) and
// doubles F, G, H (two axes), with decay certificates attached.
struct Partials3D {
    KernelFunction kernel;
    std::array<double, 3> waves{0.0, 0.0, 0.0};
    IteratedConfig cfg;
    NormalityCertificate certificate;
    std::array<std::vector<detail::LineSource>, 3> sources;  // per transformed axis
    std::map<std::string, DecayCertificate> decay;

    TransformResult single(int axis, double u, double v) const {
        if (waves[static_cast<size_t>(axis)] == 0.0)
            throw std::invalid_argument("partial transform: wave component must be nonzero");
        if (cfg.use_closed_form_inner)
            return detail::closed_line_transform(sources[static_cast<size_t>(axis)],
                                                 waves[static_cast<size_t>(axis)], u, v);
        auto rem = detail::remaining_axes(axis, 3);
        return fourier_integral_1d(fiber(kernel, {{rem[0], u}, {rem[1], v}}),
                                   waves[static_cast<size_t>(axis)], cfg.quad);
    }
    TransformResult A(double y, double z) const { return single(0, y, z); }
    TransformResult B(double x, double z) const { return single(1, x, z); }
    TransformResult C(double x, double y) const { return single(2, x, y); }

    // second transform: integrate the cached single over one remaining axis
    TransformResult pair_transform(int axis, bool second_of_pair, double fixed) const {
        const auto& src = sources[static_cast<size_t>(axis)];
        auto rem = detail::remaining_axes(axis, 3);
        int outer_axis = second_of_pair ? rem[1] : rem[0];
        double outer_wave = waves[static_cast<size_t>(outer_axis)];
        if (outer_wave == 0.0)
            throw std::invalid_argument("partial transform: wave component must be nonzero");
        double reach = 1.0;
        for (const auto& s : src) reach = std::max(reach, std::hypot(s.u, s.v));
        double extent = std::min(cfg.outer_max_radius,
                                 std::max(33.0, reach + 24.0 / std::abs(
                                                          waves[static_cast<size_t>(axis)])));
        auto ax = detail::build_axis(outer_wave, cfg.outer_panels_per_period, extent,
                                     detail::source_planes(src, second_of_pair));
        auto out = detail::outer_oscillatory(
            [&](double t) {
                auto r = second_of_pair ? single(axis, fixed, t) : single(axis, t, fixed);
                return std::pair<complex, double>(r.value, r.error_estimate);
            },
            ax, cfg.outer_tol);
        TransformResult res;
        res.value = out.value;
        res.error_estimate = out.error;
        res.truncation_radius = out.radius;
        res.converged = out.converged;
        res.trace = out.trace;
        return res;
    }
    TransformResult F(double z) const { return pair_transform(0, false, z); }  // x then y
    TransformResult G(double y) const { return pair_transform(0, true, y); }   // x then z
    TransformResult H(double x) const { return pair_transform(1, true, x); }   // y then z
};

inline Partials3D partial_transforms_3d(const KernelFunction& k, std::array<double, 3> waves,
                                        const IteratedConfig& cfg = {}) {
    if (k.dimension != 3)
        throw std::invalid_argument("partial_transforms_3d: kernel must be three-dimensional");
    Partials3D pt;
    pt.kernel = k;
    pt.waves = waves;
    pt.cfg = cfg;
    pt.certificate = cfg.certificate ? *cfg.certificate : certify(k, 3, cfg.probe);
    if (pt.certificate.kind == CertKind::not_certified)
        throw std::domain_error("partial_transforms_3d: kernel failed level-3 certification");
    for (int axis = 0; axis < 3; ++axis)
        if (waves[static_cast<size_t>(axis)] != 0.0)
            pt.sources[static_cast<size_t>(axis)] =
                detail::collapse_sources(k, axis, waves[static_cast<size_t>(axis)]);

    const std::vector<double> radii = {8, 12, 16, 24, 32, 48, 64};
    const char* single_names[3] = {"A", "B", "C"};
    for (int axis = 0; axis < 3; ++axis) {
        if (waves[static_cast<size_t>(axis)] == 0.0) continue;
        std::vector<DecaySample> samples;
        for (double r : radii) {
            double worst = 0.0;
            for (int d = 0; d < 8; ++d) {
                double th = 0.19 + d * pi / 4.0;
                worst = std::max(
                    worst, std::abs(pt.single(axis, r * std::cos(th), r * std::sin(th)).value));
            }
            samples.push_back({r, worst});
        }
        pt.decay[single_names[axis]] = decay_fit(samples, 3);
    }
    auto fit_double = [&](const char* name, auto&& fn) {
        std::vector<DecaySample> samples;
        for (double r : radii)
            samples.push_back({r, std::max(std::abs(fn(r).value), std::abs(fn(-r).value))});
        pt.decay[name] = decay_fit(samples, 2);
    };
    if (waves[0] != 0.0 && waves[1] != 0.0)
        fit_double("F", [&](double z) { return pt.F(z); });
    if (waves[0] != 0.0 && waves[2] != 0.0)
        fit_double("G", [&](double y) { return pt.G(y); });
    if (waves[1] != 0.0 && waves[2] != 0.0)
        fit_double("H", [&](double x) { return pt.H(x); });
    return pt;
}

namespace detail {

// Cached single on a two-axis panel grid, with pointwise errors and prefix
// machinery for joint and iterated outer integrations.
struct TransformTensor {
    PanelAxis au, av;
    std::vector<complex> val;  // node-major: iu * nv + iv
    std::vector<double> err;
    double inner_rep_error = 0.0;

    size_t nu() const { return au.nodes.size(); }
    size_t nv() const { return av.nodes.size(); }
    complex at(size_t iu, size_t iv) const { return val[iu * nv() + iv]; }
    double err_at(size_t iu, size_t iv) const { return err[iu * nv() + iv]; }
};

inline TransformTensor build_tensor(const Partials3D& pt, int axis, double extent_u,
                                    double extent_v) {
    const auto& src = pt.sources[static_cast<size_t>(axis)];
    auto rem = remaining_axes(axis, 3);
    TransformTensor tz;
    tz.au = build_axis(pt.waves[static_cast<size_t>(rem[0])], pt.cfg.outer_panels_per_period,
                       extent_u, source_planes(src, false));
    tz.av = build_axis(pt.waves[static_cast<size_t>(rem[1])], pt.cfg.outer_panels_per_period,
                       extent_v, source_planes(src, true));
    tz.val.resize(tz.nu() * tz.nv());
    tz.err.resize(tz.nu() * tz.nv());
    for (size_t iu = 0; iu < tz.nu(); ++iu)
        for (size_t iv = 0; iv < tz.nv(); ++iv) {
            auto r = closed_line_transform(src, pt.waves[static_cast<size_t>(axis)],
                                           tz.au.nodes[iu], tz.av.nodes[iv]);
            tz.val[iu * tz.nv() + iv] = r.value;
            tz.err[iu * tz.nv() + iv] = r.error_estimate;
        }
    return tz;
}

struct OrderingValue {
    complex value{0.0, 0.0};
    double error = 0.0;
    bool converged = false;
    std::vector<std::pair<double, complex>> trace;
};

// joint double limit over expanding squares [-R, R]^2
inline OrderingValue joint_double(const TransformTensor& t, double tol,
                                  std::vector<std::vector<complex>>* rect_prefix = nullptr) {
    size_t pu = static_cast<size_t>(t.au.panels()), pv = static_cast<size_t>(t.av.panels());
    std::vector<complex> panel_sum(pu * pv);
    std::vector<double> panel_err(pu * pv);
    for (size_t p = 0; p < pu; ++p)
        for (size_t q = 0; q < pv; ++q) {
            complex s{0.0, 0.0};
            double e = 0.0;
            for (int a = 0; a < 8; ++a)
                for (int b = 0; b < 8; ++b) {
                    size_t iu = 8 * p + static_cast<size_t>(a),
                           iv = 8 * q + static_cast<size_t>(b);
                    complex wgt = t.au.nw[iu] * t.av.nw[iv] * t.au.phase[iu] * t.av.phase[iv];
                    s += wgt * t.at(iu, iv);
                    e += t.au.nw[iu] * t.av.nw[iv] * t.err_at(iu, iv);
                }
            panel_sum[p * pv + q] = s;
            panel_err[p * pv + q] = e;
        }
    if (rect_prefix) {
        // cumulative over panels in axis order, for rectangle truncations
        auto& pref = *rect_prefix;
        pref.assign(pu + 1, std::vector<complex>(pv + 1, complex{0.0, 0.0}));
        for (size_t a = 0; a < pu; ++a)
            for (size_t b = 0; b < pv; ++b) {
                size_t p = static_cast<size_t>(t.au.order[a]),
                       q = static_cast<size_t>(t.av.order[b]);
                pref[a + 1][b + 1] = pref[a][b + 1] + pref[a + 1][b] - pref[a][b] +
                                     panel_sum[p * pv + q];
            }
    }

    OrderingValue out;
    double err_int = t.au.spike_residual + t.av.spike_residual;
    for (double e : panel_err) err_int += e;
    complex acc{0.0, 0.0};
    auto& trace = out.trace;
    size_t iu = 0, iv = 0;
    double target = 16.0, radius = 0.0;
    // sup of the cached single along the outermost accumulated panel of one axis
    auto env_at = [&](const PanelAxis& ax, size_t upto, bool u_axis) {
        double env = 0.0;
        if (upto == 0) return env;
        size_t p = static_cast<size_t>(ax.order[upto - 1]);
        for (int a = 0; a < 8; ++a) {
            size_t i = 8 * p + static_cast<size_t>(a);
            for (size_t j = 0; j < (u_axis ? t.nv() : t.nu()); ++j)
                env = std::max(env, std::abs(u_axis ? t.at(i, j) : t.at(j, i)));
        }
        return env;
    };
    while (true) {
        size_t pu_new = iu, pv_new = iv;
        while (pu_new < pu &&
               t.au.key[static_cast<size_t>(t.au.order[pu_new])] <= target * (1.0 + 1e-12))
            pu_new++;
        while (pv_new < pv &&
               t.av.key[static_cast<size_t>(t.av.order[pv_new])] <= target * (1.0 + 1e-12))
            pv_new++;
        // grow the accumulated rectangle of panels: new block = fresh u rows
        // against all accumulated v, plus fresh v columns against old u
        for (size_t a = iu; a < pu_new; ++a)
            for (size_t b = 0; b < pv_new; ++b)
                acc += panel_sum[static_cast<size_t>(t.au.order[a]) * pv +
                                 static_cast<size_t>(t.av.order[b])];
        for (size_t b = iv; b < pv_new; ++b)
            for (size_t a = 0; a < iu; ++a)
                acc += panel_sum[static_cast<size_t>(t.au.order[a]) * pv +
                                 static_cast<size_t>(t.av.order[b])];
        iu = pu_new;
        iv = pv_new;
        radius = 0.0;
        if (iu > 0) radius = std::max(radius, t.au.key[static_cast<size_t>(t.au.order[iu - 1])]);
        if (iv > 0) radius = std::max(radius, t.av.key[static_cast<size_t>(t.av.order[iv - 1])]);
        trace.emplace_back(radius, acc);
        double envu = env_at(t.au, iu, true), envv = env_at(t.av, iv, false);
        double tail = (16.0 / std::abs(t.au.wave)) * envu + (16.0 / std::abs(t.av.wave)) * envv;
        out.value = acc;
        if (trace.size() >= 2) {
            double diff = std::abs(trace.back().second - trace[trace.size() - 2].second);
            out.error = diff + tail + err_int;
            if (diff < 0.5 * tol && tail < 0.5 * tol) {
                out.converged = true;
                break;
            }
        } else {
            out.error = tail + err_int;
        }
        if (iu >= pu && iv >= pv) break;
        target *= 2.0;
    }
    return out;
}

// iterated: line integrals along u at each v node, then the outer v sweep
inline OrderingValue iterated_double(const TransformTensor& t, bool u_first, double tol) {
    const PanelAxis& inner = u_first ? t.au : t.av;
    const PanelAxis& outer = u_first ? t.av : t.au;
    size_t ni = inner.nodes.size(), no = outer.nodes.size();
    std::vector<complex> line(no, complex{0.0, 0.0});
    std::vector<double> line_err(no, 0.0);
    double inner_edge = inner.key[static_cast<size_t>(inner.order.back())];
    for (size_t j = 0; j < no; ++j) {
        complex s{0.0, 0.0};
        double e = 0.0, env = 0.0;
        for (size_t i = 0; i < ni; ++i) {
            complex v = u_first ? t.at(i, j) : t.at(j, i);
            s += inner.nw[i] * inner.phase[i] * v;
            e += inner.nw[i] * (u_first ? t.err_at(i, j) : t.err_at(j, i));
            if (inner.key[i / 8] >= inner_edge - 1e-9) env = std::max(env, std::abs(v));
        }
        line[j] = s;
        line_err[j] = e + (16.0 / std::abs(inner.wave)) * env;
    }
    OrderingValue res;
    complex acc{0.0, 0.0};
    double err_int = inner.spike_residual + outer.spike_residual;
    auto& trace = res.trace;
    size_t done = 0;
    double target = 16.0, radius = 0.0;
    double extent = outer.key[static_cast<size_t>(outer.order.back())];
    while (true) {
        double env = 0.0;
        while (done < outer.order.size() &&
               outer.key[static_cast<size_t>(outer.order[done])] <= target * (1.0 + 1e-12)) {
            size_t p = static_cast<size_t>(outer.order[done++]);
            for (int a = 0; a < 8; ++a) {
                size_t j = 8 * p + static_cast<size_t>(a);
                acc += outer.nw[j] * outer.phase[j] * line[j];
                err_int += outer.nw[j] * line_err[j];
                env = std::max(env, std::abs(line[j]));
            }
            radius = std::max(radius, outer.key[p]);
        }
        trace.emplace_back(radius, acc);
        double tail = (16.0 / std::abs(outer.wave)) * env;
        res.value = acc;
        if (trace.size() >= 2) {
            double diff = std::abs(trace.back().second - trace[trace.size() - 2].second);
            res.error = diff + tail + err_int;
            if (diff < 0.5 * tol && tail < 0.5 * tol) {
                res.converged = true;
                break;
            }
        } else {
            res.error = tail + err_int;
        }
        if (done >= outer.order.size() || target >= extent) break;
        target *= 2.0;
    }
    return res;
}

// least-squares fit of measured rectangle-truncation errors against the
// printed tail shape A/s + B/t + C/|(s,t)|
inline void fit_truncation_shape(MooreOsgoodDiagnostics& diag,
                                 const std::vector<double>& s_values,
                                 const std::vector<double>& t_values,
                                 const std::vector<std::vector<double>>& measured) {
    double M[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double rhs[3] = {0, 0, 0};
    for (size_t i = 0; i < s_values.size(); ++i)
        for (size_t j = 0; j < t_values.size(); ++j) {
            double basis[3] = {1.0 / s_values[i], 1.0 / t_values[j],
                               1.0 / std::hypot(s_values[i], t_values[j])};
            for (int a = 0; a < 3; ++a) {
                rhs[a] += basis[a] * measured[i][j];
                for (int b = 0; b < 3; ++b) M[a][b] += basis[a] * basis[b];
            }
        }
    // solve the 3x3 normal equations by elimination
    double A[3][4];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) A[a][b] = M[a][b];
        A[a][3] = rhs[a];
    }
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        for (int b = 0; b < 4; ++b) std::swap(A[c][b], A[piv][b]);
        if (std::abs(A[c][c]) < 1e-300) continue;
        for (int r = 0; r < 3; ++r) {
            if (r == c) continue;
            double f = A[r][c] / A[c][c];
            for (int b = 0; b < 4; ++b) A[r][b] -= f * A[c][b];
        }
    }
    double coef[3];
    for (int a = 0; a < 3; ++a)
        coef[a] = std::abs(A[a][a]) < 1e-300 ? 0.0 : std::max(0.0, A[a][3] / A[a][a]);
    diag.shape_A = coef[0];
    diag.shape_B = coef[1];
    diag.shape_C = coef[2];
    diag.shape_max_ratio = 0.0;
    for (size_t i = 0; i < s_values.size(); ++i)
        for (size_t j = 0; j < t_values.size(); ++j) {
            double fitted = coef[0] / s_values[i] + coef[1] / t_values[j] +
                            coef[2] / std::hypot(s_values[i], t_values[j]);
            if (fitted <= 0.0) fitted = 1e-300;
            diag.shape_max_ratio = std::max(diag.shape_max_ratio, measured[i][j] / fitted);
        }
    diag.present = true;
    diag.pass = diag.shape_max_ratio <= 1.5;
}

}  // namespace detail

inline IteratedTransformReport full_transform_3d(const KernelFunction& k, double k1, double k2,
                                                 double k3, IteratedConfig cfg = {}) {
    if (k1 == 0.0 || k2 == 0.0 || k3 == 0.0)
        throw std::invalid_argument("full_transform_3d: wave components must be nonzero");
    if (!cfg.certificate) cfg.certificate = certify(k, 3, cfg.probe);
    if (cfg.certificate->kind == CertKind::not_certified)
        throw std::domain_error("full_transform_3d: kernel failed level-3 certification");

    auto pt = partial_transforms_3d(k, {k1, k2, k3}, cfg);

    IteratedTransformReport rep;
    rep.wavevector = {k1, k2, k3};

    double reach = 1.0;
    for (int a = 0; a < 3; ++a)
        for (const auto& s : pt.sources[static_cast<size_t>(a)])
            reach = std::max(reach, std::hypot(s.u, s.v));
    auto extent_for = [&](double inner_wave, bool probed) {
        double e = std::min(cfg.outer_max_radius,
                            std::max(33.0, reach + 24.0 / std::abs(inner_wave)));
        return probed ? std::max(e, 67.0) : e;
    };

    // tensor over (y, z) serves orderings A (joint), F (y then z), G (z then y);
    // the rectangle-truncation probe needs its grid to reach past radius 64
    double ea = extent_for(k1, cfg.probe_table);
    auto ta = detail::build_tensor(pt, 0, ea, ea);
    std::vector<std::vector<complex>> prefix;
    auto A = detail::joint_double(ta, cfg.outer_tol, cfg.probe_table ? &prefix : nullptr);
    auto Fv = detail::iterated_double(ta, true, cfg.outer_tol);
    auto Gv = detail::iterated_double(ta, false, cfg.outer_tol);

    auto tb = detail::build_tensor(pt, 1, extent_for(k2, false), extent_for(k2, false));
    auto B = detail::joint_double(tb, cfg.outer_tol);
    auto Hv = detail::iterated_double(tb, false, cfg.outer_tol);  // z first, then x

    auto tc = detail::build_tensor(pt, 2, extent_for(k3, false), extent_for(k3, false));
    auto C = detail::joint_double(tc, cfg.outer_tol);

    auto put = [&](const char* label, const detail::OrderingValue& v) {
        rep.values[label] = v.value;
        rep.per_ordering_error[label] = v.error;
        rep.traces[label] = v.trace;
        rep.converged = rep.converged && v.converged;
    };
    put("A", A);
    put("B", B);
    put("C", C);
    put("F", Fv);
    put("G", Gv);
    put("H", Hv);

    for (auto i = rep.values.begin(); i != rep.values.end(); ++i)
        for (auto j = std::next(i); j != rep.values.end(); ++j)
            rep.max_pairwise_deviation =
                std::max(rep.max_pairwise_deviation, std::abs(i->second - j->second));
    rep.pass = rep.max_pairwise_deviation <= rep.error_allowance();

    if (cfg.probe_table) {
        // rectangle truncations of the A ordering at radii nearest {16, 32, 64}
        std::vector<double> s_values, t_values;
        std::vector<size_t> s_idx, t_idx;
        auto pick = [](const detail::PanelAxis& ax, double want, double& val, size_t& idx) {
            double best = 1e300;
            for (size_t a = 0; a < ax.order.size(); ++a) {
                double key = ax.key[static_cast<size_t>(ax.order[a])];
                if (std::abs(key - want) < best) {
                    best = std::abs(key - want);
                    val = key;
                    idx = a + 1;
                }
            }
        };
        std::vector<std::vector<double>> measured;
        complex full = prefix.back().back();
        for (double want : {16.0, 32.0, 64.0}) {
            double sv = 0.0, tv = 0.0;
            size_t si = 0, ti = 0;
            pick(ta.au, want, sv, si);
            pick(ta.av, want, tv, ti);
            s_values.push_back(sv);
            t_values.push_back(tv);
            s_idx.push_back(si);
            t_idx.push_back(ti);
        }
        for (size_t i = 0; i < s_idx.size(); ++i) {
            std::vector<double> row;
            for (size_t j = 0; j < t_idx.size(); ++j)
                row.push_back(std::abs(full - prefix[s_idx[i]][t_idx[j]]));
            measured.push_back(std::move(row));
        }
        detail::fit_truncation_shape(rep.moore_osgood, s_values, t_values, measured);
        rep.moore_osgood.m_values = s_values;
        rep.moore_osgood.n_values = t_values;
    }
    return rep;
}

}  // namespace slowft
