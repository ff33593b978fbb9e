#pragma once

// Brute-force Fourier transform oracle: direct tensor-product quadrature of
// e^{-ik.x} f(x) over a sequence of expanding boxes, followed by Richardson
// extrapolation of the box values in 1/R.  Deliberately self-contained: the
// quadrature rules below are tabulated locally and nothing here touches the
// oscillatory transform machinery, so oracle values stay meaningful as an
// independent cross-check of that path.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <slowft/common.hpp>
#include <slowft/kernels.hpp>

namespace slowft {

enum class OracleMethod { expanding_box_richardson, closed_form_fiber, finite_difference };

inline std::string to_string(OracleMethod m) {
    switch (m) {
        case OracleMethod::expanding_box_richardson: return "expanding_box_richardson";
        case OracleMethod::closed_form_fiber: return "closed_form_fiber";
        case OracleMethod::finite_difference: return "finite_difference";
    }
    return "unknown";
}

struct OracleValue {
    std::string quantity;
    complex value{0.0, 0.0};
    OracleMethod method = OracleMethod::expanding_box_richardson;
    double estimated_accuracy = 0.0;  // |difference of the last two extrapolants|
};

namespace oracle_detail {

// Gauss-Legendre half-rules (symmetric nodes on (0,1), weights for [-1,1]).
inline constexpr double g10x[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                   0.8650633666889845, 0.9739065285171717};
inline constexpr double g10w[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                   0.1494513491505806, 0.0666713443086881};
inline constexpr double g16x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                   0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                   0.9445750230732326, 0.9894009349916499};
inline constexpr double g16w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                   0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                   0.0622535239386479, 0.0271524594117541};

struct BoxAxis {
    std::vector<double> t;     // node positions
    std::vector<double> gw;    // half-width * Gauss weight per node
    double lo = 0.0, hi = 0.0;
};

inline void add_panel(BoxAxis& ax, double lo, double hi, int rule) {
    double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
    const double* gx = rule == 16 ? g16x : g10x;
    const double* gwv = rule == 16 ? g16w : g10w;
    int half = rule / 2;
    for (int s = -1; s <= 1; s += 2)
        for (int i = 0; i < half; ++i) {
            ax.t.push_back(mid + s * hw * gx[i]);
            ax.gw.push_back(hw * gwv[i]);
        }
}

// One axis of a box: a near block [nlo, nhi] in roughly near_h-wide GL10
// panels (optionally graded dyadically toward gc), then GL16 panels of two
// full periods of this axis's wave walked outward until the half-extent
// reaches R.  The panel count depends only on R and the block width, never on
// where the block sits, so equal |wave| axes get equal extents and the box
// boundary phase repeats exactly from one box to the next.
inline BoxAxis build_axis(double R, double wave, double nlo, double nhi, double near_h, double gc,
                          int grade_levels) {
    std::vector<double> edges;
    int nn = std::max(1, static_cast<int>(std::ceil((nhi - nlo) / near_h - 1e-9)));
    for (int i = 0; i <= nn; ++i) edges.push_back(nlo + (nhi - nlo) * i / nn);
    for (int j = 1; j <= grade_levels; ++j) {
        double h = 0.5 * (nhi - nlo) / (1 << j);
        edges.push_back(gc - h);
        edges.push_back(gc + h);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](double a, double b) { return b - a < 1e-12; }),
                edges.end());
    BoxAxis ax;
    for (size_t p = 0; p + 1 < edges.size(); ++p) add_panel(ax, edges[p], edges[p + 1], 10);
    double wfar = 4.0 * pi / std::abs(wave);
    double half = 0.5 * (nhi - nlo);
    int m = std::max(1, static_cast<int>(std::ceil((R - half) / wfar - 1e-9)));
    double hi = nhi, lo = nlo;
    for (int i = 0; i < m; ++i) {
        add_panel(ax, hi, hi + wfar, 16);
        add_panel(ax, lo - wfar, lo, 16);
        hi += wfar;
        lo -= wfar;
    }
    ax.lo = lo;
    ax.hi = hi;
    return ax;
}

// Even integrand about c: keep the nodes above c, fold the mirror images into
// a real cosine weight.  Requires the node set to be symmetric about c, which
// build_axis guarantees when its near block is.
struct FoldedAxis {
    std::vector<double> t;
    std::vector<double> w;
};

inline FoldedAxis fold_axis(const BoxAxis& ax, double wave, double c) {
    FoldedAxis f;
    for (size_t i = 0; i < ax.t.size(); ++i)
        if (ax.t[i] > c) {
            f.t.push_back(ax.t[i]);
            f.w.push_back(2.0 * ax.gw[i] * std::cos(wave * (ax.t[i] - c)));
        }
    return f;
}

inline std::vector<complex> phase_weights(const BoxAxis& ax, double wave) {
    std::vector<complex> w(ax.t.size());
    for (size_t i = 0; i < ax.t.size(); ++i)
        w[i] = ax.gw[i] * complex(std::cos(wave * ax.t[i]), -std::sin(wave * ax.t[i]));
    return w;
}

// Hybrid potential along a row of points varying in the last axis: full point
// sums with the fixed-coordinate distance hoisted out, then the near-cell
// analytic corrections patched onto the nodes that lie inside the grid box.
// Matches detail::potential_sum value for value.
inline void potential_row(const detail::PotentialImpl& im, double x, double y,
                          const std::vector<double>& last, std::vector<double>& out,
                          std::vector<double>& dist2) {
    size_t n = im.px.size(), nr = last.size();
    bool three = im.grid.dimension == 3;
    out.assign(nr, 0.0);
    dist2.resize(n);
    for (size_t s = 0; s < n; ++s) {
        double dx = x - im.px[s];
        dist2[s] = dx * dx;
        if (three) {
            double dy = y - im.py[s];
            dist2[s] += dy * dy;
        }
    }
    const double* rc = three ? im.pz.data() : im.py.data();
    for (size_t s = 0; s < n; ++s) {
        double m = im.base.mass[s], c = rc[s], d2 = dist2[s];
        double* o = out.data();
        const double* z = last.data();
        for (size_t j = 0; j < nr; ++j) {
            double dz = z[j] - c;
            o[j] += m / std::sqrt(d2 + dz * dz);
        }
    }
    std::vector<int> near;
    for (size_t j = 0; j < nr; ++j) {
        Point p = three ? make_point(x, y, last[j]) : make_point(x, last[j]);
        detail::near_positions(im, p, near);
        for (int pos : near) {
            size_t s = static_cast<size_t>(pos);
            double dz = last[j] - rc[s];
            out[j] -= im.base.mass[s] / std::sqrt(dist2[s] + dz * dz);
            out[j] += im.base.value[s] * detail::cell_integral_inv_r(im, pos, p);
        }
    }
}

// Per-axis mirror symmetry of the nonzero cells about the coordinate origin.
inline bool density_even(const detail::PotentialImpl& im) {
    const DensityGrid& g = im.grid;
    for (int a = 0; a < g.dimension; ++a) {
        double c = g.origin[static_cast<size_t>(a)] +
                   0.5 * (g.shape[static_cast<size_t>(a)] - 1) * g.spacing[static_cast<size_t>(a)];
        if (std::abs(c) > 1e-12) return false;
    }
    for (size_t s = 0; s < im.px.size(); ++s)
        for (int a = 0; a < g.dimension; ++a) {
            int i = im.ci[s], j = im.cj[s], k = im.ck[s];
            if (a == 0) i = g.shape[0] - 1 - i;
            if (a == 1) j = g.shape[1] - 1 - j;
            if (a == 2) k = g.shape[2] - 1 - k;
            int pos = im.pos_of_flat[g.flat(i, j, k)];
            if (pos < 0 || im.base.value[static_cast<size_t>(pos)] != im.base.value[s])
                return false;
        }
    return true;
}

// Neville extrapolation of the last `depth` box values to 1/R -> 0.
inline complex extrapolate(const std::vector<double>& radii, const std::vector<complex>& vals,
                           size_t last, size_t depth) {
    std::vector<double> r(depth);
    std::vector<complex> p(depth);
    for (size_t i = 0; i < depth; ++i) {
        r[i] = 1.0 / radii[last - depth + i];
        p[i] = vals[last - depth + i];
    }
    for (size_t lvl = 1; lvl < depth; ++lvl)
        for (size_t i = 0; i + lvl < depth; ++i)
            p[i] = (r[i + lvl] * p[i] - r[i] * p[i + 1]) / (r[i + lvl] - r[i]);
    return p[0];
}

inline complex box_value_coulomb(const KernelFunction& k, const std::vector<double>& wave,
                                 const std::vector<BoxAxis>& ax) {
    const auto& c = k.coulomb().center;
    std::vector<FoldedAxis> fx;
    for (size_t a = 0; a < ax.size(); ++a)
        fx.push_back(fold_axis(ax[a], wave[a], c[a]));
    double acc = 0.0;
    if (k.dimension == 2) {
        for (size_t i = 0; i < fx[0].t.size(); ++i) {
            double ux = fx[0].t[i] - c[0];
            double racc = 0.0;
            for (size_t j = 0; j < fx[1].t.size(); ++j) {
                double uy = fx[1].t[j] - c[1];
                double r = std::sqrt(ux * ux + uy * uy);
                if (r > 1e-12) racc += fx[1].w[j] / r;
            }
            acc += fx[0].w[i] * racc;
        }
    } else {
        for (size_t i = 0; i < fx[0].t.size(); ++i) {
            double ux = fx[0].t[i] - c[0];
            for (size_t j = 0; j < fx[1].t.size(); ++j) {
                double uy = fx[1].t[j] - c[1];
                double d2 = ux * ux + uy * uy;
                double racc = 0.0;
                for (size_t l = 0; l < fx[2].t.size(); ++l) {
                    double uz = fx[2].t[l] - c[2];
                    double r = std::sqrt(d2 + uz * uz);
                    if (r > 1e-12) racc += fx[2].w[l] / r;
                }
                acc += fx[0].w[i] * fx[1].w[j] * racc;
            }
        }
    }
    double ph = 0.0;
    for (size_t a = 0; a < wave.size(); ++a) ph += wave[a] * c[a];
    return acc * complex(std::cos(ph), -std::sin(ph));
}

inline complex box_value_density(const KernelFunction& k, const std::vector<double>& wave,
                                 const std::vector<BoxAxis>& ax, bool even) {
    const auto& im = *k.density().impl;
    std::vector<double> row, dist2;
    if (even) {
        std::vector<FoldedAxis> fx;
        for (size_t a = 0; a < ax.size(); ++a) fx.push_back(fold_axis(ax[a], wave[a], 0.0));
        double acc = 0.0;
        if (k.dimension == 2) {
            for (size_t i = 0; i < fx[0].t.size(); ++i) {
                potential_row(im, fx[0].t[i], 0.0, fx[1].t, row, dist2);
                double racc = 0.0;
                for (size_t j = 0; j < fx[1].t.size(); ++j) racc += fx[1].w[j] * row[j];
                acc += fx[0].w[i] * racc;
            }
        } else {
            for (size_t i = 0; i < fx[0].t.size(); ++i)
                for (size_t j = 0; j < fx[1].t.size(); ++j) {
                    potential_row(im, fx[0].t[i], fx[1].t[j], fx[2].t, row, dist2);
                    double racc = 0.0;
                    for (size_t l = 0; l < fx[2].t.size(); ++l) racc += fx[2].w[l] * row[l];
                    acc += fx[0].w[i] * fx[1].w[j] * racc;
                }
        }
        return complex(acc, 0.0);
    }
    std::vector<std::vector<complex>> pw;
    for (size_t a = 0; a < ax.size(); ++a) pw.push_back(phase_weights(ax[a], wave[a]));
    complex acc{0.0, 0.0};
    if (k.dimension == 2) {
        for (size_t i = 0; i < ax[0].t.size(); ++i) {
            potential_row(im, ax[0].t[i], 0.0, ax[1].t, row, dist2);
            complex racc{0.0, 0.0};
            for (size_t j = 0; j < ax[1].t.size(); ++j) racc += pw[1][j] * row[j];
            acc += pw[0][i] * racc;
        }
    } else {
        for (size_t i = 0; i < ax[0].t.size(); ++i)
            for (size_t j = 0; j < ax[1].t.size(); ++j) {
                potential_row(im, ax[0].t[i], ax[1].t[j], ax[2].t, row, dist2);
                complex racc{0.0, 0.0};
                for (size_t l = 0; l < ax[2].t.size(); ++l) racc += pw[2][l] * row[l];
                acc += pw[0][i] * pw[1][j] * racc;
            }
    }
    return acc;
}

}  // namespace oracle_detail

inline OracleValue oracle_transform_bruteforce(const KernelFunction& k,
                                               const std::vector<double>& wavevector,
                                               const std::vector<double>& boxes) {
    using namespace oracle_detail;
    if (k.dimension != 2 && k.dimension != 3)
        throw std::invalid_argument("oracle_transform_bruteforce: dimension must be 2 or 3");
    if (wavevector.size() != static_cast<size_t>(k.dimension))
        throw std::invalid_argument("oracle_transform_bruteforce: wavevector arity mismatch");
    for (double w : wavevector)
        if (!(std::abs(w) > 0.0))
            throw std::invalid_argument("oracle_transform_bruteforce: zero wavevector component");
    if (boxes.size() < 3)
        throw std::invalid_argument("oracle_transform_bruteforce: need at least 3 boxes");
    for (size_t i = 0; i + 1 < boxes.size(); ++i)
        if (!(boxes[i + 1] > boxes[i]))
            throw std::invalid_argument("oracle_transform_bruteforce: non-monotone box sequence");

    // near block per axis and quadrature grading
    std::vector<double> nlo(wavevector.size()), nhi(wavevector.size());
    double near_h = 0.25;
    int grade = 0;
    std::array<double, 3> gc{0.0, 0.0, 0.0};
    bool even = false;
    if (k.is_coulomb()) {
        gc = k.coulomb().center;
        grade = k.dimension == 2 ? 14 : 10;
        for (size_t a = 0; a < wavevector.size(); ++a) {
            nlo[a] = gc[a] - 1.0;
            nhi[a] = gc[a] + 1.0;
        }
    } else {
        const DensityGrid& g = k.density().grid();
        even = density_even(*k.density().impl);
        for (size_t a = 0; a < wavevector.size(); ++a) {
            double h = g.spacing[a];
            nlo[a] = g.origin[a] - h * 2.5;
            nhi[a] = g.origin[a] + (g.shape[a] - 1) * h + h * 2.5;
        }
    }

    std::vector<double> radii;
    std::vector<complex> vals;
    for (double R : boxes) {
        std::vector<BoxAxis> ax;
        double eff = 0.0;
        for (size_t a = 0; a < wavevector.size(); ++a) {
            ax.push_back(build_axis(R, wavevector[a], nlo[a], nhi[a], near_h, gc[a],
                                    k.is_coulomb() ? grade : 0));
            eff += 0.5 * (ax.back().hi - ax.back().lo);
        }
        eff /= static_cast<double>(wavevector.size());
        complex v = k.is_coulomb() ? box_value_coulomb(k, wavevector, ax)
                                   : box_value_density(k, wavevector, ax, even);
        if (!radii.empty() && !(eff > radii.back() + 1e-9)) continue;  // snapped onto same box
        radii.push_back(eff);
        vals.push_back(v);
    }
    if (radii.size() < 2)
        throw std::invalid_argument("oracle_transform_bruteforce: boxes too small to separate");

    size_t n = radii.size();
    size_t depth = std::min<size_t>(3, n);
    complex last = extrapolate(radii, vals, n, depth);
    complex prev = n >= depth + 1 ? extrapolate(radii, vals, n - 1, depth)
                                  : extrapolate(radii, vals, n, depth - 1);
    OracleValue out;
    std::string comps;
    for (size_t a = 0; a < wavevector.size(); ++a)
        comps += (a ? "," : "") + std::to_string(wavevector[a]);
    out.quantity = std::string("F[") + (k.is_coulomb() ? "coulomb" : "density") + "](" + comps + ")";
    out.value = last;
    out.method = OracleMethod::expanding_box_richardson;
    out.estimated_accuracy =
        std::max(std::abs(last - prev), 1e-14 * (1.0 + std::abs(last)));
    return out;
}

}  // namespace slowft
