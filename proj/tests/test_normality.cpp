#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "slowft/normality.hpp"

using namespace slowft;

namespace {

std::vector<DecaySample> power_samples(const std::vector<double>& radii, double c, double p) {
    std::vector<DecaySample> out;
    for (double r : radii) out.push_back({r, c / std::pow(r, p)});
    return out;
}

const std::vector<double> base_radii = {8, 12, 16, 24, 32, 48, 64};

// quartic locus relation of the fourth fiber derivative, kept separate from
// the slope constants baked into the library
double quartic_relation(double u, double s) {
    return 24.0 * u * u * u * u - 72.0 * u * u * s * s + 9.0 * s * s * s * s;
}

bool clause_present(const NormalityCertificate& c, const std::string& id) {
    for (const auto& cc : c.conditions)
        if (cc.id == id) return true;
    return false;
}

bool all_clauses_pass(const NormalityCertificate& c) {
    for (const auto& cc : c.conditions)
        if (!cc.passed) return false;
    return true;
}

// bump density with the sign flipped on the x > 0 half, for the split path
DensityGrid signed_bump(int dim, int cells) {
    DensityGrid g = make_bump_density(dim, cells);
    for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j)
            for (int k = 0; k < g.shape[2]; ++k) {
                Point p = g.cell_center(i, j, k);
                if (p[0] > 0.0) g.values[g.flat(i, j, k)] *= -1.0;
            }
    g.nonnegative = false;
    g.is_smooth = false;
    g.derivative_sampler = nullptr;
    g.max_derivative_order = 0;
    return g;
}

}  // namespace

TEST_CASE("decay_fit recovers exact power laws", "[normality]") {
    SECTION("pure 1/r data fits order 1 exactly") {
        auto cert = decay_fit(power_samples(base_radii, 1.0, 1.0), 1);
        REQUIRE(cert.fitted_exponent == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(cert.constant == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(cert.threshold == Catch::Approx(8.0));
        REQUIRE(cert.order == 1);
        REQUIRE(cert.passes());
    }
    SECTION("scaled 1/r^2 data fits order 2") {
        auto cert = decay_fit(power_samples(base_radii, 3.7, 2.0), 2);
        REQUIRE(cert.fitted_exponent == Catch::Approx(2.0).epsilon(1e-12));
        REQUIRE(cert.constant == Catch::Approx(3.7).epsilon(1e-12));
        REQUIRE(cert.passes());
    }
    SECTION("order-1 data cannot certify order 2") {
        auto cert = decay_fit(power_samples(base_radii, 1.0, 1.0), 2);
        REQUIRE_FALSE(cert.passes());
    }
    SECTION("an identically zero tail passes any order") {
        std::vector<DecaySample> zero;
        for (double r : base_radii) zero.push_back({r, 0.0});
        auto cert = decay_fit(zero, 3);
        REQUIRE(cert.fitted_exponent == faster_than_any_polynomial);
        REQUIRE(cert.constant == 0.0);
        REQUIRE(cert.passes());
    }
    SECTION("isolated zero samples drop out of the fit") {
        auto samples = power_samples(base_radii, 2.0, 2.0);
        samples[1].max_abs = 0.0;
        auto cert = decay_fit(samples, 2);
        REQUIRE(cert.fitted_exponent == Catch::Approx(2.0).epsilon(1e-12));
        REQUIRE(cert.passes());
    }
    SECTION("input validation") {
        auto five = power_samples({8, 12, 16, 24, 64}, 1.0, 1.0);
        REQUIRE_THROWS_AS(decay_fit(five, 1), std::invalid_argument);
        auto narrow = power_samples({8, 12, 16, 24, 32, 40}, 1.0, 1.0);
        REQUIRE_THROWS_AS(decay_fit(narrow, 1), std::invalid_argument);
        auto bad = power_samples(base_radii, 1.0, 1.0);
        bad[0].radius = 0.0;
        REQUIRE_THROWS_AS(decay_fit(bad, 1), std::invalid_argument);
    }
}

TEST_CASE("closed-form zero loci of fiber derivatives", "[normality]") {
    const double a = 0.3, b = -0.6;
    auto k = make_coulomb(2, {a, b});

    SECTION("second derivative at offset sqrt(2)") {
        auto f = fiber(k, {{1, b + std::sqrt(2.0)}});
        auto rep = zero_locus_closed_form(k, f, 2);
        REQUIRE(rep.closed_form_used);
        REQUIRE(rep.zeros.size() == 2);
        REQUIRE(rep.zeros[0] == Catch::Approx(a - 1.0).margin(1e-12));
        REQUIRE(rep.zeros[1] == Catch::Approx(a + 1.0).margin(1e-12));
        REQUIRE(rep.factored_roots.empty());
        REQUIRE(rep.uniformity_bound.has_value());
        REQUIRE(*rep.uniformity_bound == 2.0);
    }
    SECTION("third derivative carries the cancelled central root") {
        double s = std::sqrt(2.0);
        auto f = fiber(k, {{1, b + s}});
        auto rep = zero_locus_closed_form(k, f, 3);
        REQUIRE(rep.zeros.size() == 2);
        REQUIRE(rep.zeros[0] == Catch::Approx(a - std::sqrt(3.0)).margin(1e-12));
        REQUIRE(rep.zeros[1] == Catch::Approx(a + std::sqrt(3.0)).margin(1e-12));
        REQUIRE(rep.factored_roots.size() == 1);
        REQUIRE(rep.factored_roots[0] == Catch::Approx(a).margin(1e-12));
    }
    SECTION("degenerate fiber through the center collapses to one root") {
        auto f = fiber(k, {{1, b}});
        auto rep = zero_locus_closed_form(k, f, 2);
        REQUIRE(rep.zeros.size() == 1);
        REQUIRE(rep.zeros[0] == Catch::Approx(a).margin(1e-12));
    }
    SECTION("fourth derivative in three dimensions at unit offset") {
        auto k3 = make_coulomb(3, {0.0, 0.0, 0.0});
        auto f = fiber(k3, {{1, 1.0}, {2, 0.0}});
        auto rep = zero_locus_closed_form(k3, f, 4);
        REQUIRE(rep.zeros.size() == 4);
        REQUIRE(rep.zeros[0] == Catch::Approx(-1.6939027).margin(1e-6));
        REQUIRE(rep.zeros[1] == Catch::Approx(-0.3615157).margin(1e-6));
        REQUIRE(rep.zeros[2] == Catch::Approx(0.3615157).margin(1e-6));
        REQUIRE(rep.zeros[3] == Catch::Approx(1.6939027).margin(1e-6));
        for (double z : rep.zeros) REQUIRE(quartic_relation(z, 1.0) == Catch::Approx(0.0).margin(1e-9));
        REQUIRE(*rep.uniformity_bound == 4.0);
    }
    SECTION("input validation") {
        auto f = fiber(k, {{1, b + 2.0}});
        REQUIRE_THROWS_AS(zero_locus_closed_form(k, f, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(zero_locus_closed_form(k, f, 5), std::invalid_argument);
        auto k3 = make_coulomb(3, {0, 0, 0});
        auto partial = fiber(k3, {{2, 1.0}});
        REQUIRE_THROWS_AS(zero_locus_closed_form(k3, partial, 2), std::invalid_argument);
        auto dens = make_density_kernel(make_bump_density(2, 8));
        auto df = fiber(dens, {{1, 4.0}});
        REQUIRE_THROWS_AS(zero_locus_closed_form(dens, df, 2), std::invalid_argument);
    }
}

TEST_CASE("numeric zero counts match the kernel", "[normality]") {
    const double a = 0.3, b = -0.6;
    auto k = make_coulomb(2, {a, b});
    auto f = fiber(k, {{1, b + std::sqrt(2.0)}});
    Interval window{a - 8.0, a + 8.0};

    SECTION("the kernel itself has no zeros") {
        auto rep = count_zeros_numeric(f, window, 512);
        REQUIRE(rep.zeros.empty());
        REQUIRE(rep.suspected.empty());
    }
    SECTION("first derivative vanishes exactly under the center") {
        auto rep = count_zeros_numeric(f.with_derivative(1), window, 512);
        REQUIRE(rep.zeros.size() == 1);
        REQUIRE(rep.zeros[0] == Catch::Approx(a).margin(1e-9));
    }
    SECTION("second derivative agrees with the closed form") {
        auto rep = count_zeros_numeric(f.with_derivative(2), window, 512);
        auto closed = zero_locus_closed_form(k, f, 2);
        REQUIRE(rep.zeros.size() == closed.zeros.size());
        for (size_t i = 0; i < rep.zeros.size(); ++i)
            REQUIRE(rep.zeros[i] == Catch::Approx(closed.zeros[i]).margin(1e-8));
    }
    SECTION("third derivative finds the cancelled root as well") {
        auto rep = count_zeros_numeric(f.with_derivative(3), window, 512);
        auto closed = zero_locus_closed_form(k, f, 3);
        std::vector<double> expect = closed.zeros;
        expect.insert(expect.end(), closed.factored_roots.begin(), closed.factored_roots.end());
        std::sort(expect.begin(), expect.end());
        REQUIRE(rep.zeros.size() == 3);
        REQUIRE(expect.size() == 3);
        for (size_t i = 0; i < 3; ++i)
            REQUIRE(rep.zeros[i] == Catch::Approx(expect[i]).margin(1e-8));
    }
    SECTION("fourth derivative in three dimensions") {
        auto k3 = make_coulomb(3, {0.0, 0.0, 0.0});
        auto f3 = fiber(k3, {{1, 1.0}, {2, 0.0}});
        auto rep = count_zeros_numeric(f3.with_derivative(4), {-8.0, 8.0}, 1024);
        auto closed = zero_locus_closed_form(k3, f3, 4);
        REQUIRE(rep.zeros.size() == 4);
        for (size_t i = 0; i < 4; ++i)
            REQUIRE(rep.zeros[i] == Catch::Approx(closed.zeros[i]).margin(1e-8));
    }
    SECTION("input validation and excluded-set propagation") {
        REQUIRE_THROWS_AS(count_zeros_numeric(f, window, 63), std::invalid_argument);
        REQUIRE_THROWS_AS(count_zeros_numeric(f, {2.0, 2.0}, 128), std::invalid_argument);
        auto through = fiber(k, {{1, b}});  // crosses the excluded set
        REQUIRE_THROWS_AS(count_zeros_numeric(through, {a - 1.0, a + 1.0}, 128),
                          std::domain_error);
    }
}

TEST_CASE("closed-form and numeric zero counts agree on random fibers", "[normality]") {
    std::mt19937_64 rng(probe_seed);
    std::uniform_real_distribution<double> offset(0.8, 6.0);
    std::uniform_int_distribution<int> coin(0, 1);

    SECTION("two dimensions") {
        auto k = make_coulomb(2, {0.3, -0.6});
        for (int trial = 0; trial < 60; ++trial) {
            int axis = coin(rng);
            double s = (coin(rng) ? 1.0 : -1.0) * offset(rng);
            auto f = fiber(k, {{1 - axis, k.coulomb().center[1 - axis] + s}});
            double c = k.coulomb().center[axis];
            Interval window{c - 12.0, c + 12.0};
            REQUIRE(count_zeros_numeric(f.with_derivative(1), window, 1024).zeros.size() == 1);
            for (int order = 2; order <= 3; ++order) {
                auto closed = zero_locus_closed_form(k, f, order);
                auto numeric = count_zeros_numeric(f.with_derivative(order), window, 1024);
                std::vector<double> expect = closed.zeros;
                expect.insert(expect.end(), closed.factored_roots.begin(),
                              closed.factored_roots.end());
                std::sort(expect.begin(), expect.end());
                REQUIRE(numeric.zeros.size() == expect.size());
                for (size_t i = 0; i < expect.size(); ++i)
                    REQUIRE(numeric.zeros[i] == Catch::Approx(expect[i]).margin(1e-8));
            }
        }
    }
    SECTION("three dimensions, fourth derivative") {
        auto k = make_coulomb(3, {0.1, 0.2, -0.3});
        std::uniform_int_distribution<int> pick(0, 2);
        for (int trial = 0; trial < 40; ++trial) {
            int axis = pick(rng);
            std::vector<std::pair<int, double>> fixed;
            for (int a2 = 0; a2 < 3; ++a2)
                if (a2 != axis)
                    fixed.emplace_back(a2, k.coulomb().center[a2] +
                                               (coin(rng) ? 1.0 : -1.0) * offset(rng) / 1.4);
            auto f = fiber(k, fixed);
            double c = k.coulomb().center[axis];
            auto closed = zero_locus_closed_form(k, f, 4);
            auto numeric =
                count_zeros_numeric(f.with_derivative(4), {c - 16.0, c + 16.0}, 2048);
            REQUIRE(numeric.zeros.size() == 4);
            for (size_t i = 0; i < 4; ++i)
                REQUIRE(numeric.zeros[i] == Catch::Approx(closed.zeros[i]).margin(1e-8));
        }
    }
}

TEST_CASE("certify flags shifted Coulomb kernels normal", "[normality]") {
    ProbeConfig cfg;
    cfg.fibers_per_axis = 6;
    cfg.zero_scan_samples = 768;

    SECTION("two dimensions") {
        auto k = make_coulomb(2, {0.5, -0.25});
        auto cert = certify(k, 2, cfg);
        REQUIRE(cert.kind == CertKind::normal);
        REQUIRE(cert.val.has_value());
        REQUIRE(*cert.val == 2);
        REQUIRE(all_clauses_pass(cert));
        for (const char* id : {"i", "ii", "iii", "iv", "v"}) REQUIRE(clause_present(cert, id));
        REQUIRE(cert.conditions.size() == 5);
        REQUIRE(cert.probes_used + cert.probes_skipped == 12);
        REQUIRE(cert.probes_used >= 10);
        REQUIRE(cert.decay.at("f").fitted_exponent >= 0.85);
        REQUIRE(cert.decay.at("df").fitted_exponent >= 1.85);
    }
    SECTION("three dimensions") {
        auto k = make_coulomb(3, {0.1, 0.2, -0.3});
        ProbeConfig cfg3 = cfg;
        cfg3.fibers_per_axis = 4;
        auto cert = certify(k, 3, cfg3);
        REQUIRE(cert.kind == CertKind::normal);
        REQUIRE(*cert.val == 4);
        REQUIRE(all_clauses_pass(cert));
        for (const char* id : {"i", "ii", "iii", "iv", "v", "vi"})
            REQUIRE(clause_present(cert, id));
        REQUIRE(cert.conditions.size() == 6);
        REQUIRE(cert.decay.at("d110").fitted_exponent >= 2.85);
        REQUIRE(cert.decay.at("d111").fitted_exponent >= 3.85);
    }
    SECTION("certification is deterministic") {
        auto k = make_coulomb(2, {0.5, -0.25});
        auto c1 = certify(k, 2, cfg);
        auto c2 = certify(k, 2, cfg);
        REQUIRE(c1.kind == c2.kind);
        REQUIRE(c1.probes_used == c2.probes_used);
        REQUIRE(c1.decay.at("f").fitted_exponent == c2.decay.at("f").fitted_exponent);
    }
    SECTION("level validation") {
        auto k = make_coulomb(2, {0.0, 0.0});
        REQUIRE_THROWS_AS(certify(k, 3, cfg), std::invalid_argument);
        REQUIRE_THROWS_AS(certify(k, 4, cfg), std::invalid_argument);
    }
}

TEST_CASE("certify honors weaker requested kinds", "[normality]") {
    auto k = make_coulomb(2, {0.5, -0.25});
    ProbeConfig cfg;
    cfg.fibers_per_axis = 3;
    cfg.zero_scan_samples = 512;

    cfg.request = CertifyRequest::quasi_normal;
    auto quasi = certify(k, 2, cfg);
    REQUIRE(quasi.kind == CertKind::quasi_normal);
    REQUIRE_FALSE(quasi.interval_data.empty());
    for (const auto& [order, data] : quasi.interval_data) REQUIRE(data.spread <= 0.05);

    cfg.request = CertifyRequest::quasi_split_normal;
    auto split = certify(k, 2, cfg);
    REQUIRE(split.kind == CertKind::quasi_split_normal);
    REQUIRE(clause_present(split, "v''"));
}

TEST_CASE("certify flags nonnegative densities quasi normal", "[normality]") {
    SECTION("two dimensions") {
        auto k = make_density_kernel(make_bump_density(2, 32));
        ProbeConfig cfg;
        cfg.fibers_per_axis = 3;
        cfg.zero_scan_samples = 256;
        auto cert = certify(k, 2, cfg);
        REQUIRE(cert.kind == CertKind::quasi_normal);
        REQUIRE_FALSE(cert.val.has_value());
        REQUIRE(all_clauses_pass(cert));
        REQUIRE(clause_present(cert, "v'"));

        const double M = 1.0;  // bump support radius
        const auto& first = cert.interval_data.at(1);
        REQUIRE(first.S == 1);
        REQUIRE(first.R == Catch::Approx(2.0 * (M + 1.0)).margin(1e-12));
        REQUIRE(first.sample_bands.size() == 1);
        REQUIRE(first.sample_bands[0].lo == Catch::Approx(-(M + 1.0)).margin(1e-12));
        REQUIRE(first.sample_bands[0].hi == Catch::Approx(M + 1.0).margin(1e-12));

        const auto& second = cert.interval_data.at(2);
        REQUIRE(second.S == 2);
        REQUIRE(second.R == Catch::Approx(2.0 * (2.0 + std::sqrt(2.0)) * M).margin(1e-12));
        REQUIRE(second.spread <= 0.05);
    }
    SECTION("three dimensions tracks all five derivative orders") {
        auto k = make_density_kernel(make_bump_density(3, 16));
        ProbeConfig cfg;
        cfg.fibers_per_axis = 2;
        cfg.zero_scan_samples = 128;
        auto cert = certify(k, 3, cfg);
        REQUIRE(cert.kind == CertKind::quasi_normal);
        REQUIRE(clause_present(cert, "vi'"));

        const double M = 1.0;
        const auto& third = cert.interval_data.at(3);
        REQUIRE(third.S == 3);  // two sloped bands plus the central interval
        double r3 = 2.0 * (M + 1.0) + 2.0 * (2.0 + std::sqrt(6.0)) * M;
        REQUIRE(third.R == Catch::Approx(r3).margin(1e-12));

        const auto& fourth = cert.interval_data.at(4);
        REQUIRE(fourth.S == 4);
        double sp = std::sqrt((6.0 + std::sqrt(30.0)) / 4.0);
        double sm = std::sqrt((6.0 - std::sqrt(30.0)) / 4.0);
        double r4 = 4.0 * M * (1.0 + sp) + 4.0 * M * (1.0 + sm);
        REQUIRE(fourth.R == Catch::Approx(r4).margin(1e-12));
    }
}

TEST_CASE("certify splits signed densities", "[normality]") {
    auto k = make_density_kernel(signed_bump(2, 24));
    ProbeConfig cfg;
    cfg.fibers_per_axis = 2;
    cfg.zero_scan_samples = 192;
    auto cert = certify(k, 2, cfg);
    REQUIRE(cert.kind == CertKind::quasi_split_normal);
    REQUIRE(clause_present(cert, "v''"));
    REQUIRE(cert.clause_passed("v''"));
    REQUIRE(cert.probes_used == 8);  // both halves share the probe budget
}

TEST_CASE("probe budget exhaustion is reported, not thrown", "[normality]") {
    auto k = make_coulomb(2, {0.0, 0.0}, 50.0);
    ProbeConfig cfg;
    cfg.fibers_per_axis = 2;
    auto cert = certify(k, 2, cfg);
    REQUIRE(cert.kind == CertKind::not_certified);
    REQUIRE(cert.probes_used == 0);
    REQUIRE(cert.probes_skipped == 4);
    REQUIRE_FALSE(cert.conditions.empty());
    REQUIRE_FALSE(cert.conditions.front().passed);
}

TEST_CASE("certificate strength is monotone", "[normality]") {
    ProbeConfig cfg;
    cfg.fibers_per_axis = 2;
    cfg.zero_scan_samples = 256;

    // a kernel certified normal also certifies at both weaker levels
    auto k = make_coulomb(2, {0.5, -0.25});
    REQUIRE(certify(k, 2, cfg).kind == CertKind::normal);
    cfg.request = CertifyRequest::quasi_normal;
    REQUIRE(certify(k, 2, cfg).kind == CertKind::quasi_normal);
    cfg.request = CertifyRequest::quasi_split_normal;
    REQUIRE(certify(k, 2, cfg).kind == CertKind::quasi_split_normal);

    // a quasi normal density also certifies quasi split (f = f/2 + f/2)
    auto d = make_density_kernel(make_bump_density(2, 24));
    cfg.request = CertifyRequest::strongest;
    REQUIRE(certify(d, 2, cfg).kind == CertKind::quasi_normal);
    cfg.request = CertifyRequest::quasi_split_normal;
    REQUIRE(certify(d, 2, cfg).kind == CertKind::quasi_split_normal);
}
