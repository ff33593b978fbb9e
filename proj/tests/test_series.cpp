#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "slowft/series.hpp"

using namespace slowft;

TEST_CASE("newton binomial coefficients match the factorial formula", "[series]") {
    CHECK(newton_binomial_coeff(0) == 1.0);
    CHECK(newton_binomial_coeff(1) == -0.5);
    CHECK(newton_binomial_coeff(2) == 0.375);

    SECTION("ratio recurrence holds across the whole supported range") {
        for (int n = 0; n < 30; ++n) {
            double ratio = newton_binomial_coeff(n + 1) / newton_binomial_coeff(n);
            CHECK(ratio == Catch::Approx(-(2.0 * n + 1.0) / (2.0 * n + 2.0)).epsilon(1e-14));
        }
    }

    SECTION("generating function: sum b_n t^n = 1/sqrt(1+t)") {
        double t = 0.3, s = 0.0;
        for (int n = 30; n >= 0; --n) s = newton_binomial_coeff(n) + t * s;
        CHECK(s == Catch::Approx(1.0 / std::sqrt(1.3)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(newton_binomial_coeff(-1), std::invalid_argument);
    CHECK_THROWS_AS(newton_binomial_coeff(31), std::invalid_argument);
}

TEST_CASE("coulomb series at infinity is the geometric progression", "[series]") {
    auto s = expand_coulomb1d(2.0, Side::positive, 4);
    CHECK(s.coefficients == std::vector<double>{1.0, 2.0, 4.0, 8.0});
    CHECK(s.radius == 0.5);
    CHECK(s.truncation_order == 4);

    auto z = expand_coulomb1d(0.0, Side::positive, 4);
    CHECK(z.coefficients == std::vector<double>{1.0, 0.0, 0.0, 0.0});
    CHECK(z.remainder_bound == 0.0);

    auto n = expand_coulomb1d(2.0, Side::negative, 3);
    CHECK(n.coefficients == std::vector<double>{-1.0, -2.0, -4.0});

    CHECK_THROWS_AS(expand_coulomb1d(2.0, Side::positive, 0), std::invalid_argument);

    SECTION("positive-side evaluation matches 1/(1/x - d)") {
        auto s24 = expand_coulomb1d(2.0, Side::positive, 24);
        double x = 0.1;  // f(1/x) = x/(1 - d x)
        CHECK(s24.eval(x) == Catch::Approx(0.125).epsilon(1e-12));
    }

    SECTION("negative-side evaluation matches 1/|1/x - d|") {
        auto s24 = expand_coulomb1d(2.0, Side::negative, 24);
        double x = -0.1;  // point 1/x = -10, f = 1/12
        CHECK(s24.eval(x) == Catch::Approx(1.0 / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("derivative series follows c_n = -(n-1) a_{n-1}", "[series]") {
    auto s = expand_coulomb1d(2.0, Side::positive, 4);
    auto d = differentiate_series(s);
    CHECK(d.coefficients == std::vector<double>{0.0, -1.0, -4.0, -12.0});
    CHECK(d.truncation_order == 4);
    CHECK(d.radius == s.radius);

    auto z = differentiate_series(expand_coulomb1d(0.0, Side::positive, 4));
    CHECK(z.coefficients == std::vector<double>{0.0, -1.0, 0.0, 0.0});

    auto one = expand_coulomb1d(2.0, Side::positive, 1);
    CHECK_THROWS_AS(differentiate_series(one), std::invalid_argument);

    SECTION("finite-difference oracle at x = 0.01") {
        auto s24 = expand_coulomb1d(2.0, Side::positive, 24);
        auto d24 = differentiate_series(s24);
        double x = 0.01, h = 1e-4;
        // phi(x) = f(1/x), so f'(1/x) = -x^2 phi'(x).
        double fd = -x * x * (s24.eval(x + h) - s24.eval(x - h)) / (2.0 * h);
        CHECK(d24.eval(x) == Catch::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("derivative series matches the analytic derivative on (2/eps, 100/eps)", "[series]") {
    for (double d : {2.0, -1.5, 0.7}) {
        auto s = expand_coulomb1d(d, Side::positive, 48);
        auto ds = differentiate_series(s);
        double eps = s.radius;
        double lo = 2.0 / eps * 1.05, hi = 100.0 / eps * 0.95;
        for (int i = 0; i < 20; ++i) {
            double x = lo * std::pow(hi / lo, i / 19.0);
            double exact = -1.0 / ((x - d) * (x - d));  // x > d on the positive side
            CHECK(ds.eval(1.0 / x) == Catch::Approx(exact).epsilon(1e-8));
        }
    }
}

TEST_CASE("decay order and constant from the series", "[series]") {
    auto s = expand_coulomb1d(2.0, Side::positive, 4);
    auto [o1, c1] = decay_order_from_series(s);
    CHECK(o1 == 1);
    // u(x) = 1/(1-2x) has sup 2 on (0, radius/2); the geometric majorization
    // reproduces it exactly for this series.
    CHECK(c1 == Catch::Approx(2.0).epsilon(1e-12));

    auto [o2, c2] = decay_order_from_series(differentiate_series(s));
    CHECK(o2 == 2);
    CHECK(c2 > 0.0);

    SeriesAtInfinity sparse;
    sparse.side = Side::positive;
    sparse.coefficients = {0.0, 0.0, 5.0};
    sparse.radius = 1.0;
    sparse.truncation_order = 3;
    CHECK(decay_order_from_series(sparse).first == 3);

    SeriesAtInfinity zero;
    zero.coefficients = {0.0, 0.0};
    zero.radius = 1.0;
    zero.truncation_order = 2;
    CHECK_THROWS_AS(decay_order_from_series(zero), std::domain_error);

    SECTION("the constant really bounds |f| beyond 2/radius") {
        for (double x : {4.2, 6.0, 10.0, 55.0, 199.0})
            CHECK(1.0 / std::abs(x - 2.0) <= c1 / x);
    }

    SECTION("differentiation shifts the leading order by one") {
        for (double d : {2.0, 0.0, -3.0}) {
            auto base = expand_coulomb1d(d, Side::positive, 12);
            auto [ob, cb] = decay_order_from_series(base);
            auto [od, cd] = decay_order_from_series(differentiate_series(base));
            CHECK(od == ob + 1);
        }
    }
}

TEST_CASE("truncated evaluation at radius/2 is stable under doubling", "[series]") {
    for (double d : {2.0, -1.2, 0.5}) {
        for (Side side : {Side::positive, Side::negative}) {
            for (int n : {6, 12, 24}) {
                auto a = expand_coulomb1d(d, side, n);
                auto b = expand_coulomb1d(d, side, 2 * n);
                double x = a.radius / 2.0 * (side == Side::positive ? 1.0 : -1.0);
                CHECK(std::abs(a.eval(x) - b.eval(x)) <= a.remainder_bound * (1.0 + 1e-12));
            }
        }
    }
}
