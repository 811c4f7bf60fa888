#include <doctest.h>

#include <cmath>
#include <limits>

#include "ebt/model.hpp"

using namespace ebt;

namespace {

double indicator01(double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; }

} // namespace

TEST_SUITE("model") {

TEST_CASE("marriage_rate is zero for empty populations") {
    auto zero = [](double) { return 0.0; };
    auto zero2 = [](double, double) { return 0.0; };
    const Coefficients co = preset("constant");
    CHECK(marriage_rate(0.0, 0.5, 0.5, zero, zero, zero2, co, 1.0) == 0.0);
}

TEST_CASE("marriage_rate on unit indicator densities matches hand quadrature") {
    // uc = 0, um = uf = 1 on [0,1], Theta = h = g = 1, gamma = 1:
    // T(0.5, 0.5) = 1*1*1*1*1 / (1 + 1 + 1) = 1/3.
    Coefficients co = preset("constant");
    auto uc = [](double, double) { return 0.0; };
    const double T = marriage_rate(0.0, 0.5, 0.5, indicator01, indicator01, uc, co, 1.0);
    CHECK(T == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("marriage_rate vanishes when couples absorb all singles") {
    // uc marginals equal um and uf, so both unmarried counts are zero.
    Coefficients co = preset("constant");
    auto uc = [](double x, double y) { return indicator01(x) * indicator01(y); };
    const double T =
        marriage_rate(0.0, 0.5, 0.5, indicator01, indicator01, uc, co, 1.0);
    CHECK(std::abs(T) < 1e-14);
}

TEST_CASE("marriage_rate error cases") {
    const Coefficients co = preset("constant");
    auto zero = [](double) { return 0.0; };
    auto zero2 = [](double, double) { return 0.0; };
    CHECK_THROWS_AS(marriage_rate(0.0, 0.5, 0.5, zero, zero, zero2, co, 0.0),
                    config_error);
    auto bad = [](double) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(marriage_rate(0.0, 0.5, 0.5, bad, zero, zero2, co, 1.0),
                    input_error);
}

TEST_CASE("marriage_rate respects the role symmetry") {
    // Swapping (um, x, h) with (uf, y, g) under a symmetric Theta returns the
    // original value.
    Coefficients co = preset("constant");
    co.h = [](double x) { return 1.0 / (1.0 + x); };
    co.g = [](double y) { return std::exp(-y / 2.0); };
    auto um = [](double x) { return indicator01(x) * (1.0 + x); };
    auto uf = [](double y) { return indicator01(y) * (2.0 - y); };
    auto uc = [](double x, double y) { return 0.25 * indicator01(x) * indicator01(y); };

    Coefficients swapped = co;
    swapped.h = co.g;
    swapped.g = co.h;
    auto uc_t = [&](double x, double y) { return uc(y, x); };

    const double a = marriage_rate(0.3, 0.4, 0.7, um, uf, uc, co, 1.0);
    const double b = marriage_rate(0.3, 0.7, 0.4, uf, um, uc_t, swapped, 1.0);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("doubling gamma with zero populations still yields zero") {
    Coefficients co = preset("constant");
    co.gamma = 2.0;
    auto zero = [](double) { return 0.0; };
    auto zero2 = [](double, double) { return 0.0; };
    CHECK(marriage_rate(0.0, 0.5, 0.5, zero, zero, zero2, co, 1.0) == 0.0);
}

TEST_CASE("preset constant") {
    const Coefficients co = preset("constant");
    CHECK(co.c_m(0.0, 0.3) == 0.1);
    CHECK(co.c_f(1.0, 0.8) == 0.1);
    CHECK(co.c_c(0.5, 0.2, 0.9) == 0.1);
    CHECK(co.beta_m(0.0, 0.1, 0.2) == 0.5);
    CHECK(co.beta_f(0.0, 0.1, 0.2) == 0.5);
    CHECK(co.theta(0.4, 0.6) == 1.0);
    CHECK(co.h(0.7) == 1.0);
    CHECK(co.g(0.7) == 1.0);
    CHECK(co.gamma == 1.0);
    CHECK(co.dx_c_m(0.0, 0.5) == 0.0);
    CHECK(co.dy_c_f(0.0, 0.5) == 0.0);
    CHECK(co.theta_separable());
}

TEST_CASE("preset zero-vital") {
    const Coefficients co = preset("zero-vital");
    CHECK(co.c_m(0.2, 0.3) == 0.0);
    CHECK(co.beta_m(0.2, 0.3, 0.4) == 0.0);
    CHECK(co.beta_f(0.2, 0.3, 0.4) == 0.0);
    CHECK(co.gamma == 1.0);
    CHECK(co.theta(0.1, 0.9) == 1.0);
}

TEST_CASE("preset partials match central finite differences") {
    for (const char* name :
         {"constant", "separable-gaussian", "zero-vital", "constant-smooth-marriage"}) {
        const Coefficients co = preset(name);
        const double delta = 1e-5;
        for (int k = 0; k < 10; ++k) {
            const double t = 0.13 * k;
            const double x = 0.05 + 0.15 * k;
            const double fd_m = (co.c_m(t, x + delta) - co.c_m(t, x - delta)) / (2 * delta);
            const double fd_f = (co.c_f(t, x + delta) - co.c_f(t, x - delta)) / (2 * delta);
            CHECK(co.dx_c_m(t, x) == doctest::Approx(fd_m).epsilon(1e-6));
            CHECK(co.dy_c_f(t, x) == doctest::Approx(fd_f).epsilon(1e-6));
        }
    }
}

TEST_CASE("separable presets factor their kernels") {
    for (const char* name : {"separable-gaussian", "constant-smooth-marriage"}) {
        const Coefficients co = preset(name);
        REQUIRE(co.theta_separable());
        for (double x : {0.0, 0.3, 1.1}) {
            for (double y : {0.2, 0.8, 1.4}) {
                CHECK(co.theta(x, y) ==
                      doctest::Approx(co.theta_x(x) * co.theta_y(y)).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("unknown preset name raises a lookup error") {
    CHECK_THROWS_AS(preset("no-such-preset"), lookup_error);
}

} // TEST_SUITE
