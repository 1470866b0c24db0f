#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spsim/errors.hpp"
#include "spsim/physics.hpp"
#include "spsim/rng.hpp"

using namespace spsim;
using namespace spsim::physics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("excited population of an undamped pi pulse") {
    CHECK(excited_population({M_PI, 0.0}) == 1.0);
    CHECK(excited_population({0.0, 0.3}) == 0.0);
    CHECK_THAT(excited_population({M_PI, 0.05}), WithinAbs(0.92731, 1e-5));
}

TEST_CASE("excited population bounded, periodic, sin^2 at zero damping") {
    SlotRng rng(7, 0, RngStream::test);
    for (int i = 0; i < 2000; ++i) {
        const double theta = rng.uniform() * 8 * M_PI;
        const double gamma = rng.uniform() * 0.5;
        const double p = excited_population({theta, gamma});
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        const double s = std::sin(theta / 2);
        CHECK_THAT(excited_population({theta, 0.0}), WithinAbs(s * s, 1e-12));
    }
    // damping pulls the oscillation toward 1/2
    CHECK_THAT(excited_population({40 * M_PI, 0.5}), WithinAbs(0.5, 1e-12));
}

TEST_CASE("cw saturation curve") {
    const double p_sat = 4.9e-9, i_inf = 1.87e9;
    CHECK_THAT(cw_rate(p_sat, p_sat, i_inf), WithinRel(0.935e9, 1e-12));
    CHECK(cw_rate(0, p_sat, i_inf) == 0.0);
    CHECK_THAT(cw_rate(100 * p_sat, p_sat, i_inf),
               WithinRel(1.8515e9, 1e-4));  // 100/101 of i_inf
    CHECK_THROWS_AS(cw_rate(1e-9, 0.0, i_inf), data_error);
    CHECK_THROWS_AS(cw_rate(1e-9, -1e-9, i_inf), data_error);

    // strictly increasing in power
    double prev = -1;
    for (double p = 0; p <= 50e-9; p += 0.5e-9) {
        const double r = cw_rate(p, p_sat, i_inf);
        REQUIRE(r > prev);
        prev = r;
    }
}

TEST_CASE("maximum cw flux and overall efficiency") {
    CHECK_THAT(max_cw_flux(58.60e-12), WithinRel(8.532e9, 1e-4));
    CHECK(max_cw_flux(1.0) == 0.5);
    // detected saturation flux over the theoretical bound
    const double overall = 1.87e9 / max_cw_flux(58.60e-12);
    CHECK_THAT(overall, WithinAbs(0.219, 1e-3));
    CHECK_THROWS_AS(max_cw_flux(0.0), data_error);
}

TEST_CASE("purcell factor is the lifetime ratio") {
    CHECK_THAT(purcell_factor(1.08e-9, 58.60e-12), WithinAbs(18.43, 0.01));
    CHECK(purcell_factor(3.3e-9, 3.3e-9) == 1.0);
    CHECK_THAT(purcell_factor(2.16e-9, 58.60e-12), WithinAbs(36.86, 0.02));

    // round trip: f_p * t1 = t_slab
    SlotRng rng(3, 1, RngStream::test);
    for (int i = 0; i < 100; ++i) {
        const double t1 = 1e-12 + rng.uniform() * 1e-9;
        const double ts = 1e-12 + rng.uniform() * 1e-8;
        CHECK_THAT(purcell_factor(ts, t1) * t1, WithinRel(ts, 1e-12));
    }
}

TEST_CASE("extraction efficiency") {
    CHECK_THAT(extraction_efficiency(18.4, 6800, 7600),
               WithinAbs(0.8486, 1e-4));
    CHECK(extraction_efficiency(0, 6800, 7600) == 0.0);
    CHECK_THAT(extraction_efficiency(1e12, 7600, 7600), WithinAbs(1.0, 1e-9));
    CHECK_THROWS_AS(extraction_efficiency(-1, 6800, 7600), data_error);
    CHECK_THROWS_AS(extraction_efficiency(18.4, 0, 7600), data_error);

    // monotone in f_p and q
    double prev = -1;
    for (double f = 0; f < 40; f += 0.5) {
        const double e = extraction_efficiency(f, 6800, 7600);
        REQUIRE(e > prev);
        prev = e;
    }
    prev = -1;
    for (double q = 100; q <= 7600; q += 100) {
        const double e = extraction_efficiency(18.4, q, 7600);
        REQUIRE(e > prev);
        prev = e;
    }
}

TEST_CASE("fourier fraction") {
    CHECK_THAT(fourier_fraction(108.8e-12, 58.60e-12), WithinAbs(0.9283, 1e-4));
    CHECK(fourier_fraction(2.0, 1.0) == 1.0);
    CHECK_THAT(fourier_fraction(54.4e-12, 58.60e-12), WithinAbs(0.4642, 1e-4));
}

TEST_CASE("coherence time from Lorentzian linewidth") {
    CHECK_THAT(t2_from_linewidth(2.925e9), WithinAbs(108.8e-12, 0.05e-12));
    CHECK_THAT(t2_from_linewidth(1.0 / M_PI), WithinRel(1.0, 1e-12));
    // feeding the un-deconvolved total width gives a longer, wrong T2
    CHECK_THAT(t2_from_linewidth(2.74e9), WithinAbs(116.2e-12, 0.05e-12));
    CHECK_THROWS_AS(t2_from_linewidth(0.0), data_error);
}

TEST_CASE("emitter parameter validation") {
    EmitterParams good{58.60e-12, 108.8e-12, 1.08e-9, 18.4,
                       6800,      7600,      0.92,    0.85};
    CHECK_NOTHROW(validate(good));

    auto bad = good;
    bad.t2 = 3 * bad.t1;  // beyond the physical 2*t1 bound
    CHECK_THROWS_AS(validate(bad), data_error);
    bad = good;
    bad.qe_espe = 1.2;
    CHECK_THROWS_AS(validate(bad), data_error);
    bad = good;
    bad.t1 = 0;
    CHECK_THROWS_AS(validate(bad), data_error);

    CHECK_THROWS_AS(validate(PulseDrive{-0.1, 0, 76e6}), data_error);
    CHECK_THROWS_AS(validate(PulseDrive{M_PI, 0, 0}), data_error);
}
