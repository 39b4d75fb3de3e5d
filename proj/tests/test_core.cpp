#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spindecay/errors.hpp"
#include "spindecay/types.hpp"

using namespace spindecay;

namespace {
constexpr double kPi = std::numbers::pi;

double norm3(const std::array<double, 3>& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}
}  // namespace

TEST_CASE("polarization string round trip") {
    CHECK(std::string(to_string(Polarization::RCP)) == "RCP");
    CHECK(std::string(to_string(Polarization::LCP)) == "LCP");
    CHECK(polarization_from_string("RCP") == Polarization::RCP);
    CHECK(polarization_from_string("rcp") == Polarization::RCP);
    CHECK(polarization_from_string("LCP") == Polarization::LCP);
    CHECK(polarization_from_string("lcp") == Polarization::LCP);
    CHECK_THROWS_AS(polarization_from_string("circular"), ValidationError);
    CHECK_THROWS_AS(polarization_from_string(""), ValidationError);
}

TEST_CASE("initial phase selects the spin branch") {
    CHECK(initial_phase(Polarization::RCP) == 0.0);
    CHECK(initial_phase(Polarization::LCP) == doctest::Approx(kPi / 2.0).epsilon(1e-15));
}

TEST_CASE("field_direction matches spherical coordinates") {
    FieldGeometry g;
    g.theta_deg = 0.0;
    g.phi_deg = 0.0;
    auto d = g.field_direction();
    CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d[2] == doctest::Approx(1.0).epsilon(1e-15));

    g.theta_deg = 90.0;
    d = g.field_direction();
    CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::fabs(d[2]) < 1e-15);

    g.phi_deg = 90.0;
    d = g.field_direction();
    CHECK(d[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::fabs(d[0]) < 1e-15);

    g.theta_deg = 45.0;
    g.phi_deg = 30.0;
    d = g.field_direction();
    CHECK(norm3(d) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d[2] == doctest::Approx(std::cos(kPi / 4.0)).epsilon(1e-14));
}

TEST_CASE("axis_from_angles agrees with field_direction parametrization") {
    for (double tilt : {0.0, 30.0, 45.0, 90.0, 135.0}) {
        for (double az : {0.0, 45.0, 200.0, 359.0}) {
            const auto a = axis_from_angles(tilt, az);
            FieldGeometry g;
            g.theta_deg = tilt;
            g.phi_deg = az;
            const auto d = g.field_direction();
            CHECK(norm3(a) == doctest::Approx(1.0).epsilon(1e-14));
            for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(d[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("transverse_field limiting geometries") {
    FieldGeometry g;
    g.magnitude_gauss = 500.0;
    g.chiral_axis = {0.0, 0.0, 1.0};

    SUBCASE("field perpendicular to the axis passes through fully") {
        g.theta_deg = 90.0;
        g.phi_deg = 17.0;  // azimuth is irrelevant when the axis is z
        CHECK(transverse_field(g) == doctest::Approx(500.0).epsilon(1e-13));
    }
    SUBCASE("field parallel to the axis has no transverse part") {
        g.theta_deg = 0.0;
        CHECK(transverse_field(g) == doctest::Approx(0.0).epsilon(1e-13));
        // Anti-parallel likewise.
        g.theta_deg = 180.0;
        CHECK(std::fabs(transverse_field(g)) < 1e-7);
    }
    SUBCASE("oblique field projects as |B| sin(angle to axis)") {
        g.theta_deg = 37.0;
        CHECK(transverse_field(g) ==
              doctest::Approx(500.0 * std::sin(37.0 * kPi / 180.0)).epsilon(1e-13));
    }
    SUBCASE("general axis: projection is rotation invariant") {
        // Angle between B and n depends only on the relative orientation:
        // moving both by the same azimuth leaves B_perp unchanged.
        g.theta_deg = 63.0;
        g.phi_deg = 10.0;
        g.chiral_axis = axis_from_angles(45.0, 200.0);
        const double b1 = transverse_field(g);
        g.phi_deg = 10.0 + 123.0;
        g.chiral_axis = axis_from_angles(45.0, 200.0 + 123.0);
        const double b2 = transverse_field(g);
        CHECK(b1 == doctest::Approx(b2).epsilon(1e-12));
    }
    SUBCASE("zero magnitude gives zero") {
        g.magnitude_gauss = 0.0;
        CHECK(transverse_field(g) == 0.0);
    }
}

TEST_CASE("FieldGeometry validation") {
    FieldGeometry g;
    g.magnitude_gauss = 100.0;
    CHECK_NOTHROW(g.validate());

    FieldGeometry bad = g;
    bad.magnitude_gauss = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    bad = g;
    bad.chiral_axis = {0.0, 0.0, 1.1};
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    bad = g;
    bad.chiral_axis = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    bad = g;
    bad.theta_deg = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("SpinModelParams defaults are valid; bad fields rejected") {
    SpinModelParams p;
    CHECK_NOTHROW(p.validate());
    CHECK(p.tau_up_mean_ns == 20.0);
    CHECK(p.tau_down_mean_ns == 12.0);
    CHECK(p.sigma_tau_ns == 1.0);
    CHECK(p.gamma_rad_per_ns_gauss == doctest::Approx(1.2e-4));
    CHECK(p.n0 == 1'000'000);
    CHECK(p.bin_width_ns == 0.25);

    auto expect_invalid = [](SpinModelParams q) {
        CHECK_THROWS_AS(q.validate(), ValidationError);
    };
    SpinModelParams q = p;
    q.tau_up_mean_ns = 0.0;
    expect_invalid(q);
    q = p;
    q.tau_down_mean_ns = -3.0;
    expect_invalid(q);
    q = p;
    q.sigma_tau_ns = -0.1;
    expect_invalid(q);
    q = p;
    q.gamma_rad_per_ns_gauss = 0.0;
    expect_invalid(q);
    q = p;
    q.n0 = 0;
    expect_invalid(q);
    q = p;
    q.dt_ns = -1.0;
    expect_invalid(q);
    q = p;
    q.bin_width_ns = 0.0;
    expect_invalid(q);
}

TEST_CASE("IrfModel validation") {
    IrfModel irf;
    CHECK_NOTHROW(irf.validate());
    irf.s_ns = 0.0;
    CHECK_THROWS_AS(irf.validate(), ValidationError);
    irf.s_ns = 0.5;
    irf.t0_ns = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(irf.validate(), ValidationError);
}

TEST_CASE("DecayHistogram basics") {
    DecayHistogram h(0.25, 0.0, {5, 3, 2, 0});
    CHECK(h.size() == 4);
    CHECK(h.bin_width_ns() == 0.25);
    CHECK(h.bin_center_ns(0) == doctest::Approx(0.125));
    CHECK(h.bin_center_ns(3) == doctest::Approx(0.875));
    CHECK(h.total_counts() == 10);

    CHECK_THROWS_AS(DecayHistogram(0.0, 0.0, {1, 2}), ValidationError);
    CHECK_THROWS_AS(DecayHistogram(0.25, 0.0, {1}), ValidationError);
    CHECK_THROWS_AS(
        DecayHistogram(0.25, std::numeric_limits<double>::quiet_NaN(), {1, 2}),
        ValidationError);
}

TEST_CASE("sum_histograms pools compatible grids and rejects mismatches") {
    DecayHistogram a(0.25, 0.0, {1, 2, 3});
    DecayHistogram b(0.25, 0.0, {10, 20, 30});
    const auto s = sum_histograms({a, b});
    CHECK(s.counts() == std::vector<std::uint64_t>{11, 22, 33});
    CHECK(s.bin_width_ns() == 0.25);

    DecayHistogram wrong_width(0.5, 0.0, {1, 2, 3});
    CHECK_THROWS_AS(sum_histograms({a, wrong_width}), ValidationError);
    DecayHistogram wrong_size(0.25, 0.0, {1, 2});
    CHECK_THROWS_AS(sum_histograms({a, wrong_size}), ValidationError);
    DecayHistogram wrong_start(0.25, 1.0, {1, 2, 3});
    CHECK_THROWS_AS(sum_histograms({a, wrong_start}), ValidationError);
    CHECK_THROWS_AS(sum_histograms({}), ValidationError);
}

TEST_CASE("BiexpFitResult lifetime errors come from the covariance diagonal") {
    BiexpFitResult r;
    r.covariance[2][2] = 0.04;
    r.covariance[3][3] = 0.0009;
    CHECK(r.tau1_err_ns() == doctest::Approx(0.2));
    CHECK(r.tau2_err_ns() == doctest::Approx(0.03));
    // Tiny negative diagonals from rounding clamp to zero instead of NaN.
    r.covariance[2][2] = -1e-18;
    CHECK(r.tau1_err_ns() == 0.0);
}

TEST_CASE("error hierarchy groups fit failures under FitError") {
    CHECK_THROWS_AS(throw IllConditionedError("x"), FitError);
    CHECK_THROWS_AS(throw NonConvergenceError("x"), FitError);
    CHECK_THROWS_AS(throw CalibrationError("x"), FitError);
    CHECK_THROWS_AS(throw FitError("x"), Error);
    CHECK_THROWS_AS(throw ValidationError("x"), Error);
    CHECK_THROWS_AS(throw SimulationGuardError("x"), Error);
    CHECK_THROWS_AS(throw ConfigError("x"), Error);
    CHECK_THROWS_AS(throw IoError("x"), Error);
    CHECK_THROWS_AS(throw UnderDeterminedError("x"), Error);
    CHECK_THROWS_AS(throw NoSignificantExtremumError("x"), Error);
    CHECK_THROWS_AS(throw MissingPolarizationError("x"), Error);
}

TEST_CASE("ParseError carries the line number") {
    try {
        throw ParseError("bad token", 17);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 17") != std::string::npos);
    }
}
