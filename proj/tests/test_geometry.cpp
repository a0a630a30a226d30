#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "risloc/geometry.hpp"

using namespace risloc;

TEST_CASE("wavenumber has magnitude 2 pi / lambda and the expected direction") {
    const double lam = 0.01;
    const Angles psi{0.3, 1.1};
    const Vec3 k = wavenumber(psi, lam);
    CHECK(k.norm() == doctest::Approx(2.0 * kPi / lam).epsilon(1e-12));
    CHECK(k.x() == doctest::Approx(-(2.0 * kPi / lam) * std::sin(1.1) * std::cos(0.3)));
    CHECK(k.y() == doctest::Approx(-(2.0 * kPi / lam) * std::sin(1.1) * std::sin(0.3)));
    CHECK(k.z() == doctest::Approx(-(2.0 * kPi / lam) * std::cos(1.1)));
    CHECK_THROWS_AS(wavenumber(psi, 0.0), std::invalid_argument);
}

TEST_CASE("aod_from_position inverts the spherical placement") {
    RisGeometry ris;
    ris.origin = Vec3(1.0, -2.0, 0.5);
    // a nontrivial proper rotation (about z by 40 degrees)
    const double c = std::cos(0.7), s = std::sin(0.7);
    ris.rotation << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    validate_rotation(ris.rotation);

    const Angles want{0.4, 1.2};
    const double r = 7.0;
    // build p so that the *array-frame* direction matches the angles
    const Vec3 dir_local(std::sin(want.el) * std::cos(want.az),
                         std::sin(want.el) * std::sin(want.az), std::cos(want.el));
    const Vec3 p = ris.origin + r * ris.rotation.transpose() * dir_local;
    const Angles got = aod_from_position(p, ris);
    CHECK(got.az == doctest::Approx(want.az).epsilon(1e-10));
    CHECK(got.el == doctest::Approx(want.el).epsilon(1e-10));
    CHECK_FALSE(got.degenerate_azimuth);
}

TEST_CASE("on-axis points flag the azimuth as degenerate") {
    RisGeometry ris;
    const Angles got = aod_from_position(Vec3(0.0, 0.0, 3.0), ris);
    CHECK(got.az == 0.0);
    CHECK(got.el == doctest::Approx(0.0));
    CHECK(got.degenerate_azimuth);
    CHECK_THROWS_AS(aod_from_position(Vec3::Zero(), ris), std::invalid_argument);
}

TEST_CASE("rotation validation rejects non-orthonormal and reflecting matrices") {
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(validate_rotation(bad), std::invalid_argument);
    Mat3 reflect = Mat3::Identity();
    reflect(2, 2) = -1.0;
    CHECK_THROWS_AS(validate_rotation(reflect), std::invalid_argument);
    CHECK_NOTHROW(validate_rotation(Mat3::Identity()));
}

TEST_CASE("element positions are centered, planar, column-major") {
    RisGeometry ris;
    ris.m_rows = 3;
    ris.m_cols = 4;
    ris.spacing = 0.005;
    const auto q = element_positions(ris);
    REQUIRE(q.size() == 12);
    Vec3 mean = Vec3::Zero();
    for (const auto& v : q) {
        mean += v;
        CHECK(v.y() == 0.0);
    }
    CHECK(mean.norm() == doctest::Approx(0.0).epsilon(1e-15));
    // index = l + m * m_rows; row index moves along x, column along z
    CHECK((q[1] - q[0]).isApprox(Vec3(0.005, 0.0, 0.0), 1e-12));
    CHECK((q[3] - q[0]).isApprox(Vec3(0.0, 0.0, 0.005), 1e-12));
}

TEST_CASE("steering vector equals the per-element phase law and the Kronecker form") {
    RisGeometry ris;
    ris.m_rows = 3;
    ris.m_cols = 5;
    ris.spacing = 0.004;
    const double lam = 0.01;
    const Angles psi{-0.8, 0.9};
    const Eigen::VectorXcd a = steering_vector(psi, ris, lam);
    REQUIRE(a.size() == 15);

    // oracle: exp(-j k(psi) . q) element by element over centered positions
    const Vec3 k = wavenumber(psi, lam);
    const auto q = element_positions(ris);
    for (int i = 0; i < 15; ++i) {
        const cd want = std::exp(cd(0.0, -k.dot(q[i])));
        CHECK(std::abs(a(i) - want) < 1e-12);
    }

    // Kronecker composition a_c kron a_r
    const Eigen::VectorXcd ar = steering_row_factor(psi, ris, lam);
    const Eigen::VectorXcd ac = steering_col_factor(psi, ris, lam);
    for (int m = 0; m < 5; ++m)
        for (int l = 0; l < 3; ++l) CHECK(std::abs(a(l + 3 * m) - ac(m) * ar(l)) < 1e-12);
}

TEST_CASE("geometry validation rejects bad dimensions") {
    RisGeometry ris;
    ris.m_rows = 0;
    CHECK_THROWS_AS(ris.validate(), std::invalid_argument);
    ris.m_rows = 2;
    ris.spacing = 0.0;
    CHECK_THROWS_AS(ris.validate(), std::invalid_argument);
}
