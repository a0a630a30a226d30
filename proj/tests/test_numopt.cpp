#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "risloc/numopt.hpp"

using namespace risloc;

TEST_CASE("quadratic peak interpolation is exact on a parabola") {
    // w(x) = (x - x0)^2 sampled at -1, 0, 1 recovers x0 for |x0| <= 0.5
    for (double x0 : {-0.4, -0.1, 0.0, 0.25, 0.5}) {
        auto w = [x0](double x) { return (x - x0) * (x - x0); };
        CHECK(numopt::quadratic_peak(w(-1.0), w(0.0), w(1.0)) ==
              doctest::Approx(x0).epsilon(1e-12));
    }
    // flat samples: zero denominator handled
    CHECK(numopt::quadratic_peak(1.0, 1.0, 1.0) == 0.0);
    // offsets clamp to half a bin
    CHECK(std::abs(numopt::quadratic_peak(0.0, 0.1, 0.11)) <= 0.5);
}

TEST_CASE("bounded scalar maximization finds interior and boundary optima") {
    auto f = [](double x) { return -(x - 0.3) * (x - 0.3); };
    auto r = numopt::maximize_scalar_bounded(f, 0.0, 1.0, 0.0, 1e-10);
    CHECK(r.converged);
    CHECK(r.point[0] == doctest::Approx(0.3).epsilon(1e-6));

    // optimum outside the interval: must stop at the boundary
    auto g = [](double x) { return x; };
    auto rb = numopt::maximize_scalar_bounded(g, 0.0, 1.0, 0.5, 1e-10);
    CHECK(rb.point[0] == doctest::Approx(1.0).epsilon(1e-8));

    // never worse than the starting point
    auto noisy = [](double x) { return std::cos(40.0 * x); };
    auto rn = numopt::maximize_scalar_bounded(noisy, 0.0, 1.0, 0.2, 1e-10);
    CHECK(rn.value >= noisy(0.2) - 1e-12);

    CHECK_THROWS_AS(numopt::maximize_scalar_bounded(f, 0.0, 1.0, 2.0, 1e-10),
                    std::invalid_argument);
}

TEST_CASE("BFGS minimizes quadratics and Rosenbrock") {
    auto quad = [](const Eigen::VectorXd& x) {
        return (x(0) - 1.0) * (x(0) - 1.0) + 3.0 * (x(1) + 2.0) * (x(1) + 2.0);
    };
    auto r = numopt::minimize_nd(quad, Eigen::VectorXd::Zero(2), 1e-9);
    CHECK(r.converged);
    CHECK(r.point[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.point[1] == doctest::Approx(-2.0).epsilon(1e-5));

    auto rosen = [](const Eigen::VectorXd& x) {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    auto rr = numopt::minimize_nd(rosen, x0, 1e-7, 500);
    CHECK(rr.value < 1e-8);
    CHECK(rr.point[0] == doctest::Approx(1.0).epsilon(1e-3));

    // analytic gradient path agrees
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad =
        [](const Eigen::VectorXd& x) {
            Eigen::VectorXd g(2);
            g << 2.0 * (x(0) - 1.0), 6.0 * (x(1) + 2.0);
            return g;
        };
    auto ra = numopt::minimize_nd(quad, Eigen::VectorXd::Zero(2), 1e-9, 200, &grad);
    CHECK(ra.converged);
    CHECK(ra.point[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("2d and scalar wrappers reach the same optimum") {
    auto f2 = [](double x, double y) { return (x - 0.5) * (x - 0.5) + (y + 1.0) * (y + 1.0); };
    auto r2 = numopt::minimize_2d(f2, 0.0, 0.0, 1e-9);
    CHECK(r2.point[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(r2.point[1] == doctest::Approx(-1.0).epsilon(1e-5));

    auto f1 = [](double x) { return std::cosh(x - 2.0); };
    auto r1 = numopt::minimize_scalar(f1, 0.0, 1e-9);
    CHECK(r1.point[0] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("non-finite starting values are rejected") {
    auto bad = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(numopt::minimize_nd(bad, Eigen::VectorXd::Zero(1), 1e-9),
                    std::invalid_argument);
}
