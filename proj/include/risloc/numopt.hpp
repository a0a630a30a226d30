#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace risloc::numopt {

struct OptimResult {
    std::vector<double> point;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double fd_step(double x, double rel = 1e-7) {
    return rel * std::max(1.0, std::abs(x));
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace detail

/// Stationary point of f on [lo, hi] starting from x0 (projected
/// Newton steps with finite-difference curvature, falling back to a
/// golden-section bracket if the quadratic model misbehaves). Never
/// returns a point worse than x0.
inline OptimResult maximize_scalar_bounded(const std::function<double(double)>& f, double lo,
                                           double hi, double x0, double tol,
                                           int max_iter = 200) {
    if (!(lo <= x0 && x0 <= hi)) throw std::invalid_argument("x0 outside [lo, hi]");
    OptimResult res;
    double x = x0;
    double fx = f(x);
    const double span = hi - lo;
    int it = 0;
    if (span > 0.0) {
        for (; it < max_iter; ++it) {
            const double h = std::min(detail::fd_step(x, 1e-6 * span / std::max(span, 1.0)),
                                      span * 1e-6) + 1e-300;
            const double xm = std::max(lo, x - h), xp = std::min(hi, x + h);
            const double fm = f(xm), fp = f(xp);
            const double g = (fp - fm) / (xp - xm);
            const double c = (fp - 2.0 * fx + fm) / (h * h);
            double step;
            if (c < 0.0)
                step = -g / c;  // Newton toward the maximum
            else
                step = (g > 0.0 ? 1.0 : -1.0) * 0.1 * span;
            double xn = std::clamp(x + step, lo, hi);
            double fn = f(xn);
            // backtrack until improvement
            int bt = 0;
            while (fn < fx && bt < 40) {
                xn = x + 0.5 * (xn - x);
                fn = f(xn);
                ++bt;
            }
            if (fn < fx) {
                // no improving point found: current x is locally optimal
                res.converged = true;
                ++it;
                break;
            }
            const double moved = std::abs(xn - x);
            x = xn;
            fx = fn;
            if (moved < tol) {
                res.converged = true;
                ++it;
                break;
            }
        }
    } else {
        res.converged = true;
    }
    res.point = {x};
    res.value = fx;
    res.iterations = it;
    return res;
}

/// BFGS with backtracking Armijo line search; gradients by central
/// finite differences unless supplied.
inline OptimResult minimize_nd(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x0, double grad_tol,
                               int max_iter = 200,
                               const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>*
                                   grad_fn = nullptr) {
    const Eigen::Index dim = x0.size();
    auto num_grad = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double h = detail::fd_step(x(i));
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            g(i) = (f(xp) - f(xm)) / (2.0 * h);
        }
        return g;
    };
    auto grad = [&](const Eigen::VectorXd& x) {
        return grad_fn ? (*grad_fn)(x) : num_grad(x);
    };

    OptimResult res;
    Eigen::VectorXd x = x0;
    double fx = f(x);
    if (!std::isfinite(fx)) throw std::invalid_argument("objective not finite at x0");
    Eigen::VectorXd g = grad(x);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
    int it = 0;
    for (; it < max_iter; ++it) {
        if (g.norm() < grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -h_inv * g;
        if (dir.dot(g) >= 0.0) dir = -g;  // reset on loss of descent
        double alpha = 1.0;
        const double slope = dir.dot(g);
        double fn = fx;
        Eigen::VectorXd xn = x;
        int bt = 0;
        for (; bt < 60; ++bt) {
            xn = x + alpha * dir;
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
        }
        if (bt == 60) break;  // line search failed
        const Eigen::VectorXd gn = grad(xn);
        const Eigen::VectorXd s = xn - x, y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
            const Eigen::MatrixXd v = eye - (s * y.transpose()) / sy;
            h_inv = v * h_inv * v.transpose() + (s * s.transpose()) / sy;
        }
        x = xn;
        fx = fn;
        g = gn;
        if (s.norm() < 1e-15 * std::max(1.0, x.norm())) {
            res.converged = g.norm() < grad_tol * 10;
            ++it;
            break;
        }
    }
    if (it == max_iter && g.norm() < grad_tol) res.converged = true;
    res.point.assign(x.data(), x.data() + dim);
    res.value = fx;
    res.iterations = it;
    return res;
}

inline OptimResult minimize_2d(const std::function<double(double, double)>& f, double x0,
                               double y0, double tol, int max_iter = 200) {
    Eigen::VectorXd start(2);
    start << x0, y0;
    return minimize_nd([&](const Eigen::VectorXd& v) { return f(v(0), v(1)); }, start, tol,
                       max_iter);
}

inline OptimResult minimize_scalar(const std::function<double(double)>& f, double x0,
                                   double tol, int max_iter = 200) {
    Eigen::VectorXd start(1);
    start << x0;
    return minimize_nd([&](const Eigen::VectorXd& v) { return f(v(0)); }, start, tol,
                       max_iter);
}

/// Fractional offset of the vertex of the parabola through
/// (-1, w_minus), (0, w_center), (1, w_plus), clamped to half a bin.
inline double quadratic_peak(double w_minus, double w_center, double w_plus) {
    const double denom = 2.0 * (w_minus + w_plus - 2.0 * w_center);
    if (denom == 0.0) return 0.0;
    return std::clamp((w_minus - w_plus) / denom, -0.5, 0.5);
}

}  // namespace risloc::numopt
