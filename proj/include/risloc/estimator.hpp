#pragma once

#include "risloc/channel.hpp"
#include "risloc/fft.hpp"
#include "risloc/numopt.hpp"

namespace risloc {

struct EstimatorConfig {
    int n_fft_delay = 4096;  // N_F
    int n_fft_rows = 256;    // N_F_r
    int n_fft_cols = 256;    // N_F_c
    // passes > 1 rerun the delay/angle stages after cancelling the
    // reconstructed reflected component, removing the bias the paths
    // induce on each other when their delays are unresolved in bandwidth
    int refine_passes = 3;
    double delay_tol_bins = 1e-9;  // refinement tolerance, units of 1/(N_F df)
    double angle_tol = 1e-8;       // rad
    double kappa_tol = 1e-9;       // m (converted to the delay residual scale)
    int max_iterations = 200;

    void validate(const ScenarioConfig& cfg) const {
        if (n_fft_delay < cfg.n_subcarriers)
            throw std::invalid_argument("N_F must be >= N");
        if (n_fft_rows < cfg.ris.m_rows || n_fft_cols < cfg.ris.m_cols)
            throw std::invalid_argument("2D IFFT size must cover the RIS dimensions");
    }
};

struct EstimateReport {
    double tau_b_hat = 0.0;
    double tau_r_hat = 0.0;
    Angles phi_hat;
    cd g_b_hat{0.0, 0.0};  // absorbs sqrt(Es)
    Vec3 p_hat = Vec3::Zero();
    double clock_bias_hat = 0.0;

    // stage diagnostics
    int k_b = 0, k_r = 0;          // coarse delay bins
    double delta_b = 0.0, delta_r = 0.0;
    int l_idx = 0, m_idx = 0;      // coarse AOD bins
    double kappa = 0.0;            // estimated RIS-UE range
    bool tau_order_violation = false;  // tau_r_hat < tau_b_hat
    bool invalid_aod_branch = false;   // k1^2 + k3^2 exceeded (2pi/lambda)^2
    bool refinement_converged = true;
    double los_dominance = 0.0;    // T*BS amplitude over residual column-sum amplitude
};

namespace detail {

/// |e_k^T F (y .* d(delta))| evaluated directly, O(N).
inline double delay_bin_response(const Eigen::VectorXcd& y, int k, double delta, int nf,
                                 double df) {
    cd acc(0.0, 0.0);
    const int n = static_cast<int>(y.size());
    for (int i = 0; i < n; ++i)
        acc += y(i) * std::polar(1.0, 2.0 * kPi * k * i / nf - 2.0 * kPi * delta * i * df);
    return std::abs(acc) / nf;
}

inline double wrap_to_period(double x, double period) {
    double w = std::fmod(x, period);
    if (w < 0.0) w += period;
    return w;
}

}  // namespace detail

struct TauBResult {
    double tau_b_hat = 0.0;
    cd g_b_hat{0.0, 0.0};
    Eigen::VectorXcd y_c;
    int k = 0;
    double delta = 0.0;
    bool converged = true;
};

/// Stage 1: LOS delay from the column sum of Y. The coarse IFFT peak is
/// refined over an artificial delay in [0, 1/(N_F df)] with the bin
/// held fixed.
inline TauBResult estimate_tau_b(const Eigen::MatrixXcd& y, const ScenarioConfig& cfg,
                                 const EstimatorConfig& est) {
    if (cfg.n_subcarriers < 2)
        throw std::invalid_argument("N >= 2 required to estimate delays");
    est.validate(cfg);
    const int nf = est.n_fft_delay;
    const double df = cfg.subcarrier_spacing;
    const double bin = 1.0 / (nf * df);

    TauBResult out;
    out.y_c = y.rowwise().sum();
    const Eigen::VectorXcd bar = detail::ifft_padded(out.y_c, nf);
    Eigen::Index k = 0;
    bar.cwiseAbs().maxCoeff(&k);  // ties resolve to the smallest index

    // tau = k/(N_F df) - delta with delta in [0, 1/(N_F df)] only covers
    // delays at or below bin k; when the coarse argmax is the bin below
    // the true delay the exact offset lives at bin k+1, so refine both
    // candidates and keep the stronger response
    out.converged = true;
    double best = -1.0;
    for (int cand : {static_cast<int>(k), static_cast<int>((k + 1) % nf)}) {
        const auto refined = numopt::maximize_scalar_bounded(
            [&](double delta) { return detail::delay_bin_response(out.y_c, cand, delta, nf, df); },
            0.0, bin, 0.0, est.delay_tol_bins * bin, est.max_iterations);
        if (refined.value > best) {
            best = refined.value;
            out.k = cand;
            out.delta = refined.point[0];
            out.converged = refined.converged;
        }
    }
    out.tau_b_hat = detail::wrap_to_period(out.k * bin - out.delta, 1.0 / df);

    const Eigen::VectorXcd comp =
        out.y_c.cwiseProduct(delay_vector(-out.tau_b_hat, cfg.n_subcarriers, df));
    out.g_b_hat = comp.sum() / static_cast<double>(cfg.n_symbols * cfg.n_subcarriers);
    return out;
}

struct TauRResult {
    double tau_r_hat = 0.0;
    Eigen::MatrixXcd y_r;  // BS contribution removed
    int k = 0;
    double delta = 0.0;
    bool converged = true;
};

/// Stage 2: reflected-path delay after removing the estimated BS term.
inline TauRResult estimate_tau_r(const Eigen::MatrixXcd& y, double tau_b_hat, cd g_b_hat,
                                 const ScenarioConfig& cfg, const EstimatorConfig& est) {
    const int nf = est.n_fft_delay;
    const double df = cfg.subcarrier_spacing;
    const double bin = 1.0 / (nf * df);

    TauRResult out;
    out.y_r = y;
    const Eigen::VectorXcd db = delay_vector(tau_b_hat, cfg.n_subcarriers, df);
    for (Eigen::Index t = 0; t < out.y_r.cols(); ++t) out.y_r.col(t) -= g_b_hat * db;

    Eigen::VectorXd row_energy = Eigen::VectorXd::Zero(nf);
    for (Eigen::Index t = 0; t < out.y_r.cols(); ++t)
        row_energy += detail::ifft_padded(out.y_r.col(t), nf).cwiseAbs2();
    Eigen::Index k = 0;
    row_energy.maxCoeff(&k);

    auto row_norm = [&](int kbin, double delta) {
        double acc = 0.0;
        const int n = cfg.n_subcarriers;
        for (Eigen::Index t = 0; t < out.y_r.cols(); ++t) {
            cd s(0.0, 0.0);
            for (int i = 0; i < n; ++i)
                s += out.y_r(i, t) *
                     std::polar(1.0, 2.0 * kPi * kbin * i / nf - 2.0 * kPi * delta * i * df);
            acc += std::norm(s);
        }
        return std::sqrt(acc) / nf;
    };
    // same two-bin refinement as the LOS stage
    out.converged = true;
    double best = -1.0;
    for (int cand : {static_cast<int>(k), static_cast<int>((k + 1) % nf)}) {
        const auto refined = numopt::maximize_scalar_bounded(
            [&](double delta) { return row_norm(cand, delta); }, 0.0, bin, 0.0,
            est.delay_tol_bins * bin, est.max_iterations);
        if (refined.value > best) {
            best = refined.value;
            out.k = cand;
            out.delta = refined.point[0];
            out.converged = refined.converged;
        }
    }
    out.tau_r_hat = detail::wrap_to_period(out.k * bin - out.delta, 1.0 / df);
    // the reflected path cannot precede the LOS path; the model is
    // periodic in tau with period 1/df, so unwrap into [tau_b, tau_b + 1/df)
    if (out.tau_r_hat < tau_b_hat) out.tau_r_hat += 1.0 / df;
    return out;
}

struct AodResult {
    Angles phi_hat;
    int l_idx = 0, m_idx = 0;
    bool invalid_branch = false;
    bool converged = true;
};

/// Stage 3: AOD via the 2D IFFT grid over the phase-profile matrices,
/// quadratic interpolation, wavenumber inversion (negative k2 branch,
/// i.e. the s_2 > 0 half-space) and quasi-Newton refinement.
inline AodResult estimate_aod(const Eigen::MatrixXcd& y_r, double tau_r_hat,
                              const Angles& theta, const PhaseProfileSet& profiles,
                              const ScenarioConfig& cfg, const EstimatorConfig& est) {
    const int t_count = cfg.n_symbols;
    if (static_cast<int>(profiles.vectorized.size()) != t_count)
        throw std::invalid_argument("profile count does not match T");
    if (cfg.ris.element_count() == 1)
        throw std::invalid_argument("AOD unidentifiable: single-element RIS has no aperture");
    {
        // all-parallel profiles carry no angle information
        const double m = static_cast<double>(cfg.ris.element_count());
        bool all_parallel = true;
        for (int t = 1; t < t_count && all_parallel; ++t)
            all_parallel = std::abs(profiles.vectorized[0].dot(profiles.vectorized[t])) >
                           m * (1.0 - 1e-9);
        if (all_parallel)
            throw std::invalid_argument("AOD unidentifiable: all phase profiles parallel");
    }

    const int nfr = est.n_fft_rows, nfc = est.n_fft_cols;
    const double df = cfg.subcarrier_spacing;
    const double lam = cfg.wavelength;
    const double d = cfg.ris.spacing;

    // y_phi = (Y_r .* d(-tau_r) 1^T)^T 1_N
    const Eigen::VectorXcd comp = delay_vector(-tau_r_hat, cfg.n_subcarriers, df);
    Eigen::VectorXcd y_phi(t_count);
    for (int t = 0; t < t_count; ++t) y_phi(t) = y_r.col(t).cwiseProduct(comp).sum();

    // A(theta) = a_r(theta) a_c(theta)^T
    const Eigen::MatrixXcd a_theta = steering_row_factor(theta, cfg.ris, lam) *
                                     steering_col_factor(theta, cfg.ris, lam).transpose();

    // Streaming accumulation of |eta|^2 and eta^H y over the grid.
    Eigen::MatrixXd s_grid = Eigen::MatrixXd::Zero(nfr, nfc);
    Eigen::MatrixXcd g_grid = Eigen::MatrixXcd::Zero(nfr, nfc);
    for (int t = 0; t < t_count; ++t) {
        const Eigen::MatrixXcd bar =
            detail::ifft2_padded(profiles.profiles[t].cwiseProduct(a_theta), nfr, nfc);
        s_grid += bar.cwiseAbs2();
        g_grid += bar.conjugate() * y_phi(t);
    }
    const double y_energy = y_phi.squaredNorm();
    // w_{l,m} = ||y||^2 - |eta^H y|^2 / ||eta||^2
    const Eigen::MatrixXd w =
        y_energy - (g_grid.cwiseAbs2().array() / s_grid.array().max(1e-300)).matrix().array();

    AodResult out;
    Eigen::Index li = 0, mi = 0;
    w.minCoeff(&li, &mi);
    out.l_idx = static_cast<int>(li);
    out.m_idx = static_cast<int>(mi);

    // neighbors wrap at the grid edges
    const int lm1 = (out.l_idx + nfr - 1) % nfr, lp1 = (out.l_idx + 1) % nfr;
    const int mm1 = (out.m_idx + nfc - 1) % nfc, mp1 = (out.m_idx + 1) % nfc;
    const double lq = out.l_idx + numopt::quadratic_peak(w(lm1, out.m_idx), w(out.l_idx, out.m_idx),
                                                         w(lp1, out.m_idx));
    const double mq = out.m_idx + numopt::quadratic_peak(w(out.l_idx, mm1), w(out.l_idx, out.m_idx),
                                                         w(out.l_idx, mp1));

    // invert the grid mapping: k d = -2 pi idx / nf (mod 2 pi), principal value
    auto grid_to_k = [d](double idx, int nf) {
        double k = -2.0 * kPi * idx / (nf * d);
        if (k <= -kPi / d) k += 2.0 * kPi / d;
        return k;
    };
    const double k1 = grid_to_k(lq, nfr);
    const double k3 = grid_to_k(mq, nfc);
    const double k_mag = 2.0 * kPi / lam;
    double rad2 = k_mag * k_mag - k1 * k1 - k3 * k3;
    if (rad2 < 0.0) {
        out.invalid_branch = true;
        rad2 = 0.0;
    }
    const double k2 = -std::sqrt(rad2);
    Angles init;
    init.az = std::atan2(-k2, -k1);
    init.el = std::acos(std::clamp(-lam * k3 / (2.0 * kPi), -1.0, 1.0));

    // quasi-Newton refinement of the projection residual, normalized to
    // [0, 1] so the gradient tolerance is scale-free
    auto objective = [&](double az, double el) {
        const Eigen::VectorXcd u =
            ris_response_sequence(Angles{az, el}, theta, profiles, cfg.ris, lam);
        const double un = u.squaredNorm();
        if (un <= 0.0 || y_energy <= 0.0) return 1.0;
        return 1.0 - std::norm(u.dot(y_phi)) / (un * y_energy);
    };
    const auto refined =
        numopt::minimize_2d(objective, init.az, init.el, est.angle_tol, est.max_iterations);
    out.converged = refined.converged;
    out.phi_hat.az = refined.point[0];
    out.phi_hat.el = refined.point[1];
    return out;
}

struct PositionResult {
    Vec3 p_hat = Vec3::Zero();
    double clock_bias_hat = 0.0;
    double kappa = 0.0;
    bool converged = true;
};

/// Stage 4: intersect the AOD ray from the RIS with the range-difference
/// hyperboloid, then back out the clock bias.
inline PositionResult solve_position(double tau_b_hat, double tau_r_hat, const Angles& phi_hat,
                                     const ScenarioConfig& cfg, const EstimatorConfig& est) {
    if (!(tau_r_hat > tau_b_hat))
        throw std::invalid_argument("reflected path must arrive after the LOS path");
    const double rd = kSpeedOfLight * (tau_r_hat - tau_b_hat);  // range difference, meters
    const double se = std::sin(phi_hat.el);
    const Vec3 dir_local(se * std::cos(phi_hat.az), se * std::sin(phi_hat.az),
                         std::cos(phi_hat.el));
    const Vec3 dir = cfg.ris.rotation.transpose() * dir_local;  // unit ray direction, global
    const Vec3 base = cfg.bs_position - cfg.ris.origin;
    const double d_bs_ris = base.norm();

    auto residual = [&](double kappa) {
        const double v =
            std::abs(kappa) + d_bs_ris - (base - kappa * dir).norm() - rd;
        return v * v;
    };
    const double kappa0 = (rd + d_bs_ris) / 2.0;
    const auto sol = numopt::minimize_scalar(residual, kappa0, est.kappa_tol,
                                             est.max_iterations);
    PositionResult out;
    out.kappa = std::max(sol.point[0], 0.0);
    out.converged = sol.converged;
    out.p_hat = cfg.ris.origin + out.kappa * dir;
    out.clock_bias_hat = detail::wrap_to_period(
        tau_b_hat - (out.p_hat - cfg.bs_position).norm() / kSpeedOfLight,
        1.0 / cfg.subcarrier_spacing);
    return out;
}

/// Full four-stage pipeline.
inline EstimateReport estimate(const Eigen::MatrixXcd& y, const ScenarioConfig& cfg,
                               const PhaseProfileSet& profiles, const EstimatorConfig& est) {
    const Angles theta = aod_from_position(cfg.bs_position, cfg.ris);

    TauBResult s1 = estimate_tau_b(y, cfg, est);
    TauRResult s2 = estimate_tau_r(y, s1.tau_b_hat, s1.g_b_hat, cfg, est);
    AodResult s3 = estimate_aod(s2.y_r, s2.tau_r_hat, theta, profiles, cfg, est);

    // When the two path delays are closer than the delay resolution
    // 1/(N df) each stage is biased by the component it does not model.
    // Reconstruct the reflected term from the current estimates, cancel
    // it from the LOS stage input, and rerun the stages.
    for (int pass = 1; pass < est.refine_passes; ++pass) {
        const Eigen::VectorXcd u =
            ris_response_sequence(s3.phi_hat, theta, profiles, cfg.ris, cfg.wavelength);
        const double un = u.squaredNorm();
        if (un <= 0.0) break;
        const Eigen::VectorXcd dr =
            delay_vector(s2.tau_r_hat, cfg.n_subcarriers, cfg.subcarrier_spacing);
        const Eigen::VectorXcd db =
            delay_vector(s1.tau_b_hat, cfg.n_subcarriers, cfg.subcarrier_spacing);
        // joint least squares over both path amplitudes: fitting the
        // reflected amplitude alone would absorb LOS leakage through the
        // large cross-correlation of the unresolved delay vectors
        const double nt = static_cast<double>(cfg.n_subcarriers) * cfg.n_symbols;
        const cd cross = (db.adjoint() * dr).value() * u.sum();
        Eigen::Matrix2cd gram;
        gram << cd(nt, 0.0), cross, std::conj(cross),
            cd(static_cast<double>(cfg.n_subcarriers) * un, 0.0);
        Eigen::Vector2cd rhs;
        rhs << (db.adjoint() * y).sum(), (dr.adjoint() * y * u.conjugate()).value();
        const Eigen::FullPivLU<Eigen::Matrix2cd> lu(gram);
        if (!lu.isInvertible()) break;
        const Eigen::Vector2cd amps = lu.solve(rhs);
        const Eigen::MatrixXcd y_los = y - amps(1) * dr * u.transpose();
        s1 = estimate_tau_b(y_los, cfg, est);
        s2 = estimate_tau_r(y, s1.tau_b_hat, s1.g_b_hat, cfg, est);
        s3 = estimate_aod(s2.y_r, s2.tau_r_hat, theta, profiles, cfg, est);
    }

    EstimateReport rep;
    rep.tau_b_hat = s1.tau_b_hat;
    rep.tau_r_hat = s2.tau_r_hat;
    rep.g_b_hat = s1.g_b_hat;
    rep.phi_hat = s3.phi_hat;
    rep.k_b = s1.k;
    rep.delta_b = s1.delta;
    rep.k_r = s2.k;
    rep.delta_r = s2.delta;
    rep.l_idx = s3.l_idx;
    rep.m_idx = s3.m_idx;
    rep.invalid_aod_branch = s3.invalid_branch;
    rep.refinement_converged = s1.converged && s2.converged && s3.converged;
    rep.tau_order_violation = !(rep.tau_r_hat > rep.tau_b_hat);

    // quality of the LOS-dominance approximation behind the column-sum
    // stage: T * LOS amplitude against the residual column-sum amplitude
    // after BS removal
    const double resid = (s2.y_r * Eigen::VectorXcd::Ones(cfg.n_symbols)).norm();
    const double los = cfg.n_symbols * std::abs(s1.g_b_hat) *
                       std::sqrt(static_cast<double>(cfg.n_subcarriers));
    rep.los_dominance = (resid > 0.0) ? los / resid : std::numeric_limits<double>::infinity();

    if (!rep.tau_order_violation) {
        const PositionResult s4 =
            solve_position(rep.tau_b_hat, rep.tau_r_hat, rep.phi_hat, cfg, est);
        rep.p_hat = s4.p_hat;
        rep.clock_bias_hat = s4.clock_bias_hat;
        rep.kappa = s4.kappa;
        rep.refinement_converged = rep.refinement_converged && s4.converged;
    }
    return rep;
}

}  // namespace risloc
