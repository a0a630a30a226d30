#pragma once

#include <array>

#include "risloc/channel.hpp"

namespace risloc {

/// Positional parameter vector eta_po ordering:
/// [p_x, p_y, p_z, Delta_t, g_b,i, g_b,r, g_r,i, g_r,r].
struct PositionalParams {
    Vec3 position = Vec3::Zero();
    double clock_bias = 0.0;
    cd g_b{0.0, 0.0};
    cd g_r{0.0, 0.0};
};

struct SingularFimError : std::runtime_error {
    double condition_number;
    explicit SingularFimError(const std::string& what, double cond)
        : std::runtime_error(what), condition_number(cond) {}
};

struct CrbReport {
    double peb = 0.0;         // meters
    double ceb = 0.0;         // seconds
    double crb_tau_b = 0.0;   // seconds
    double crb_tau_r = 0.0;   // seconds
    double crb_phi_az = 0.0;  // radians
    double crb_phi_el = 0.0;  // radians
    Eigen::Matrix<double, 8, 8> fim_po;
    double condition_number = 0.0;
};

inline Vec3 wavenumber_grad_az(const Angles& phi, double lambda) {
    const double se = std::sin(phi.el);
    return -(2.0 * kPi / lambda) * Vec3(-se * std::sin(phi.az), se * std::cos(phi.az), 0.0);
}

inline Vec3 wavenumber_grad_el(const Angles& phi, double lambda) {
    const double ce = std::cos(phi.el), se = std::sin(phi.el);
    return -(2.0 * kPi / lambda) * Vec3(ce * std::cos(phi.az), ce * std::sin(phi.az), -se);
}

/// d a(phi) / d angle = a(phi) .* (-j g^T Q) for a wavenumber gradient g.
inline Eigen::VectorXcd steering_derivative(const Angles& phi, const RisGeometry& ris,
                                            double lambda, const Vec3& k_grad) {
    const Eigen::VectorXcd a = steering_vector(phi, ris, lambda);
    const auto q = element_positions(ris);
    Eigen::VectorXcd da(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) da(i) = a(i) * cd(0.0, -k_grad.dot(q[i]));
    return da;
}

/// Every dE/d[eta_ch]_a separates as f_a(n) g_a(t); the FIM then reduces
/// to Hadamard products of the two Gram matrices.
struct DerivativeFactors {
    Eigen::MatrixXcd n_factors;  // N x 8
    Eigen::MatrixXcd t_factors;  // T x 8
};

inline DerivativeFactors derivative_factors(const ChannelParams& params,
                                            const ScenarioConfig& cfg,
                                            const PhaseProfileSet& profiles) {
    const int n = cfg.n_subcarriers, t_count = cfg.n_symbols;
    const double df = cfg.subcarrier_spacing;
    const double root_es = std::sqrt(cfg.pilot_energy);
    const double lam = cfg.wavelength;

    const Eigen::VectorXcd db = delay_vector(params.tau_b, n, df);
    const Eigen::VectorXcd dr = delay_vector(params.tau_r, n, df);
    const Angles theta = aod_from_position(cfg.bs_position, cfg.ris);
    const Eigen::VectorXcd a_theta = steering_vector(theta, cfg.ris, lam);
    const Eigen::VectorXcd da_az =
        steering_derivative(params.phi, cfg.ris, lam, wavenumber_grad_az(params.phi, lam));
    const Eigen::VectorXcd da_el =
        steering_derivative(params.phi, cfg.ris, lam, wavenumber_grad_el(params.phi, lam));
    const Eigen::VectorXcd u =
        ris_response_sequence(params.phi, theta, profiles, cfg.ris, lam);

    DerivativeFactors out;
    out.n_factors.resize(n, 8);
    out.t_factors.resize(t_count, 8);
    const cd j(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const cd dn = -j * 2.0 * kPi * static_cast<double>(i) * df;
        const cd vb = root_es * db(i), vr = root_es * dr(i);
        out.n_factors(i, 0) = dn * params.g_b * vb;
        out.n_factors(i, 1) = dn * params.g_r * vr;
        out.n_factors(i, 2) = params.g_r * vr;
        out.n_factors(i, 3) = params.g_r * vr;
        out.n_factors(i, 4) = j * vb;
        out.n_factors(i, 5) = vb;
        out.n_factors(i, 6) = j * vr;
        out.n_factors(i, 7) = vr;
    }
    for (int t = 0; t < t_count; ++t) {
        // z_t = gamma_t .* a(theta)
        const Eigen::VectorXcd zt = profiles.vectorized[t].cwiseProduct(a_theta);
        const cd c_az = zt.cwiseProduct(da_az).sum();
        const cd c_el = zt.cwiseProduct(da_el).sum();
        out.t_factors(t, 0) = 1.0;
        out.t_factors(t, 1) = u(t);
        out.t_factors(t, 2) = c_az;
        out.t_factors(t, 3) = c_el;
        out.t_factors(t, 4) = 1.0;
        out.t_factors(t, 5) = 1.0;
        out.t_factors(t, 6) = u(t);
        out.t_factors(t, 7) = u(t);
    }
    return out;
}

/// The eight dE/d eta_ch matrices, eta_ch ordering
/// [tau_b, tau_r, phi_az, phi_el, g_b,i, g_b,r, g_r,i, g_r,r].
inline std::array<Eigen::MatrixXcd, 8> derivatives_E(const ChannelParams& params,
                                                     const ScenarioConfig& cfg,
                                                     const PhaseProfileSet& profiles) {
    const DerivativeFactors f = derivative_factors(params, cfg, profiles);
    std::array<Eigen::MatrixXcd, 8> out;
    for (int a = 0; a < 8; ++a)
        out[a] = f.n_factors.col(a) * f.t_factors.col(a).transpose();
    return out;
}

/// J_ch = (2/sigma^2) sum_{n,t} Re{ dE dE^H }, evaluated through the
/// separable factors.
inline Eigen::Matrix<double, 8, 8> fim_channel(const ChannelParams& params,
                                               const ScenarioConfig& cfg,
                                               const PhaseProfileSet& profiles) {
    if (cfg.noise_variance <= 0.0)
        throw std::invalid_argument("FIM is undefined for zero noise variance");
    const DerivativeFactors f = derivative_factors(params, cfg, profiles);
    const Eigen::Matrix<cd, 8, 8> gram_n = f.n_factors.adjoint() * f.n_factors;
    const Eigen::Matrix<cd, 8, 8> gram_t = f.t_factors.adjoint() * f.t_factors;
    return (2.0 / cfg.noise_variance) * gram_n.cwiseProduct(gram_t).real();
}

inline constexpr double kElevationGradEps = 1e-9;

/// Jacobian d eta_ch / d eta_po at the given positional parameters.
inline Eigen::Matrix<double, 8, 8> jacobian(const PositionalParams& po,
                                            const ScenarioConfig& cfg) {
    const Vec3& p = po.position;
    const Vec3& pb = cfg.bs_position;
    const Vec3& pr = cfg.ris.origin;
    const Mat3& rot = cfg.ris.rotation;
    const double d_bs = (p - pb).norm();
    const double d_ris = (p - pr).norm();
    if (d_bs < kCoincidentEps || d_ris < kCoincidentEps)
        throw std::invalid_argument("UE coincides with the BS or the RIS");
    const Vec3 s = rot * (p - pr);
    const double s12 = std::hypot(s.x(), s.y());
    if (s12 < kElevationGradEps)
        throw std::invalid_argument("degenerate geometry: UE on the RIS boresight axis");

    Eigen::Matrix<double, 8, 8> jac = Eigen::Matrix<double, 8, 8>::Zero();
    jac.block<1, 3>(0, 0) = (p - pb).transpose() / (kSpeedOfLight * d_bs);
    jac.block<1, 3>(1, 0) = (p - pr).transpose() / (kSpeedOfLight * d_ris);
    jac(0, 3) = 1.0;
    jac(1, 3) = 1.0;
    jac.block<1, 3>(2, 0) =
        (-s.y() * rot.row(0) + s.x() * rot.row(1)) / (s12 * s12);
    jac.block<1, 3>(3, 0) =
        (-(d_ris * d_ris) * rot.row(2) + (p - pr).transpose() * s.z()) /
        (d_ris * d_ris * s12);
    jac.block<4, 4>(4, 4).setIdentity();
    return jac;
}

inline ChannelParams channel_params_from_positional(const PositionalParams& po,
                                                    const ScenarioConfig& cfg) {
    ScenarioConfig c = cfg;
    c.ue_position = po.position;
    c.clock_bias = po.clock_bias;
    c.gain_model = ExplicitGains{po.g_b, po.g_r};
    return derive_channel_params(c);
}

inline constexpr double kMaxFimCondition = 1e12;

namespace detail {
/// Inverts a symmetric positive definite matrix. The parameters mix
/// seconds, meters, and unit gains, so the raw condition number is
/// dominated by units; equilibrate by the diagonal first and judge
/// conditioning on the scaled matrix.
inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& m, double& cond,
                                  const char* what) {
    const Eigen::VectorXd diag = m.diagonal();
    cond = std::numeric_limits<double>::infinity();
    if ((diag.array() <= 0.0).any())
        throw SingularFimError(std::string(what) + " has a non-positive diagonal entry",
                               cond);
    const Eigen::VectorXd s = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = s.asDiagonal() * m * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
    const auto& ev = es.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double emin = ev.minCoeff();
    cond = (emin > 0.0) ? emax / emin : std::numeric_limits<double>::infinity();
    if (!(emin > 0.0) || cond > kMaxFimCondition)
        throw SingularFimError(std::string(what) + " is singular or ill-conditioned (cond=" +
                                   std::to_string(cond) + ")",
                               cond);
    const Eigen::MatrixXd inv_scaled =
        es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return s.asDiagonal() * inv_scaled * s.asDiagonal();
}
}  // namespace detail

/// Position, clock-bias and channel-parameter bounds at eta_po.
inline CrbReport crb(const PositionalParams& po, const ScenarioConfig& cfg,
                     const PhaseProfileSet& profiles) {
    if (static_cast<long long>(cfg.n_symbols) * cfg.n_subcarriers < 4)
        throw SingularFimError("TN < 4: problem not identifiable",
                               std::numeric_limits<double>::infinity());
    const ChannelParams ch = channel_params_from_positional(po, cfg);
    const Eigen::Matrix<double, 8, 8> j_ch = fim_channel(ch, cfg, profiles);
    const Eigen::Matrix<double, 8, 8> jac = jacobian(po, cfg);

    CrbReport out;
    out.fim_po = jac.transpose() * j_ch * jac;
    const Eigen::MatrixXd inv_po = detail::invert_spd(out.fim_po, out.condition_number,
                                                      "positional FIM");
    double cond_ch = 0.0;
    const Eigen::MatrixXd inv_ch = detail::invert_spd(j_ch, cond_ch, "channel FIM");
    out.peb = std::sqrt(inv_po.topLeftCorner<3, 3>().trace());
    out.ceb = std::sqrt(inv_po(3, 3));
    out.crb_tau_b = std::sqrt(inv_ch(0, 0));
    out.crb_tau_r = std::sqrt(inv_ch(1, 1));
    out.crb_phi_az = std::sqrt(inv_ch(2, 2));
    out.crb_phi_el = std::sqrt(inv_ch(3, 3));
    return out;
}

}  // namespace risloc
