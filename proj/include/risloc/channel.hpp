#pragma once

#include <optional>
#include <random>
#include <variant>

#include "risloc/geometry.hpp"

namespace risloc {

inline constexpr double kSpeedOfLight = 3.0e8;  // m/s, as in the simulations

/// Path gains computed from the free-space link budget with unit
/// directivity; phases drawn uniformly per trial.
struct FriisGains {};

/// Explicit complex path gains, mainly for deterministic tests.
struct ExplicitGains {
    cd g_b{0.0, 0.0};
    cd g_r{0.0, 0.0};
};

using GainModel = std::variant<FriisGains, ExplicitGains>;

/// One experiment: waveform, powers, and geometry.
struct ScenarioConfig {
    int n_subcarriers = 3000;          // N
    int n_symbols = 256;               // T
    double subcarrier_spacing = 120e3; // Hz
    double pilot_energy = 0.1 / 3000;  // E_s, linear
    double noise_variance = 3.0e-15;   // sigma^2, linear
    double wavelength = 0.01;          // m
    Vec3 bs_position{5.0, 5.0, 0.0};   // p_b
    // r = 1 point of the reference trajectory; off the boresight axis,
    // where the azimuth is undefined
    Vec3 ue_position{-std::sqrt(0.5), std::sqrt(0.5), -10.0};  // p
    double clock_bias = 0.0;           // Delta_t, seconds
    RisGeometry ris{64, 64};  // reference scenario: 64x64 half-wavelength array
    GainModel gain_model = FriisGains{};

    void validate() const {
        if (n_subcarriers < 1 || n_symbols < 1)
            throw std::invalid_argument("N and T must be >= 1");
        if (!(subcarrier_spacing > 0.0)) throw std::invalid_argument("subcarrier spacing must be > 0");
        if (!(pilot_energy > 0.0)) throw std::invalid_argument("pilot energy must be > 0");
        if (noise_variance < 0.0) throw std::invalid_argument("noise variance must be >= 0");
        if (clock_bias < 0.0 || clock_bias >= 1.0 / subcarrier_spacing)
            throw std::invalid_argument("clock bias must lie in [0, 1/df)");
        ris.validate();
    }
};

/// The T unit-modulus RIS phase matrices and their column-major
/// vectorizations (ordering matches element_positions).
struct PhaseProfileSet {
    std::vector<Eigen::MatrixXcd> profiles;    // Gamma_t, M_r x M_c
    std::vector<Eigen::VectorXcd> vectorized;  // gamma_t = vec(Gamma_t)
};

/// Channel parameter vector eta_ch: two delays, AOD, two complex gains.
struct ChannelParams {
    double tau_b = 0.0;  // seconds
    double tau_r = 0.0;  // seconds
    Angles phi;
    cd g_b{0.0, 0.0};
    cd g_r{0.0, 0.0};
};

struct ReceivedSignal {
    Eigen::MatrixXcd samples;                   // Y, N x T
    std::optional<Eigen::MatrixXcd> noiseless;  // E
};

/// d(tau): entry n is exp(-j 2 pi tau n df).
inline Eigen::VectorXcd delay_vector(double tau, int n, double df) {
    if (n < 1) throw std::invalid_argument("delay vector length must be >= 1");
    Eigen::VectorXcd d(n);
    for (int i = 0; i < n; ++i) d(i) = std::polar(1.0, -2.0 * kPi * tau * i * df);
    return d;
}

/// Channel parameters implied by the scenario geometry. The rng is
/// consumed only by the Friis model (two uniform gain phases, in that
/// order); the explicit model ignores it and accepts nullptr.
inline ChannelParams derive_channel_params(const ScenarioConfig& cfg,
                                           std::mt19937_64* rng = nullptr) {
    const Vec3& p = cfg.ue_position;
    const Vec3& pb = cfg.bs_position;
    const Vec3& pr = cfg.ris.origin;
    const double d_bs = (p - pb).norm();
    const double d_ue_ris = (p - pr).norm();
    const double d_bs_ris = (pb - pr).norm();
    if (d_bs < kCoincidentEps || d_ue_ris < kCoincidentEps)
        throw std::invalid_argument("UE coincides with the BS or the RIS");

    // the delay model is periodic with period 1/df; geometries beyond
    // c/df (~2.5 km at 120 kHz spacing) would alias
    if ((d_ue_ris + d_bs_ris) / kSpeedOfLight >= 1.0 / cfg.subcarrier_spacing)
        throw std::invalid_argument("geometry exceeds the unambiguous delay range c/df");

    ChannelParams out;
    out.tau_b = d_bs / kSpeedOfLight + cfg.clock_bias;
    out.tau_r = (d_ue_ris + d_bs_ris) / kSpeedOfLight + cfg.clock_bias;
    out.phi = aod_from_position(p, cfg.ris);

    if (std::holds_alternative<ExplicitGains>(cfg.gain_model)) {
        const auto& g = std::get<ExplicitGains>(cfg.gain_model);
        out.g_b = g.g_b;
        out.g_r = g.g_r;
    } else {
        if (rng == nullptr)
            throw std::invalid_argument("Friis gain model needs an rng for the phases");
        const double lam = cfg.wavelength;
        const double amp_b = lam / (4.0 * kPi * d_bs);
        const double amp_r = lam * lam / (16.0 * kPi * kPi * d_bs_ris * d_ue_ris);
        std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
        out.g_b = std::polar(amp_b, ph(*rng));
        out.g_r = std::polar(amp_r, ph(*rng));
    }
    return out;
}

/// RIS response sequence u(phi): entry t is a(theta)^T diag(gamma_t) a(phi).
inline Eigen::VectorXcd ris_response_sequence(const Angles& phi, const Angles& theta,
                                              const PhaseProfileSet& profiles,
                                              const RisGeometry& ris, double lambda) {
    const int t_count = static_cast<int>(profiles.vectorized.size());
    const Eigen::VectorXcd a_phi = steering_vector(phi, ris, lambda);
    const Eigen::VectorXcd a_theta = steering_vector(theta, ris, lambda);
    const Eigen::VectorXcd za = a_theta.cwiseProduct(a_phi);
    Eigen::VectorXcd u(t_count);
    for (int t = 0; t < t_count; ++t) u(t) = profiles.vectorized[t].cwiseProduct(za).sum();
    return u;
}

/// Noiseless observation E = g_b sqrt(Es) d(tau_b) 1^T + g_r sqrt(Es) d(tau_r) u(phi)^T.
inline Eigen::MatrixXcd noiseless_signal(const ChannelParams& params, const ScenarioConfig& cfg,
                                         const PhaseProfileSet& profiles) {
    if (static_cast<int>(profiles.vectorized.size()) != cfg.n_symbols)
        throw std::invalid_argument("profile count does not match T");
    const double root_es = std::sqrt(cfg.pilot_energy);
    const Eigen::VectorXcd db = delay_vector(params.tau_b, cfg.n_subcarriers, cfg.subcarrier_spacing);
    const Eigen::VectorXcd dr = delay_vector(params.tau_r, cfg.n_subcarriers, cfg.subcarrier_spacing);
    const Angles theta = aod_from_position(cfg.bs_position, cfg.ris);
    const Eigen::VectorXcd u =
        ris_response_sequence(params.phi, theta, profiles, cfg.ris, cfg.wavelength);
    Eigen::MatrixXcd e = (params.g_b * root_es) * db * Eigen::RowVectorXcd::Ones(cfg.n_symbols);
    e.noalias() += (params.g_r * root_es) * dr * u.transpose();
    return e;
}

/// Adds circularly-symmetric noise with per-entry variance sigma^2,
/// filling column-major so a given rng state reproduces bit-identical
/// matrices.
inline void add_noise(Eigen::MatrixXcd& y, double sigma2, std::mt19937_64& rng) {
    if (sigma2 == 0.0) return;
    std::normal_distribution<double> g(0.0, std::sqrt(sigma2 / 2.0));
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double re = g(rng), im = g(rng);
            y(r, c) += cd(re, im);
        }
}

/// Full synthesis: gain phases (Friis model) then noise, both from the
/// seed. Deterministic given (cfg, profiles, seed).
inline ReceivedSignal synthesize(const ScenarioConfig& cfg, const PhaseProfileSet& profiles,
                                 uint64_t rng_seed) {
    cfg.validate();
    std::mt19937_64 rng(rng_seed);
    const ChannelParams params = derive_channel_params(cfg, &rng);
    ReceivedSignal out;
    out.noiseless = noiseless_signal(params, cfg, profiles);
    out.samples = *out.noiseless;
    add_noise(out.samples, cfg.noise_variance, rng);
    return out;
}

/// T random profiles with phases uniform on [0, 2pi), element order
/// column-major within each profile.
inline PhaseProfileSet random_profiles(int t_count, const RisGeometry& ris, uint64_t rng_seed) {
    if (t_count < 1) throw std::invalid_argument("profile count must be >= 1");
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
    PhaseProfileSet out;
    out.profiles.reserve(t_count);
    out.vectorized.reserve(t_count);
    for (int t = 0; t < t_count; ++t) {
        Eigen::MatrixXcd gamma(ris.m_rows, ris.m_cols);
        for (int m = 0; m < ris.m_cols; ++m)
            for (int l = 0; l < ris.m_rows; ++l) gamma(l, m) = std::polar(1.0, ph(rng));
        out.vectorized.emplace_back(Eigen::Map<Eigen::VectorXcd>(gamma.data(), gamma.size()));
        out.profiles.push_back(std::move(gamma));
    }
    return out;
}

}  // namespace risloc
