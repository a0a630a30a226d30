#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "risloc/fim.hpp"

using namespace risloc;

namespace {

ScenarioConfig small_scenario() {
    ScenarioConfig cfg;
    cfg.n_subcarriers = 16;
    cfg.n_symbols = 8;
    cfg.subcarrier_spacing = 120e3;
    cfg.pilot_energy = 1.0;
    cfg.noise_variance = 1e-4;
    cfg.ris.m_rows = 4;
    cfg.ris.m_cols = 4;
    cfg.ris.spacing = 0.005;
    cfg.wavelength = 0.01;
    cfg.bs_position = Vec3(5.0, 5.0, 0.0);
    cfg.ue_position = Vec3(-3.0, 4.0, -2.0);
    cfg.clock_bias = 2.0e-7;
    cfg.gain_model = ExplicitGains{cd(0.8, -0.3), cd(-0.2, 0.6)};
    return cfg;
}

ChannelParams perturb(const ChannelParams& ch, int idx, double h) {
    ChannelParams p = ch;
    switch (idx) {
        case 0: p.tau_b += h; break;
        case 1: p.tau_r += h; break;
        case 2: p.phi.az += h; break;
        case 3: p.phi.el += h; break;
        case 4: p.g_b += cd(0.0, h); break;
        case 5: p.g_b += cd(h, 0.0); break;
        case 6: p.g_r += cd(0.0, h); break;
        case 7: p.g_r += cd(h, 0.0); break;
    }
    return p;
}

// central finite differences of the forward model in the channel
// parameters; the step for the delays reflects their tiny scale
constexpr double kSteps[8] = {1e-13, 1e-13, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6};

}  // namespace

TEST_CASE("analytic signal derivatives match finite differences") {
    ScenarioConfig cfg = small_scenario();
    const PhaseProfileSet profiles = random_profiles(cfg.n_symbols, cfg.ris, 31);
    const ChannelParams ch = derive_channel_params(cfg);
    const auto analytic = derivatives_E(ch, cfg, profiles);
    for (int a = 0; a < 8; ++a) {
        const double h = kSteps[a];
        const Eigen::MatrixXcd fd = (noiseless_signal(perturb(ch, a, h), cfg, profiles) -
                                     noiseless_signal(perturb(ch, a, -h), cfg, profiles)) /
                                    (2.0 * h);
        const double rel = (fd - analytic[a]).norm() / analytic[a].norm();
        INFO("parameter index ", a);
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("channel FIM equals the brute-force derivative sum and is SPD") {
    ScenarioConfig cfg = small_scenario();
    const PhaseProfileSet profiles = random_profiles(cfg.n_symbols, cfg.ris, 32);
    const ChannelParams ch = derive_channel_params(cfg);
    const auto j_ch = fim_channel(ch, cfg, profiles);
    const auto de = derivatives_E(ch, cfg, profiles);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            const double want = 2.0 / cfg.noise_variance *
                                de[a].cwiseProduct(de[b].conjugate()).sum().real();
            CHECK(j_ch(a, b) == doctest::Approx(want).epsilon(1e-10));
        }
    CHECK((j_ch - j_ch.transpose()).norm() < 1e-8 * j_ch.norm());
    const double emin =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(j_ch).eigenvalues().minCoeff();
    CHECK(emin > 0.0);
    cfg.noise_variance = 0.0;
    CHECK_THROWS_AS(fim_channel(ch, cfg, profiles), std::invalid_argument);
}

TEST_CASE("positional Jacobian matches finite differences of the channel map") {
    ScenarioConfig cfg = small_scenario();
    const PositionalParams po{cfg.ue_position, cfg.clock_bias, cd(0.8, -0.3), cd(-0.2, 0.6)};
    const auto jac = jacobian(po, cfg);

    auto channel_at = [&](const Vec3& p, double bias) {
        ScenarioConfig c = cfg;
        c.ue_position = p;
        c.clock_bias = bias;
        return derive_channel_params(c);
    };
    const double h = 1e-6;
    for (int col = 0; col < 3; ++col) {
        Vec3 dp = Vec3::Zero();
        dp(col) = h;
        const ChannelParams plus = channel_at(po.position + dp, po.clock_bias);
        const ChannelParams minus = channel_at(po.position - dp, po.clock_bias);
        CHECK(jac(0, col) ==
              doctest::Approx((plus.tau_b - minus.tau_b) / (2 * h)).epsilon(1e-5));
        CHECK(jac(1, col) ==
              doctest::Approx((plus.tau_r - minus.tau_r) / (2 * h)).epsilon(1e-5));
        CHECK(jac(2, col) ==
              doctest::Approx((plus.phi.az - minus.phi.az) / (2 * h)).epsilon(1e-5));
        CHECK(jac(3, col) ==
              doctest::Approx((plus.phi.el - minus.phi.el) / (2 * h)).epsilon(1e-5));
    }
    // clock bias shifts both delays one-for-one; gains map through the identity
    CHECK(jac(0, 3) == 1.0);
    CHECK(jac(1, 3) == 1.0);
    CHECK(jac.block<4, 4>(4, 4).isIdentity(1e-15));
    CHECK(jac.block<4, 4>(0, 4).isZero(1e-15));

    // boresight placement has no defined azimuth gradient
    ScenarioConfig bore = cfg;
    const PositionalParams po_bore{Vec3(0.0, 0.0, 5.0), 0.0, po.g_b, po.g_r};
    CHECK_THROWS_AS(jacobian(po_bore, bore), std::invalid_argument);
}

TEST_CASE("bound report is invariant to rigid description changes and scales with noise") {
    ScenarioConfig cfg = small_scenario();
    const PhaseProfileSet profiles = random_profiles(cfg.n_symbols, cfg.ris, 77);
    const PositionalParams po{cfg.ue_position, cfg.clock_bias, cd(0.8, -0.3), cd(-0.2, 0.6)};
    const CrbReport a = crb(po, cfg, profiles);
    CHECK(a.peb > 0.0);
    CHECK(a.ceb > 0.0);

    // 4x the noise power doubles every bound
    ScenarioConfig noisy = cfg;
    noisy.noise_variance *= 4.0;
    const CrbReport b = crb(po, noisy, profiles);
    CHECK(b.peb == doctest::Approx(2.0 * a.peb).epsilon(1e-8));
    CHECK(b.ceb == doctest::Approx(2.0 * a.ceb).epsilon(1e-8));
    CHECK(b.crb_phi_az == doctest::Approx(2.0 * a.crb_phi_az).epsilon(1e-8));

    // translating the whole scene leaves the bounds unchanged
    ScenarioConfig moved = cfg;
    const Vec3 shift(2.0, -1.0, 3.0);
    moved.bs_position += shift;
    moved.ris.origin += shift;
    const PositionalParams po_moved{po.position + shift, po.clock_bias, po.g_b, po.g_r};
    const CrbReport c = crb(po_moved, moved, profiles);
    CHECK(c.peb == doctest::Approx(a.peb).epsilon(1e-8));
    CHECK(c.ceb == doctest::Approx(a.ceb).epsilon(1e-8));
}

TEST_CASE("identifiability requires multiple subcarriers, symbols, and varied profiles") {
    ScenarioConfig cfg = small_scenario();

    ScenarioConfig n1 = cfg;
    n1.n_subcarriers = 1;
    const PhaseProfileSet pn1 = random_profiles(n1.n_symbols, n1.ris, 5);
    const PositionalParams po{cfg.ue_position, cfg.clock_bias, cd(0.8, -0.3), cd(-0.2, 0.6)};
    CHECK_THROWS_AS(crb(po, n1, pn1), SingularFimError);

    ScenarioConfig t1 = cfg;
    t1.n_symbols = 1;
    const PhaseProfileSet pt1 = random_profiles(1, t1.ris, 5);
    CHECK_THROWS_AS(crb(po, t1, pt1), SingularFimError);
}

TEST_CASE("full-scale bounds reproduce the pinned reference points") {
    // 64x64 RIS, N=3000, T=256 reference scenario; values pinned from
    // published simulation results, wide tolerance since the gain
    // amplitudes are a reconstruction
    ScenarioConfig cfg;  // struct defaults are the full-scale scenario
    std::mt19937_64 rng(2024);
    auto peb_at = [&](double r) {
        ScenarioConfig c = cfg;
        const double inv_rt2 = 1.0 / std::sqrt(2.0);
        c.ue_position = Vec3(-r * inv_rt2, r * inv_rt2, -10.0);
        c.clock_bias = 0.0;
        const PhaseProfileSet profiles = random_profiles(c.n_symbols, c.ris, rng());
        const ChannelParams ch = derive_channel_params(c, &rng);
        const PositionalParams po{c.ue_position, c.clock_bias, ch.g_b, ch.g_r};
        return crb(po, c, profiles).peb;
    };
    CHECK(peb_at(1.0) == doctest::Approx(0.0851).epsilon(0.25));
    CHECK(peb_at(10.27) == doctest::Approx(0.0961).epsilon(0.25));
}
