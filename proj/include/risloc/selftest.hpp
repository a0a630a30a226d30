#pragma once

#include <iostream>

#include "risloc/estimator.hpp"
#include "risloc/fim.hpp"

namespace risloc {

/// Quick internal consistency checks on a small deterministic scenario:
/// the analytic signal derivatives against central finite differences of
/// the forward model, and the four-stage estimator on noiseless data.
/// Prints one line per check; returns true when everything passes.
inline bool selftest(std::ostream& out = std::cout) {
    bool ok = true;
    auto report = [&](const char* name, bool pass, double metric) {
        out << (pass ? "PASS" : "FAIL") << "  " << name << "  (metric " << metric << ")\n";
        ok = ok && pass;
    };

    ScenarioConfig cfg;
    cfg.n_subcarriers = 16;
    cfg.n_symbols = 8;
    cfg.subcarrier_spacing = 120e3;
    cfg.pilot_energy = 1.0;
    cfg.noise_variance = 1.0e-6;
    cfg.ris.m_rows = 4;
    cfg.ris.m_cols = 4;
    cfg.ris.spacing = 0.005;
    cfg.wavelength = 0.01;
    cfg.bs_position = Vec3(5.0, 5.0, 0.0);
    cfg.ue_position = Vec3(-3.0, 4.0, -2.0);
    cfg.clock_bias = 2.0e-7;
    cfg.gain_model = ExplicitGains{cd(0.8, -0.3), cd(-0.2, 0.6)};

    const PhaseProfileSet profiles = random_profiles(cfg.n_symbols, cfg.ris, 12345);
    const ChannelParams ch = derive_channel_params(cfg);

    // finite differences of the forward model against the analytic
    // derivative matrices, one relative Frobenius error per parameter
    {
        auto forward = [&](const ChannelParams& p) { return noiseless_signal(p, cfg, profiles); };
        const auto analytic = derivatives_E(ch, cfg, profiles);
        auto perturb = [&](int idx, double h) {
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
        };
        const double steps[8] = {1e-13, 1e-13, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6};
        double worst = 0.0;
        for (int a = 0; a < 8; ++a) {
            const double h = steps[a];
            const Eigen::MatrixXcd fd =
                (forward(perturb(a, h)) - forward(perturb(a, -h))) / (2.0 * h);
            worst = std::max(worst, (fd - analytic[a]).norm() / analytic[a].norm());
        }
        report("signal derivatives vs finite differences", worst < 1e-5, worst);
    }

    // FIM must be symmetric positive definite and match the brute-force
    // sum over the derivative matrices
    {
        const auto j_ch = fim_channel(ch, cfg, profiles);
        const auto analytic = derivatives_E(ch, cfg, profiles);
        Eigen::Matrix<double, 8, 8> brute;
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                brute(a, b) = 2.0 / cfg.noise_variance *
                              analytic[a].cwiseProduct(analytic[b].conjugate()).sum().real();
        const double err = (j_ch - brute).norm() / brute.norm();
        const double sym = (j_ch - j_ch.transpose()).norm();
        const double emin =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(j_ch).eigenvalues().minCoeff();
        report("FIM vs brute-force derivative sum", err < 1e-12 && sym < 1e-9 && emin > 0.0,
               err);
    }

    // zero-noise estimator round trip on the same scenario
    {
        EstimatorConfig est;
        est.n_fft_delay = 256;
        est.n_fft_rows = 64;
        est.n_fft_cols = 64;
        const Eigen::MatrixXcd e = noiseless_signal(ch, cfg, profiles);
        const EstimateReport rep = estimate(e, cfg, profiles, est);
        const double pos_err = (rep.p_hat - cfg.ue_position).norm();
        report("noiseless estimator round trip", pos_err < 1e-4, pos_err);
    }

    return ok;
}

}  // namespace risloc
