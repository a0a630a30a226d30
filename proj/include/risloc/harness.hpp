#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "risloc/estimator.hpp"
#include "risloc/fim.hpp"

namespace risloc {

/// Scenario plus estimator grid sizes as loaded from a config file.
struct ExperimentConfig {
    ScenarioConfig scenario;
    EstimatorConfig estimator;
};

/// Stable seed mixing (splitmix64 finalizer over master/point/trial):
/// trial i at point j always gets the same seed regardless of how many
/// trials or points a campaign runs.
inline uint64_t mix_seed(uint64_t master, uint64_t point, uint64_t trial) {
    uint64_t z = master + 0x9E3779B97F4A7C15ull * (point + 1) +
                 0xBF58476D1CE4E5B9ull * (trial + 1);
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// ---------------------------------------------------------------------------
// config file: flat "key = value" lines, '#' comments, vector values as
// whitespace-separated components

inline ExperimentConfig parse_config_text(std::istream& in) {
    std::map<std::string, std::vector<double>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        std::istringstream key_s(line.substr(0, eq)), val_s(line.substr(eq + 1));
        std::string key;
        key_s >> key;
        std::vector<double> vals;
        double v;
        while (val_s >> v) vals.push_back(v);
        if (key.empty() || vals.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");
        kv[key] = vals;
    }

    auto get = [&](const std::string& key, double fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second.at(0);
    };
    auto get_vec3 = [&](const std::string& key, const Vec3& fallback) {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        if (it->second.size() != 3)
            throw std::invalid_argument("config key '" + key + "' needs 3 components");
        return Vec3(it->second[0], it->second[1], it->second[2]);
    };

    ExperimentConfig out;
    ScenarioConfig& sc = out.scenario;
    sc.ris.m_rows = static_cast<int>(get("ris_rows", 64));
    sc.ris.m_cols = static_cast<int>(get("ris_cols", 64));
    sc.ris.spacing = get("ris_spacing", 0.005);
    sc.ris.origin = get_vec3("ris_position", Vec3::Zero());
    if (auto it = kv.find("ris_rotation"); it != kv.end()) {
        if (it->second.size() != 9)
            throw std::invalid_argument("ris_rotation needs 9 row-major components");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) sc.ris.rotation(r, c) = it->second[r * 3 + c];
        validate_rotation(sc.ris.rotation);
    }
    sc.wavelength = get("wavelength", 0.01);
    sc.n_subcarriers = static_cast<int>(get("n_subcarriers", 3000));
    sc.subcarrier_spacing = get("subcarrier_spacing", 120e3);
    sc.n_symbols = static_cast<int>(get("n_symbols", 256));
    sc.bs_position = get_vec3("bs_position", Vec3(5.0, 5.0, 0.0));
    sc.ue_position = get_vec3("ue_position", Vec3(-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), -10.0));

    const double tx_dbm = get("tx_power_dbm", 20.0);
    sc.pilot_energy = get("pilot_energy",
                          std::pow(10.0, (tx_dbm - 30.0) / 10.0) / sc.n_subcarriers);
    const double psd = get("noise_psd_dbm_hz", -174.0);
    const double nf = get("noise_figure_db", 8.0);
    sc.noise_variance = get("noise_variance",
                            std::pow(10.0, (psd + nf - 30.0) / 10.0) * sc.subcarrier_spacing);

    out.estimator.n_fft_delay = static_cast<int>(get("n_fft_delay", 4096));
    out.estimator.n_fft_rows = static_cast<int>(get("n_fft_rows", 256));
    out.estimator.n_fft_cols = static_cast<int>(get("n_fft_cols", 256));
    return out;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    return parse_config_text(f);
}

// ---------------------------------------------------------------------------

struct Campaign {
    ScenarioConfig base;
    EstimatorConfig estimator;
    std::vector<double> sweep;  // r values (distance) or M values (RIS size)
    int trials = 100;
    uint64_t master_seed = 1;

    void validate() const {
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (sweep.empty()) throw std::invalid_argument("sweep must be non-empty");
    }
};

/// Sweep trajectory: [-r/sqrt(2), r/sqrt(2), z] relative to the RIS,
/// with z taken from the base UE position.
inline Vec3 trajectory_point(double r, const ScenarioConfig& base) {
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    return base.ris.origin + Vec3(-r * inv_rt2, r * inv_rt2, base.ue_position.z());
}

inline std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i)
        out[i] = lo * std::pow(hi / lo, count > 1 ? static_cast<double>(i) / (count - 1) : 0.0);
    return out;
}

struct ResultRow {
    double sweep_value = 0.0;
    int trials = 0;
    uint64_t master_seed = 0;
    double rmse_pos = 0.0;
    double rmse_clock_s = 0.0;
    double rmse_tau_b_s = 0.0;
    double rmse_tau_r_s = 0.0;
    double rmse_az = 0.0;
    double rmse_el = 0.0;
    double crb_pos = 0.0;
    double crb_clock_s = 0.0;
    double crb_tau_b_s = 0.0;
    double crb_tau_r_s = 0.0;
    double crb_az = 0.0;
    double crb_el = 0.0;
    double rate_tau_order = 0.0;
    double rate_invalid_branch = 0.0;
    double rate_nonconverged = 0.0;
    double rate_fim_singular = 0.0;
};

namespace detail {

inline double wrapped_diff(double a, double b, double period) {
    double d = std::fmod(a - b, period);
    if (d > period / 2.0) d -= period;
    if (d < -period / 2.0) d += period;
    return d;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = (m + v[mid - 1]) / 2.0;
    }
    return m;
}

inline double rms(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace detail

/// One Monte Carlo point of the distance sweep. Per-trial draw order
/// from the mixed seed: clock bias, profile sub-seed, gain phases,
/// noise. CRB columns are the medians over the same draws.
inline ResultRow run_distance_point(const Campaign& campaign, size_t point_index) {
    const double r = campaign.sweep.at(point_index);
    const double period = 1.0 / campaign.base.subcarrier_spacing;

    ResultRow row;
    row.sweep_value = r;
    row.trials = campaign.trials;
    row.master_seed = campaign.master_seed;

    std::vector<double> e_pos, e_clock, e_tb, e_tr, e_az, e_el;
    std::vector<double> c_pos, c_clock, c_tb, c_tr, c_az, c_el;
    int n_tau_order = 0, n_invalid = 0, n_nonconv = 0, n_singular = 0;

    for (int i = 0; i < campaign.trials; ++i) {
        std::mt19937_64 rng(mix_seed(campaign.master_seed, point_index, i));
        ScenarioConfig cfg = campaign.base;
        cfg.ue_position = trajectory_point(r, campaign.base);
        cfg.clock_bias = std::uniform_real_distribution<double>(0.0, period)(rng);
        const uint64_t profile_seed = rng();
        const PhaseProfileSet profiles =
            random_profiles(cfg.n_symbols, cfg.ris, profile_seed);
        const ChannelParams truth = derive_channel_params(cfg, &rng);

        Eigen::MatrixXcd y = noiseless_signal(truth, cfg, profiles);
        add_noise(y, cfg.noise_variance, rng);

        const EstimateReport rep = estimate(y, cfg, profiles, campaign.estimator);
        e_pos.push_back((rep.p_hat - cfg.ue_position).norm());
        e_clock.push_back(detail::wrapped_diff(rep.clock_bias_hat, cfg.clock_bias, period));
        e_tb.push_back(detail::wrapped_diff(rep.tau_b_hat, truth.tau_b, period));
        e_tr.push_back(detail::wrapped_diff(rep.tau_r_hat, truth.tau_r, period));
        e_az.push_back(detail::wrapped_diff(rep.phi_hat.az, truth.phi.az, 2.0 * kPi));
        e_el.push_back(rep.phi_hat.el - truth.phi.el);
        n_tau_order += rep.tau_order_violation;
        n_invalid += rep.invalid_aod_branch;
        n_nonconv += !rep.refinement_converged;

        try {
            const PositionalParams po{cfg.ue_position, cfg.clock_bias, truth.g_b, truth.g_r};
            const CrbReport bound = crb(po, cfg, profiles);
            c_pos.push_back(bound.peb);
            c_clock.push_back(bound.ceb);
            c_tb.push_back(bound.crb_tau_b);
            c_tr.push_back(bound.crb_tau_r);
            c_az.push_back(bound.crb_phi_az);
            c_el.push_back(bound.crb_phi_el);
        } catch (const SingularFimError&) {
            ++n_singular;
        }
    }

    row.rmse_pos = detail::rms(e_pos);
    row.rmse_clock_s = detail::rms(e_clock);
    row.rmse_tau_b_s = detail::rms(e_tb);
    row.rmse_tau_r_s = detail::rms(e_tr);
    row.rmse_az = detail::rms(e_az);
    row.rmse_el = detail::rms(e_el);
    row.crb_pos = detail::median_of(c_pos);
    row.crb_clock_s = detail::median_of(c_clock);
    row.crb_tau_b_s = detail::median_of(c_tb);
    row.crb_tau_r_s = detail::median_of(c_tr);
    row.crb_az = detail::median_of(c_az);
    row.crb_el = detail::median_of(c_el);
    const double inv_trials = 1.0 / campaign.trials;
    row.rate_tau_order = n_tau_order * inv_trials;
    row.rate_invalid_branch = n_invalid * inv_trials;
    row.rate_nonconverged = n_nonconv * inv_trials;
    row.rate_fim_singular = n_singular * inv_trials;
    return row;
}

inline std::vector<ResultRow> run_distance_sweep(const Campaign& campaign) {
    campaign.validate();
    std::vector<ResultRow> rows;
    rows.reserve(campaign.sweep.size());
    for (size_t j = 0; j < campaign.sweep.size(); ++j)
        rows.push_back(run_distance_point(campaign, j));
    return rows;
}

/// RIS-size sweep rows: PEB only, no estimator runs.
struct RisSizeRow {
    double r = 0.0;
    int ris_side = 0;  // M_r = M_c
    int trials = 0;
    uint64_t master_seed = 0;
    double peb_median = 0.0;
    double rate_fim_singular = 0.0;
};

inline std::vector<RisSizeRow> run_ris_size_sweep(const Campaign& campaign,
                                                  const std::vector<double>& r_values) {
    campaign.validate();
    std::vector<RisSizeRow> rows;
    size_t point_index = 0;
    for (double r : r_values) {
        for (double m : campaign.sweep) {
            RisSizeRow row;
            row.r = r;
            row.ris_side = static_cast<int>(m);
            row.trials = campaign.trials;
            row.master_seed = campaign.master_seed;
            std::vector<double> pebs;
            int n_singular = 0;
            for (int i = 0; i < campaign.trials; ++i) {
                std::mt19937_64 rng(mix_seed(campaign.master_seed, point_index, i));
                ScenarioConfig cfg = campaign.base;
                cfg.ris.m_rows = cfg.ris.m_cols = row.ris_side;
                cfg.ue_position = trajectory_point(r, campaign.base);
                cfg.clock_bias = std::uniform_real_distribution<double>(
                    0.0, 1.0 / cfg.subcarrier_spacing)(rng);
                const uint64_t profile_seed = rng();
                try {
                    const PhaseProfileSet profiles =
                        random_profiles(cfg.n_symbols, cfg.ris, profile_seed);
                    const ChannelParams truth = derive_channel_params(cfg, &rng);
                    const PositionalParams po{cfg.ue_position, cfg.clock_bias, truth.g_b,
                                              truth.g_r};
                    pebs.push_back(crb(po, cfg, profiles).peb);
                } catch (const SingularFimError&) {
                    ++n_singular;
                } catch (const std::invalid_argument&) {
                    ++n_singular;
                }
            }
            row.peb_median = detail::median_of(pebs);
            row.rate_fim_singular = static_cast<double>(n_singular) / campaign.trials;
            rows.push_back(row);
            ++point_index;
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV output, 9 significant digits

namespace detail {
inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace detail

inline const char* distance_csv_header() {
    return "r_m,trials,master_seed,"
           "rmse_pos_m,rmse_clock_s,rmse_clock_m,rmse_tau_b_s,rmse_tau_b_m,"
           "rmse_tau_r_s,rmse_tau_r_m,rmse_az_rad,rmse_el_rad,"
           "crb_pos_m,crb_clock_s,crb_clock_m,crb_tau_b_m,crb_tau_r_m,crb_az_rad,crb_el_rad,"
           "rate_tau_order,rate_invalid_branch,rate_nonconverged,rate_fim_singular";
}

inline void write_distance_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    using detail::fmt9;
    out << distance_csv_header() << "\n";
    const double c = kSpeedOfLight;
    for (const auto& r : rows) {
        out << fmt9(r.sweep_value) << ',' << r.trials << ',' << r.master_seed << ','
            << fmt9(r.rmse_pos) << ',' << fmt9(r.rmse_clock_s) << ','
            << fmt9(r.rmse_clock_s * c) << ',' << fmt9(r.rmse_tau_b_s) << ','
            << fmt9(r.rmse_tau_b_s * c) << ',' << fmt9(r.rmse_tau_r_s) << ','
            << fmt9(r.rmse_tau_r_s * c) << ',' << fmt9(r.rmse_az) << ',' << fmt9(r.rmse_el)
            << ',' << fmt9(r.crb_pos) << ',' << fmt9(r.crb_clock_s) << ','
            << fmt9(r.crb_clock_s * c) << ',' << fmt9(r.crb_tau_b_s * c) << ','
            << fmt9(r.crb_tau_r_s * c) << ',' << fmt9(r.crb_az) << ',' << fmt9(r.crb_el)
            << ',' << fmt9(r.rate_tau_order) << ',' << fmt9(r.rate_invalid_branch) << ','
            << fmt9(r.rate_nonconverged) << ',' << fmt9(r.rate_fim_singular) << "\n";
    }
}

inline const char* ris_size_csv_header() {
    return "r_m,ris_side,elements,trials,master_seed,peb_median_m,rate_fim_singular";
}

inline void write_ris_size_csv(std::ostream& out, const std::vector<RisSizeRow>& rows) {
    using detail::fmt9;
    out << ris_size_csv_header() << "\n";
    for (const auto& r : rows) {
        out << fmt9(r.r) << ',' << r.ris_side << ','
            << static_cast<long long>(r.ris_side) * r.ris_side << ',' << r.trials << ','
            << r.master_seed << ',' << fmt9(r.peb_median) << ',' << fmt9(r.rate_fim_singular)
            << "\n";
    }
}

}  // namespace risloc
