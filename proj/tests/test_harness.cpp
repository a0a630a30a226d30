#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "risloc/harness.hpp"

using namespace risloc;

TEST_CASE("seed mixing is stable and collision-free across nearby indices") {
    // trial i at point j never depends on how many trials run
    CHECK(mix_seed(42, 0, 0) == mix_seed(42, 0, 0));
    std::set<uint64_t> seen;
    for (uint64_t j = 0; j < 8; ++j)
        for (uint64_t i = 0; i < 64; ++i) seen.insert(mix_seed(42, j, i));
    CHECK(seen.size() == 8 * 64);
    CHECK(mix_seed(42, 0, 0) != mix_seed(43, 0, 0));
}

TEST_CASE("config parser fills scenario fields and derives the link budget") {
    std::istringstream in(
        "# comment line\n"
        "ris_rows = 32\n"
        "ris_cols = 16\n"
        "n_subcarriers = 1000\n"
        "tx_power_dbm = 20  # trailing comment\n"
        "noise_psd_dbm_hz = -174\n"
        "noise_figure_db = 8\n"
        "subcarrier_spacing = 120e3\n"
        "bs_position = 1 2 3\n");
    const ExperimentConfig exp = parse_config_text(in);
    CHECK(exp.scenario.ris.m_rows == 32);
    CHECK(exp.scenario.ris.m_cols == 16);
    CHECK(exp.scenario.n_subcarriers == 1000);
    CHECK(exp.scenario.bs_position.isApprox(Vec3(1, 2, 3)));
    // 20 dBm total over N pilots
    CHECK(exp.scenario.pilot_energy == doctest::Approx(0.1 / 1000).epsilon(1e-12));
    // -174 dBm/Hz + 8 dB figure over 120 kHz
    CHECK(exp.scenario.noise_variance ==
          doctest::Approx(std::pow(10.0, (-174.0 + 8.0 - 30.0) / 10.0) * 120e3)
              .epsilon(1e-12));

    std::istringstream bad("this line has no equals sign\n");
    CHECK_THROWS_AS(parse_config_text(bad), std::invalid_argument);
    std::istringstream badvec("bs_position = 1 2\n");
    CHECK_THROWS_AS(parse_config_text(badvec), std::invalid_argument);
}

TEST_CASE("log spacing hits both endpoints") {
    const auto v = log_spaced(1.0, 100.0, 5);
    REQUIRE(v.size() == 5);
    CHECK(v.front() == doctest::Approx(1.0));
    CHECK(v.back() == doctest::Approx(100.0));
    CHECK(v[2] == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("trajectory points sit on the diagonal at the configured depth") {
    ScenarioConfig base;
    const Vec3 p = trajectory_point(4.0, base);
    CHECK(p.x() == doctest::Approx(-4.0 / std::sqrt(2.0)));
    CHECK(p.y() == doctest::Approx(4.0 / std::sqrt(2.0)));
    CHECK(p.z() == doctest::Approx(-10.0));
    CHECK(std::hypot(p.x(), p.y()) == doctest::Approx(4.0));
}

TEST_CASE("aggregation helpers: wrapped differences, median, rms") {
    CHECK(detail::wrapped_diff(0.1, 0.2, 1.0) == doctest::Approx(-0.1));
    CHECK(detail::wrapped_diff(0.95, 0.05, 1.0) == doctest::Approx(-0.1));
    CHECK(detail::wrapped_diff(0.05, 0.95, 1.0) == doctest::Approx(0.1));
    CHECK(detail::median_of({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(detail::median_of({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
    CHECK(detail::rms({3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)));
}

namespace {

Campaign tiny_campaign() {
    Campaign c;
    c.base.n_subcarriers = 48;
    c.base.n_symbols = 12;
    c.base.pilot_energy = 1e-4;
    c.base.noise_variance = 1e-15;
    c.base.ris.m_rows = c.base.ris.m_cols = 8;
    c.estimator.n_fft_delay = 256;
    c.estimator.n_fft_rows = c.estimator.n_fft_cols = 32;
    c.sweep = {3.0, 6.0};
    c.trials = 3;
    c.master_seed = 7;
    return c;
}

}  // namespace

TEST_CASE("distance sweep produces finite rows and byte-identical reruns") {
    const Campaign c = tiny_campaign();
    const auto rows = run_distance_sweep(c);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.trials == 3);
        CHECK(std::isfinite(r.rmse_pos));
        CHECK(std::isfinite(r.crb_pos));
        CHECK(r.crb_pos > 0.0);
        CHECK(r.rate_fim_singular == 0.0);
    }
    CHECK(rows[0].sweep_value == 3.0);

    std::ostringstream a, b;
    write_distance_csv(a, rows);
    write_distance_csv(b, run_distance_sweep(c));
    CHECK(a.str() == b.str());

    // header schema is load-bearing for downstream parsing
    const std::string head = a.str().substr(0, a.str().find('\n'));
    CHECK(head == distance_csv_header());
    CHECK(std::count(head.begin(), head.end(), ',') == 22);
}

TEST_CASE("RIS size sweep reports shrinking bounds and flags the degenerate array") {
    Campaign c = tiny_campaign();
    c.sweep = {1.0, 8.0, 16.0};
    const auto rows = run_ris_size_sweep(c, {5.0});
    REQUIRE(rows.size() == 3);
    // a single-element RIS cannot localize: flagged, not fatal
    CHECK(rows[0].rate_fim_singular == 1.0);
    CHECK(rows[1].peb_median > rows[2].peb_median);

    std::ostringstream s;
    write_ris_size_csv(s, rows);
    const std::string head = s.str().substr(0, s.str().find('\n'));
    CHECK(head == ris_size_csv_header());
}

TEST_CASE("campaign validation") {
    Campaign c = tiny_campaign();
    c.trials = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_campaign();
    c.sweep.clear();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
