#include "doctest.h"

#include "fmcwim/config.hpp"
#include "fmcwim/errors.hpp"

#include <filesystem>
#include <string>

using namespace fmcwim;

namespace {

std::string preset(const std::string& name) { return std::string(FMCWIM_PRESET_DIR) + "/" + name; }

const char* kHeader = R"(waveform:
  carrier_frequency: 77.0e9
  bandwidth: 300.0e6
  chirp_duration: 100.0e-6
receiver:
  sample_rate: 20.0e6
  num_samples: 2000
)";

// Parses and returns the ConfigError, failing the test if none is raised.
template <typename F>
ConfigError config_error(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected ConfigError");
    return ConfigError("", 0, "");
}

} // namespace

TEST_CASE("scenario presets load") {
    for (const char* name : {"fig3.scenario", "fig4.scenario", "leakage.scenario", "bench229.scenario"}) {
        CAPTURE(name);
        const auto f = load_scenario(preset(name));
        CHECK_NOTHROW(f.scenario.validate());
        CHECK_FALSE(f.scenario.interferers.empty());
    }
    const auto f4 = load_scenario(preset("fig4.scenario"));
    CHECK(f4.scenario.targets.size() == 1);
    CHECK(f4.scenario.interferers.size() == 4);
    CHECK(f4.scenario.receiver.num_samples() == 2000);
    CHECK(load_scenario(preset("bench229.scenario")).scenario.receiver.num_samples() == 229);
}

TEST_CASE("mitigation presets load") {
    const auto f3 = load_mitigation(preset("fig3.mitigation"));
    CHECK(f3.config.coarse.slope_hypotheses == 200);
    CHECK(f3.config.coarse.time_hypotheses == 600);
    CHECK(f3.config.fine.slope_hypotheses == 40);
    CHECK(f3.config.fine.time_hypotheses == 40);
    REQUIRE(f3.config.target_freqs.size() == 2);
    CHECK(f3.config.target_freqs[0] == doctest::Approx(3e12 * 0.8e-6));
    const auto lk = load_mitigation(preset("leakage.mitigation"));
    REQUIRE(lk.config.highpass.has_value());
    double dc = 0.0;
    for (double t : lk.config.highpass->taps) dc += t;
    CHECK(std::abs(dc) < 1e-3);
    const auto b = load_mitigation(preset("bench229.mitigation"));
    CHECK(b.config.coarse.slope_hypotheses * b.config.coarse.time_hypotheses == 6000);
    CHECK(b.config.fine.slope_hypotheses * b.config.fine.time_hypotheses == 2000);
}

TEST_CASE("scenario round trip") {
    auto f = load_scenario(preset("fig4.scenario"));
    f.frame = FrameSpec{16, {0.3}};
    const auto again = parse_scenario(dump_scenario(f));
    CHECK(again.scenario.waveform.carrier_freq() == f.scenario.waveform.carrier_freq());
    CHECK(again.scenario.waveform.bandwidth() == f.scenario.waveform.bandwidth());
    CHECK(again.scenario.receiver.sample_rate() == f.scenario.receiver.sample_rate());
    REQUIRE(again.scenario.interferers.size() == f.scenario.interferers.size());
    for (std::size_t i = 0; i < f.scenario.interferers.size(); ++i) {
        CHECK(again.scenario.interferers[i].slope == f.scenario.interferers[i].slope);
        CHECK(again.scenario.interferers[i].delay == f.scenario.interferers[i].delay);
        CHECK(again.scenario.interferers[i].amplitude == f.scenario.interferers[i].amplitude);
    }
    CHECK(again.scenario.targets[0].delay == f.scenario.targets[0].delay);
    CHECK(again.scenario.noise_std == f.scenario.noise_std);
    CHECK(again.scenario.rng_seed == f.scenario.rng_seed);
    REQUIRE(again.frame.has_value());
    CHECK(again.frame->num_chirps == 16);
    CHECK(again.frame->doppler_phase_steps == std::vector<double>{0.3});
    // dumping is a fixed point
    CHECK(dump_scenario(again) == dump_scenario(f));
}

TEST_CASE("mitigation round trip") {
    for (const char* name : {"fig3.mitigation", "leakage.mitigation"}) {
        CAPTURE(name);
        const auto f = load_mitigation(preset(name));
        const auto again = parse_mitigation(dump_mitigation(f));
        CHECK(dump_mitigation(again) == dump_mitigation(f));
        CHECK(again.config.coarse.slope_range == f.config.coarse.slope_range);
        CHECK(again.config.fine.omp.energy_variation_threshold == f.config.fine.omp.energy_variation_threshold);
        CHECK(again.config.fine.omp.correlation == f.config.fine.omp.correlation);
        CHECK(again.config.target_freqs == f.config.target_freqs);
        CHECK(again.config.highpass.has_value() == f.config.highpass.has_value());
        if (f.config.highpass) CHECK(again.config.highpass->taps == f.config.highpass->taps);
    }
}

TEST_CASE("unknown keys name the field and line") {
    const std::string text = std::string(kHeader) + "targets:\n  - {delay: 1.0e-6, amplitude: 1.0, colour: red}\n";
    const auto e = config_error([&] { parse_scenario(text); });
    CHECK(e.line() == 9);
    CHECK(e.field().find("colour") != std::string::npos);
    CHECK(std::string(e.what()).find("line 9") != std::string::npos);

    const auto top = config_error([&] { parse_scenario(std::string(kHeader) + "nosie_std: 0.1\n"); });
    CHECK(top.field() == "nosie_std");
    CHECK(top.line() == 8);

    const auto nested = config_error(
        [&] { parse_mitigation(std::string(kHeader) + "fine:\n  omp:\n    max_iteration: 5\n"); });
    CHECK(nested.field().find("max_iteration") != std::string::npos);
    CHECK(nested.line() == 10);
}

TEST_CASE("type and value errors") {
    SUBCASE("number expected") {
        const auto e = config_error([&] { parse_scenario(std::string(kHeader) + "noise_std: loud\n"); });
        CHECK(e.field() == "noise_std");
        CHECK(e.line() == 8);
    }
    SUBCASE("missing required field") {
        const auto e = config_error([&] { parse_scenario("receiver:\n  sample_rate: 1.0e6\n  num_samples: 10\n"); });
        CHECK(e.field().find("waveform") != std::string::npos);
    }
    SUBCASE("domain validation becomes a config error") {
        CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "targets:\n  - {delay: -1.0e-6}\n"), ConfigError);
        CHECK_THROWS_AS(parse_mitigation(std::string(kHeader) + "highpass:\n  cutoff: 20.0e6\n"), ConfigError);
        CHECK_THROWS_AS(parse_mitigation(std::string(kHeader) + "fine:\n  slope_hypotheses: 0\n"), ConfigError);
        CHECK_THROWS_AS(parse_mitigation(std::string(kHeader) + "window: kaiser\n"), ConfigError);
        CHECK_THROWS_AS(parse_mitigation(std::string(kHeader) + "coarse:\n  omp:\n    correlation: cosine\n"),
                        ConfigError);
    }
    SUBCASE("malformed yaml carries a line") {
        const auto e = config_error([&] { parse_scenario(std::string(kHeader) + "targets: [1, 2\n"); });
        CHECK(e.line() > 0);
    }
    SUBCASE("frame longer than targets") {
        CHECK_THROWS_AS(parse_scenario(std::string(kHeader) +
                                       "targets:\n  - {delay: 1.0e-6}\nframe:\n  num_chirps: 4\n"
                                       "  doppler_phase_steps: [0.1, 0.2]\n"),
                        ConfigError);
    }
}

TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/dir/none.scenario"), IoError);
    CHECK_THROWS_AS(load_mitigation("/nonexistent/dir/none.mitigation"), IoError);
}

TEST_CASE("report export") {
    MitigationReport r;
    r.snir_before_db = 5.0;
    r.snir_after_db = 45.5;
    r.snir_improvement_db = 40.5;
    r.detected_interferers.push_back({3, 2e12, 40e-6, 10e-6, 80.0, 0.5});
    r.clusters = r.detected_interferers;
    const auto yaml = report_yaml(r);
    CHECK(yaml.find("snir_improvement_db") != std::string::npos);
    CHECK(yaml.find("detected_interferers") != std::string::npos);
    const auto header = report_csv_header();
    const auto row = report_csv_row(7, r);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(row.rfind("7,", 0) == 0);
    const auto frame = report_yaml(std::vector<MitigationReport>{r, r});
    CHECK(frame.size() > yaml.size());
}
