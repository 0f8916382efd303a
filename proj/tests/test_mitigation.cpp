#include "doctest.h"
#include "oracles.hpp"

#include "fmcwim/config.hpp"
#include "fmcwim/errors.hpp"
#include "fmcwim/mitigation.hpp"

#include <memory>
#include <random>
#include <string>

using namespace fmcwim;

namespace {

std::string preset(const std::string& name) { return std::string(FMCWIM_PRESET_DIR) + "/" + name; }

// Small single-stage-friendly setup: 512 samples, modest grids.
struct Small {
    WaveformParams wave{77e9, 300e6, 100e-6};
    ReceiverConfig rx{5e6, 500};
    MitigationConfig cfg;
    Small() {
        cfg.coarse.slope_hypotheses = 20;
        cfg.coarse.time_hypotheses = 60;
        cfg.coarse.slope_range = std::pair{1e11, 1e13};
        cfg.coarse.omp.max_iterations = 10;
        cfg.fine.slope_hypotheses = 8;
        cfg.fine.time_hypotheses = 8;
        cfg.fine.omp.max_iterations = 60;
        cfg.fine.omp.energy_variation_threshold = 1e-3;
    }
    Scenario scene() const {
        Scenario s;
        s.waveform = wave;
        s.receiver = rx;
        s.targets.push_back({0.4e-6, 1.0});
        s.noise_std = 0.01;
        s.rng_seed = 4;
        return s;
    }
};

// fig3 preset, shared: the 120000-atom coarse dictionary is built once.
struct Fig3 {
    ScenarioFile scenario = load_scenario(preset("fig3.scenario"));
    MitigationFile mitigation = load_mitigation(preset("fig3.mitigation"));
    Mitigator mitigator{mitigation.waveform, mitigation.receiver, mitigation.config};
    SampledSignal y = synthesize_scenario(scenario.scenario);
    MitigationOutput out = mitigator.run(y);
};

const Fig3& fig3() {
    static const auto f = std::make_unique<Fig3>();
    return *f;
}

} // namespace

TEST_CASE("interference-free input passes through untouched") {
    const auto& f = fig3();
    auto sc = f.scenario.scenario.without_interference();
    sc.targets = {{1.1e-6, 1.0}};
    const auto y = synthesize_scenario(sc);
    const auto out = f.mitigator.run(y);
    const auto& report = out.report;
    CHECK(report.detected_interferers.empty());
    CHECK(report.clusters.empty());
    CHECK(report.coarse_stop == StopReason::energy_variation);
    CHECK(report.coarse_iterations == 0);
    CHECK(report.fine_iterations == 0);
    CHECK_FALSE(out.fine.has_value());
    REQUIRE(out.clean.size() == y.size());
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(out.clean.samples[i] == y.samples[i]);
    CHECK(report.snir_improvement_db == 0.0);
    CHECK(report.residual_energy_ratio == 1.0);
}

TEST_CASE("subtraction identity and report consistency") {
    Small s;
    auto sc = s.scene();
    sc.interferers.push_back({4e12, (4e12 - 3e12) * 40e-6 / 4e12, 30.0});
    sc.interferers.push_back({1.2e13, (1.2e13 - 3e12) * 70e-6 / 1.2e13, 20.0});
    const auto y = synthesize_scenario(sc);
    const Mitigator m(s.wave, s.rx, s.cfg);
    const auto out = m.run(y);
    REQUIRE(out.fine.has_value());
    const auto& fine = *out.fine;
    double scale = 0.0;
    for (double v : y.samples) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(std::abs(out.clean.samples[i] + fine.reconstruction.samples[i] - y.samples[i]) <= 1e-9 * scale);

    const auto& r = out.report;
    CHECK(r.snir_improvement_db == r.snir_after_db - r.snir_before_db);
    CHECK(r.detected_interferers.size() == fine.support.size());
    CHECK(r.fine_iterations == fine.iterations_run);
    CHECK(r.residual_energy_ratio == doctest::Approx(out.clean.energy() / y.energy()));
    CHECK(r.omp_wall_time <= r.wall_time);
    const auto fine_grid = m.fine_grid_for(out.coarse);
    for (const auto& d : r.detected_interferers) {
        // slope-duration coupling
        CHECK(d.duration == doctest::Approx(atom_duration(d.slope, s.rx, s.wave, default_k_min(s.rx, s.wave))));
        CHECK(d.amplitude > 0.0);
        CHECK(fine_grid.atom(d.atom_index).slope == d.slope);
    }
    CHECK(r.snir_improvement_db > 10.0);
}

TEST_CASE("high-pass runs on the filtered signal") {
    Small s;
    s.cfg.highpass = design_highpass(100e3, 100e3, s.rx);
    auto sc = s.scene();
    sc.interferers.push_back({4e12, (4e12 - 3e12) * 40e-6 / 4e12, 30.0});
    auto y = synthesize_scenario(sc);
    for (auto& v : y.samples) v += 50.0; // DC leakage
    const Mitigator m(s.wave, s.rx, s.cfg);
    const auto filtered = m.preprocess(y);
    const auto expect = apply_filter(*s.cfg.highpass, y);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(filtered.samples[i] == expect.samples[i]);
    REQUIRE(m.coarse_grid().filter().has_value());
    const auto out = m.run(y);
    REQUIRE(out.fine.has_value());
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(out.clean.samples[i] + out.fine->reconstruction.samples[i] ==
                doctest::Approx(filtered.samples[i]).epsilon(1e-9).scale(60.0));
}

TEST_CASE("prebuilt coarse grid must match receiver and filter") {
    Small s;
    const auto grid = build_grid(s.cfg.coarse_grid_spec(s.rx, s.wave), s.rx, s.wave);
    CHECK_NOTHROW(Mitigator(s.wave, s.rx, s.cfg, grid));
    const ReceiverConfig other(5e6, 400);
    CHECK_THROWS_AS(Mitigator(s.wave, other, s.cfg, grid), InvalidParameter);
    auto with_hp = s.cfg;
    with_hp.highpass = design_highpass(100e3, 100e3, s.rx);
    CHECK_THROWS_AS(Mitigator(s.wave, s.rx, with_hp, grid), InvalidParameter);
    CHECK_NOTHROW(Mitigator(s.wave, s.rx, with_hp, filter_dictionary(grid, *with_hp.highpass)));
}

TEST_CASE("config validation") {
    Small s;
    auto bad = s.cfg;
    bad.fine.time_hypotheses = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = s.cfg;
    bad.k_min = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    const Mitigator m(s.wave, s.rx, s.cfg);
    CHECK_THROWS_AS(m.run(SampledSignal(499, 5e6)), LengthMismatch);
}

TEST_CASE("default coarse ranges") {
    Small s;
    MitigationConfig cfg;
    const auto spec = cfg.coarse_grid_spec(s.rx, s.wave);
    const double k_min = default_k_min(s.rx, s.wave);
    REQUIRE(spec.k_min.has_value());
    CHECK(*spec.k_min == k_min);
    CHECK(spec.slope_range.first == k_min);
    CHECK(spec.slope_range.second == doctest::Approx(default_k_max(s.rx)));
    CHECK(spec.time_range.first == doctest::Approx(-atom_duration(k_min, s.rx, s.wave, k_min)));
    CHECK(spec.time_range.second == s.wave.chirp_duration());
}

TEST_CASE("equivalent atom reproduces the interferer") {
    Small s;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ki(3.5e12, 2e13), tc(10e-6, 90e-6);
    for (int t = 0; t < 20; ++t) {
        const InterferenceSource src{ki(rng), 0.0, 1.0};
        const double dk = src.slope - s.wave.slope();
        const InterferenceSource placed{src.slope, dk * tc(rng) / src.slope, 1.0};
        const auto atom = equivalent_atom(s.wave, placed, s.rx);
        CHECK(atom.slope == doctest::Approx(dk));
        const auto sup = interference_support(s.wave, placed, s.rx);
        CHECK(atom.time_shift == doctest::Approx(sup.interval.start));
        CHECK(atom.duration == doctest::Approx(sup.interval.length()));
    }
    CHECK_THROWS_AS(equivalent_atom(s.wave, InterferenceSource{s.wave.slope(), 1e-6, 1.0}, s.rx), InvalidParameter);
}

TEST_CASE("clustering groups neighbours and keeps the strongest") {
    std::vector<DetectedChirplet> d = {
        {0, 1.00e12, 10e-6, 0, 1.0, 0}, {1, 1.05e12, 10.2e-6, 0, 3.0, 0}, {2, 1.10e12, 10.4e-6, 0, 2.0, 0},
        {3, 5.00e12, 10e-6, 0, 0.5, 0}, {4, 1.00e12, 30e-6, 0, 0.7, 0},
    };
    const auto c = cluster_detections(d, 0.06e12, 0.25e-6);
    REQUIRE(c.size() == 3);
    CHECK(c[0].atom_index == 1); // chained 0-1-2, strongest wins
    CHECK(c[1].atom_index == 3);
    CHECK(c[2].atom_index == 4);
    CHECK(cluster_detections({}, 1.0, 1.0).empty());
    CHECK(cluster_detections(d, 0.0, 0.0).size() == d.size());
}

TEST_CASE("fig3 preset: fine stage beats the coarse fit") {
    const auto& f = fig3();
    const auto& r = f.out.report;
    REQUIRE(f.out.fine.has_value());
    CHECK(r.snir_improvement_db > 35.0);
    CHECK(r.snir_after_db >= r.snir_after_coarse_db);
    CHECK(r.snir_after_db - r.snir_before_db >= r.snir_after_coarse_db - r.snir_before_db);
    CHECK(r.coarse_atoms == 200 * 600);
    for (std::size_t i = 1; i < f.out.fine->residual_energy_history.size(); ++i)
        CHECK(f.out.fine->residual_energy_history[i] <= f.out.fine->residual_energy_history[i - 1]);
}

TEST_CASE("fig3 preset: the interferer is found") {
    const auto& f = fig3();
    const auto& src = f.scenario.scenario.interferers.at(0);
    const auto truth = equivalent_atom(f.scenario.scenario.waveform, src, f.scenario.scenario.receiver);
    const auto& g = f.mitigator.coarse_grid();
    const double fine_slope_cell = 2.0 * g.slope_cell(0) / 40.0;
    const double fine_time_cell = 2.0 * g.time_cell() / 40.0;
    REQUIRE_FALSE(f.out.report.clusters.empty());
    // The strongest cluster is the interferer itself.
    const auto best = *std::max_element(f.out.report.clusters.begin(), f.out.report.clusters.end(),
                                        [](const auto& a, const auto& b) { return a.amplitude < b.amplitude; });
    CHECK(std::abs(best.slope - truth.slope) <= fine_slope_cell);
    CHECK(std::abs(best.time_shift - truth.time_shift) <= fine_time_cell);
    CHECK(best.amplitude == doctest::Approx(src.amplitude).epsilon(0.1));
}

TEST_CASE("fig4 preset: every interferer matched by a detection") {
    const auto sc = load_scenario(preset("fig4.scenario"));
    const auto mf = load_mitigation(preset("fig4.mitigation"));
    const Mitigator m(mf.waveform, mf.receiver, mf.config);
    const auto out = m.run(synthesize_scenario(sc.scenario));
    const auto& r = out.report;
    CHECK(r.clusters.size() >= 4);
    const auto& g = m.coarse_grid();
    const double fine_slope_cell = 2.0 * g.slope_cell(0) / 40.0;
    const double fine_time_cell = 2.0 * g.time_cell() / 40.0;
    for (const auto& src : sc.scenario.interferers) {
        const auto truth = equivalent_atom(sc.scenario.waveform, src, sc.scenario.receiver);
        bool matched = false;
        for (const auto& d : r.detected_interferers)
            matched = matched || (std::abs(d.slope - truth.slope) <= fine_slope_cell &&
                                  std::abs(d.time_shift - truth.time_shift) <= fine_time_cell);
        CHECK_MESSAGE(matched, "interferer slope " << src.slope << " delay " << src.delay);
    }
}
