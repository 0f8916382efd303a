#include "doctest.h"
#include "oracles.hpp"

#include "fmcwim/errors.hpp"
#include "fmcwim/omp_engine.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace fmcwim;

namespace {

const WaveformParams kWave(77e9, 300e6, 100e-6);

DictionaryGrid grid_for(std::size_t n, std::size_t ms, std::size_t mt) {
    const ReceiverConfig rx(20e6, n);
    GridSpec s;
    s.slope_range = {2e12, 2e13};
    s.time_range = {-2e-6, static_cast<double>(n) / 20e6};
    s.slope_hypotheses = ms;
    s.time_hypotheses = mt;
    return build_grid(s, rx, kWave);
}

SampledSignal atom_signal(const DictionaryGrid& g, std::size_t i, double a, double b) {
    const auto w = g.waveform(i).to_waveforms();
    SampledSignal y(g.receiver().num_samples(), g.receiver().sample_rate());
    for (std::size_t j = 0; j < w.length(); ++j) y.samples[w.offset + j] = a * w.in_phase[j] + b * w.quadrature[j];
    return y;
}

void check_invariants(const OmpResult& r, const SampledSignal& y, const DictionaryGrid& g) {
    for (std::size_t i = 1; i < r.residual_energy_history.size(); ++i)
        REQUIRE(r.residual_energy_history[i] <= r.residual_energy_history[i - 1]);
    std::set<std::size_t> uniq(r.support.begin(), r.support.end());
    CHECK(uniq.size() == r.support.size());
    const double scale = std::sqrt(y.energy()) + 1e-300;
    for (std::size_t n = 0; n < y.size(); ++n)
        REQUIRE(std::abs(r.reconstruction.samples[n] + r.residual.samples[n] - y.samples[n]) <= 1e-9 * scale);
    const double rn = std::sqrt(r.residual.energy());
    if (rn > 1e-9 * scale) {
        for (std::size_t idx : r.support) {
            const auto a = oracle::dense_atom(g, idx);
            for (const auto* col : {&a.s, &a.c}) {
                const double c = oracle::dot(*col, r.residual.samples) / (std::sqrt(oracle::dot(*col, *col)) * rn);
                CHECK(std::abs(c) < 1e-7);
            }
        }
    }
    CHECK(r.coefficients.size() == r.support.size());
    CHECK(r.iterations_run == r.support.size());
    CHECK(r.residual_energy_history.size() == r.iterations_run + 1);
}

} // namespace

TEST_CASE("config validation") {
    OmpConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c = {};
    c.energy_variation_threshold = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c = {};
    c.absolute_residual_threshold = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c.absolute_residual_threshold.reset();
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("coefficient magnitude and phase") {
    AtomCoefficient c{0.0, 2.0};
    CHECK(c.magnitude() == doctest::Approx(2.0));
    // in_phase*sin + quadrature*cos == |c| sin(phi + phase)
    const double phi = 0.7;
    CHECK(c.in_phase * std::sin(phi) + c.quadrature * std::cos(phi) ==
          doctest::Approx(c.magnitude() * std::sin(phi + c.phase())));
}

TEST_CASE("least squares fit") {
    const auto g = grid_for(256, 5, 10);
    std::size_t i = 0;
    while (g.waveform(i).length() < 30) ++i;
    const auto w = g.waveform(i).to_waveforms();

    SUBCASE("scaled atom") {
        const auto y = atom_signal(g, i, 3.0, 0.0);
        const auto c = least_squares_fit(std::span<const AtomWaveforms>(&w, 1), y);
        REQUIRE(c.size() == 1);
        CHECK(c[0].magnitude() == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(c[0].phase() == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("orthogonal signal") {
        SampledSignal y(256, 20e6);
        // energy only outside the atom window
        for (std::size_t n = 0; n < 256; ++n)
            if (n < w.offset || n >= w.offset + w.length()) y.samples[n] = 1.0;
        const auto c = least_squares_fit(std::span<const AtomWaveforms>(&w, 1), y);
        CHECK(c[0].magnitude() == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("two overlapping atoms against a normal-equations solve") {
        std::size_t j = i + 1;
        while (g.waveform(j).length() < 30) ++j;
        const auto w2 = g.waveform(j).to_waveforms();
        auto y = atom_signal(g, i, 1.2, -0.4);
        y += atom_signal(g, j, 0.3, 0.9);
        for (std::size_t n = 0; n < 256; ++n) y.samples[n] += 0.01 * std::sin(0.9 * static_cast<double>(n));
        const std::vector<AtomWaveforms> both = {w, w2};
        const auto c = least_squares_fit(both, y);
        Eigen::MatrixXd e(256, 4);
        const auto a = oracle::dense_atom(g, i), b = oracle::dense_atom(g, j);
        for (std::size_t n = 0; n < 256; ++n) {
            e(n, 0) = a.s[n];
            e(n, 1) = a.c[n];
            e(n, 2) = b.s[n];
            e(n, 3) = b.c[n];
        }
        const auto ref = oracle::normal_solve(e, Eigen::Map<const Eigen::VectorXd>(y.samples.data(), 256));
        CHECK(c[0].in_phase == doctest::Approx(ref(0)).epsilon(1e-6));
        CHECK(c[0].quadrature == doctest::Approx(ref(1)).epsilon(1e-6));
        CHECK(c[1].in_phase == doctest::Approx(ref(2)).epsilon(1e-6));
        CHECK(c[1].quadrature == doctest::Approx(ref(3)).epsilon(1e-6));
    }
    SUBCASE("duplicate atoms are rank deficient") {
        const std::vector<AtomWaveforms> dup = {w, w};
        CHECK_THROWS_AS(least_squares_fit(dup, atom_signal(g, i, 1.0, 0.0)), RankDeficient);
    }
}

TEST_CASE("incremental QR refuses dependent columns") {
    IncrementalQR qr(8);
    std::vector<double> a = {1, 2, 3}, b = {2, 4, 6}, c = {0, 1, 0};
    CHECK(qr.append(1, a));
    CHECK_FALSE(qr.append(1, b));
    CHECK(qr.columns() == 1);
    CHECK(qr.append(1, c));
    qr.pop_back();
    CHECK(qr.columns() == 1);
}

TEST_CASE("single on-grid atom is recovered in one step") {
    const auto g = grid_for(256, 6, 12);
    std::size_t i = 0;
    while (g.waveform(i).length() < 40) ++i;
    const auto y = atom_signal(g, i, 0.8, -0.5);
    OmpConfig cfg;
    cfg.max_iterations = 10;
    const auto r = omp_run(g, y, cfg);
    REQUIRE(r.support.size() == 1);
    CHECK(r.support[0] == i);
    CHECK(r.residual.energy() < 1e-10 * y.energy());
    CHECK(r.stop_reason == StopReason::residual_threshold);
    CHECK(r.coefficients[0].in_phase == doctest::Approx(0.8).epsilon(1e-9));
    check_invariants(r, y, g);
}

TEST_CASE("two disjoint on-grid atoms") {
    const auto g = grid_for(256, 6, 12);
    // pick two atoms with non-overlapping windows
    std::size_t i = 0, j = 0;
    bool found = false;
    for (i = 0; i < g.size() && !found; ++i) {
        const auto a = g.waveform(i);
        if (a.length() < 30) continue;
        for (j = i + 1; j < g.size(); ++j) {
            const auto b = g.waveform(j);
            if (b.length() >= 30 && (b.offset >= a.offset + a.length() || a.offset >= b.offset + b.length())) {
                found = true;
                break;
            }
        }
        if (found) break;
    }
    REQUIRE(found);
    auto y = atom_signal(g, i, 1.0, 0.0);
    y += atom_signal(g, j, 0.0, 0.4);
    const auto r = omp_run(g, y, OmpConfig{});
    REQUIRE(r.iterations_run == 2);
    std::set<std::size_t> sup(r.support.begin(), r.support.end());
    CHECK(sup == std::set<std::size_t>{i, j});
    for (std::size_t s = 0; s < 2; ++s) {
        const double want = r.support[s] == i ? 1.0 : 0.4;
        CHECK(std::abs(r.coefficients[s].magnitude() - want) < 1e-6);
    }
    check_invariants(r, y, g);
}

TEST_CASE("white noise stops on the energy variation rule") {
    const auto g = grid_for(256, 6, 12);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0.0, 1.0);
    SampledSignal y(256, 20e6);
    for (auto& v : y.samples) v = d(rng);
    OmpConfig cfg;
    cfg.energy_variation_threshold = 0.05;
    const auto r = omp_run(g, y, cfg);
    CHECK(r.stop_reason == StopReason::energy_variation);
    CHECK(r.iterations_run < 10);
    CHECK(r.reconstruction.energy() < 0.5 * y.energy());
    check_invariants(r, y, g);
}

TEST_CASE("zero input and length checks") {
    const auto g = grid_for(128, 3, 4);
    const auto r = omp_run(g, SampledSignal(128, 20e6), OmpConfig{});
    CHECK(r.stop_reason == StopReason::zero_input);
    CHECK(r.support.empty());
    CHECK_THROWS_AS(omp_run(g, SampledSignal(100, 20e6), OmpConfig{}), LengthMismatch);
    SampledSignal bad(128, 20e6);
    bad.samples[3] = std::nan("");
    CHECK_THROWS_AS(omp_run(g, bad, OmpConfig{}), NumericalError);
}

TEST_CASE("iteration cap") {
    const auto g = grid_for(256, 6, 12);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> d(0.0, 1.0);
    SampledSignal y(256, 20e6);
    for (auto& v : y.samples) v = d(rng);
    OmpConfig cfg;
    cfg.max_iterations = 3;
    cfg.energy_variation_threshold = 1e-9;
    const auto r = omp_run(g, y, cfg);
    CHECK(r.iterations_run == 3);
    CHECK(r.stop_reason == StopReason::max_iterations);
}

TEST_CASE("matches the naive reference on random small instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> nsamp(96, 256);
    std::uniform_int_distribution<std::size_t> dim(3, 8);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = grid_for(nsamp(rng), dim(rng), dim(rng));
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        SampledSignal y(g.receiver().num_samples(), 20e6);
        for (int k = 0; k < 3; ++k) y += atom_signal(g, pick(rng), d(rng), d(rng));
        for (auto& v : y.samples) v += 0.05 * d(rng);
        OmpConfig cfg;
        cfg.max_iterations = 8;
        cfg.energy_variation_threshold = 0.005;
        cfg.parallel = trial % 2 == 0;
        const auto got = omp_run(g, y, cfg);
        const auto want = oracle::naive_omp(g, y.samples, cfg);
        REQUIRE(got.support == want.support);
        for (std::size_t s = 0; s < got.support.size(); ++s) {
            CHECK(got.coefficients[s].in_phase == doctest::Approx(want.w[2 * s]).epsilon(1e-6));
            CHECK(got.coefficients[s].quadrature == doctest::Approx(want.w[2 * s + 1]).epsilon(1e-6));
        }
        CHECK(got.residual.energy() == doctest::Approx(want.energies.back()).epsilon(1e-9));
        CHECK(got.stop_reason == want.stop);
        check_invariants(got, y, g);
    }
}

TEST_CASE("trace csv") {
    const auto g = grid_for(256, 6, 12);
    std::size_t i = 0;
    while (g.waveform(i).length() < 40) ++i;
    const auto r = omp_run(g, atom_signal(g, i, 1.0, 0.0), OmpConfig{});
    std::ostringstream out;
    write_trace_csv(out, r, g);
    const auto text = out.str();
    CHECK(text.rfind("iteration,atom_index,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(1 + r.trace.size()));
    CHECK(to_string(StopReason::energy_variation) == "energy_variation");
}
