#include "doctest.h"
#include "oracles.hpp"

#include "fmcwim/chirplet_dictionary.hpp"
#include "fmcwim/correlation.hpp"
#include "fmcwim/errors.hpp"
#include "fmcwim/highpass.hpp"
#include "fmcwim/omp_engine.hpp"

#include <random>
#include <set>

using namespace fmcwim;

namespace {

const WaveformParams kWave(77e9, 300e6, 100e-6);
const ReceiverConfig kRx(20e6, 2000);

GridSpec small_spec(std::size_t ms, std::size_t mt) {
    GridSpec s;
    s.slope_range = {2e11, 2e13};
    s.time_range = {-10e-6, 100e-6};
    s.slope_hypotheses = ms;
    s.time_hypotheses = mt;
    return s;
}

} // namespace

TEST_CASE("atom duration") {
    const ReceiverConfig rx10(10e6, 1000); // f_r = 5 MHz
    CHECK(atom_duration(2e12, rx10, kWave) == doctest::Approx(5e-6));
    CHECK(atom_duration(-2e12, rx10, kWave) == doctest::Approx(5e-6));
    // f_r = 10 MHz, 1e10 Hz/s: 2 ms unclamped, clamped to T
    CHECK(atom_duration(1e10, kRx, kWave, 1e9) == doctest::Approx(100e-6));
    CHECK_THROWS_AS(atom_duration(1e8, kRx, kWave), SlopeTooSmall);
    CHECK(default_k_min(kRx, kWave) == doctest::Approx(2.0 * 20e6 / (2000 * 100e-6)));
}

TEST_CASE("atom duration matches synthesized interference support") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> dk(5e11, 2e13);
    std::bernoulli_distribution neg(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const double kappa = neg(rng) ? -dk(rng) : dk(rng);
        // centre the burst mid-chirp so nothing is clipped
        const double ki = kWave.slope() + kappa;
        if (std::abs(ki) < 1e9) continue;
        const double tc = 50e-6;
        const InterferenceSource src{ki, kappa * tc / ki, 1.0};
        const double dur = atom_duration(kappa, kRx, kWave);
        if (dur >= 90e-6) continue;
        const auto x = interference_baseband(kWave, src, kRx);
        const double counted = static_cast<double>(oracle::nonzero_count(x.samples));
        CHECK(std::abs(counted - dur * kRx.sample_rate()) <= 1.0);
    }
}

TEST_CASE("synthesized atom samples") {
    const auto atom = make_atom(10e-6, 4e12, kRx, kWave, default_k_min(kRx, kWave));
    CHECK(atom.start_freq == doctest::Approx(kRx.cutoff()));
    CHECK(atom.duration == doctest::Approx(5e-6));
    const auto w = synthesize_atom(atom, kRx);
    CHECK(w.offset == 200);
    CHECK(w.length() == 101);
    for (std::size_t j = 0; j < w.length(); ++j) {
        const double u = kRx.time_of(w.offset + j) - atom.time_shift;
        const double ph = 2.0 * kPi * (kRx.cutoff() * u + 0.5 * atom.slope * u * u);
        REQUIRE(w.in_phase[j] == doctest::Approx(std::sin(ph)).epsilon(1e-9));
        REQUIRE(w.quadrature[j] == doctest::Approx(std::cos(ph)).epsilon(1e-9));
    }
    double e = 0.0;
    for (double v : w.in_phase) e += (v / w.norm) * (v / w.norm);
    CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
    const auto dense = w.dense_in_phase(kRx);
    CHECK(dense.size() == 2000);
    CHECK(oracle::nonzero_count(dense.samples) <= w.length());
}

TEST_CASE("atom outside the window") {
    const auto atom = make_atom(150e-6, 4e12, kRx, kWave, default_k_min(kRx, kWave));
    CHECK_THROWS_AS(synthesize_atom(atom, kRx), EmptyWindow);
    const auto early = make_atom(-50e-6, 4e12, kRx, kWave, default_k_min(kRx, kWave));
    CHECK_THROWS_AS(synthesize_atom(early, kRx), EmptyWindow);
}

TEST_CASE("grid sizes") {
    CHECK(build_grid(small_spec(20, 300), kRx, kWave).size() == 6000);
    GridSpec big = small_spec(200, 600);
    big.time_range = {-100e-6, 100e-6};
    CHECK(build_grid(big, kRx, kWave).size() == 120000);

    const auto one = build_grid(small_spec(1, 1), kRx, kWave);
    REQUIRE(one.size() == 1);
    CHECK(one.atom(0).slope == doctest::Approx(1.01e13));
    CHECK(one.atom(0).time_shift == doctest::Approx(45e-6));
}

TEST_CASE("invalid grid ranges") {
    auto s = small_spec(4, 4);
    s.slope_range = {1e13, 1e12};
    CHECK_THROWS_AS(build_grid(s, kRx, kWave), InvalidRange);
    s = small_spec(4, 4);
    s.time_range = {1e-6, 0.0};
    CHECK_THROWS_AS(build_grid(s, kRx, kWave), InvalidRange);
    s = small_spec(4, 4);
    s.slope_range = {-1e6, 1e6}; // inside the forbidden band
    CHECK_THROWS_AS(build_grid(s, kRx, kWave), InvalidRange);
    s = small_spec(0, 4);
    CHECK_THROWS_AS(build_grid(s, kRx, kWave), InvalidRange);
}

TEST_CASE("straddling range is placed symmetrically outside the band") {
    auto s = small_spec(10, 3);
    s.slope_range = {-1e13, 1e13};
    const auto g = build_grid(s, kRx, kWave);
    const auto& k = g.slope_values();
    REQUIRE(k.size() == 10);
    for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(std::abs(k[i]) >= g.k_min());
        CHECK(k[i] == doctest::Approx(-k[k.size() - 1 - i]));
    }
}

TEST_CASE("grid invariants") {
    const auto g = build_grid(small_spec(12, 30), kRx, kWave);
    const double fr = kRx.cutoff();
    const double ts = kRx.sample_period();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& a = g.atom(i);
        CHECK(std::abs(a.slope) >= g.k_min());
        CHECK(a.start_freq == fr);
        CHECK(a.duration * std::abs(a.slope) <= 2.0 * fr + ts * std::abs(a.slope));
        if (a.duration < kWave.chirp_duration()) CHECK(a.duration * std::abs(a.slope) == doctest::Approx(2.0 * fr));
        // ordering: time index fastest
        const auto [ki, ti] = g.indices_of(i);
        CHECK(g.index_of(ki, ti) == i);
        CHECK(a.slope == doctest::Approx(g.slope_values()[ki]));
        CHECK(a.time_shift == doctest::Approx(g.time_values()[ti]));
        // stored norms agree with the synthesized waveform
        const auto v = g.waveform(i);
        if (v.length() == 0) continue;
        const auto w = synthesize_atom(a, kRx);
        double e = 0.0;
        for (double x : w.in_phase) e += x * x;
        CHECK(v.norm == doctest::Approx(std::sqrt(e)).epsilon(1e-12));
        CHECK(v.offset == w.offset);
    }
    CHECK(g.active_atoms() <= g.size());
    CHECK_THROWS_AS(g.index_of(12, 0), InvalidParameter);
}

TEST_CASE("refine around one detection") {
    const auto g = build_grid(small_spec(50, 100), kRx, kWave);
    OmpResult r;
    r.support = {g.index_of(20, 50)};
    const auto fine = refine_grid(r, g, 40, 40);
    CHECK(fine.size() == 1600);
    CHECK(fine.regions() == 1);
    CHECK_FALSE(fine.rectangular());
    // centred on the coarse atom, within +- one coarse cell
    const double ks = g.slope_values()[20];
    for (const auto& a : fine.atoms()) {
        CHECK(std::abs(a.slope - ks) <= g.slope_cell(20) + 1.0);
    }
}

TEST_CASE("refine with empty support") {
    const auto g = build_grid(small_spec(5, 5), kRx, kWave);
    CHECK_THROWS_AS(refine_grid(OmpResult{}, g, 4, 4), EmptySupport);
}

TEST_CASE("adjacent detections merge to the set union of their fine grids") {
    const auto g = build_grid(small_spec(50, 100), kRx, kWave);
    const std::size_t ms = 8, mt = 6;
    OmpResult both;
    both.support = {g.index_of(20, 50), g.index_of(21, 50), g.index_of(20, 51)};
    const auto merged = refine_grid(both, g, ms, mt);

    // Oracle: independent single-region grids, deduplicated by parameters.
    std::vector<ChirpletAtom> uni;
    const double slope_tol = 1e-6 * g.slope_cell(20) / ms;
    const double time_tol = 1e-6 * g.time_cell() / mt;
    for (std::size_t idx : both.support) {
        OmpResult single;
        single.support = {idx};
        const auto region = refine_grid(single, g, ms, mt);
        for (const auto& a : region.atoms()) {
            bool dup = false;
            for (const auto& b : uni)
                dup = dup || (std::abs(a.slope - b.slope) < slope_tol && std::abs(a.time_shift - b.time_shift) < time_tol);
            if (!dup) uni.push_back(a);
        }
    }
    CHECK(merged.size() < 3 * ms * mt);
    CHECK(merged.size() == uni.size());
    CHECK(merged.regions() == 3);
    for (const auto& a : merged.atoms()) {
        bool found = false;
        for (const auto& b : uni)
            found = found || (std::abs(a.slope - b.slope) < slope_tol && std::abs(a.time_shift - b.time_shift) < time_tol);
        CHECK(found);
    }
}

TEST_CASE("identity filter leaves the dictionary unchanged") {
    const auto g = build_grid(small_spec(6, 10), kRx, kWave);
    const auto f = filter_dictionary(g, FilterCoeffs::identity());
    REQUIRE(f.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto a = g.waveform(i);
        const auto b = f.waveform(i);
        CHECK(a.offset == b.offset);
        REQUIRE(a.length() == b.length());
        for (std::size_t j = 0; j < a.length(); ++j) REQUIRE(a.in_phase[j] == b.in_phase[j]);
        CHECK(a.norm == b.norm);
    }
    CHECK(f.filter().has_value());
}

TEST_CASE("low-cutoff high-pass barely changes a swept chirp") {
    const auto g = build_grid(small_spec(6, 10), kRx, kWave);
    // Every atom sweeps through DC, so only a narrow stop band keeps the shape.
    const auto hp = design_highpass(50e3, 100e3, kRx);
    const auto f = filter_dictionary(g, hp);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto a = g.waveform(i);
        if (a.length() < 50) continue;
        const auto da = oracle::dense_atom(g, i);
        const auto fa = oracle::convolve_same(hp.taps, da.s);
        const auto stored = oracle::dense_atom(f, i);
        for (std::size_t n = 0; n < fa.size(); ++n) REQUIRE(stored.s[n] == doctest::Approx(fa[n]).epsilon(1e-9).scale(1.0));
        const double c = oracle::dot(fa, da.s) / std::sqrt(oracle::dot(fa, fa) * oracle::dot(da.s, da.s));
        CHECK(c >= 0.99);
        CHECK(f.waveform(i).norm == doctest::Approx(std::sqrt(oracle::dot(fa, fa))).epsilon(1e-12));
    }
}

TEST_CASE("filtered pair selects the same atom as the unfiltered pair") {
    const auto g = build_grid(small_spec(30, 60), kRx, kWave);
    const auto hp = design_highpass(300e3, 300e3, kRx);
    const auto gf = filter_dictionary(g, hp);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    int checked = 0;
    while (checked < 20) {
        const std::size_t truth = pick(rng);
        if (g.waveform(truth).length() < 40) continue;
        auto y = g.waveform(truth).to_waveforms().dense_in_phase(kRx);
        const auto yf = apply_filter(hp, y);
        const auto a = correlate_select(g, y.view());
        const auto b = correlate_select(gf, yf.view());
        CHECK(a.index == truth);
        CHECK(b.index == a.index);
        ++checked;
    }
}
