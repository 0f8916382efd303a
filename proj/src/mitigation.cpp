#include "fmcwim/mitigation.hpp"

#include "fmcwim/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fmcwim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<DetectedChirplet> detections_of(const OmpResult& result, const DictionaryGrid& grid) {
    std::vector<DetectedChirplet> out;
    out.reserve(result.support.size());
    for (std::size_t s = 0; s < result.support.size(); ++s) {
        const auto& a = grid.atom(result.support[s]);
        const auto& c = result.coefficients[s];
        out.push_back({result.support[s], a.slope, a.time_shift, a.duration, c.magnitude(), c.phase()});
    }
    return out;
}

} // namespace

void MitigationConfig::validate() const {
    if (coarse.slope_hypotheses < 1 || coarse.time_hypotheses < 1)
        throw InvalidParameter("coarse grid needs at least one hypothesis per axis");
    if (fine.slope_hypotheses < 1 || fine.time_hypotheses < 1)
        throw InvalidParameter("fine grid needs at least one hypothesis per axis");
    coarse.omp.validate();
    fine.omp.validate();
    if (highpass) highpass->validate();
    if (k_min && !(*k_min > 0.0)) throw InvalidParameter("k_min must be > 0");
}

GridSpec MitigationConfig::coarse_grid_spec(const ReceiverConfig& receiver,
                                            const WaveformParams& waveform) const {
    GridSpec spec;
    spec.slope_hypotheses = coarse.slope_hypotheses;
    spec.time_hypotheses = coarse.time_hypotheses;
    spec.k_min = k_min.value_or(default_k_min(receiver, waveform));
    spec.slope_range = coarse.slope_range.value_or(std::pair{*spec.k_min, default_k_max(receiver)});
    if (coarse.time_range) {
        spec.time_range = *coarse.time_range;
    } else {
        // Slowest admissible slope in range gives the longest atom.
        const auto [lo, hi] = spec.slope_range;
        double slowest = std::max(*spec.k_min, std::min(std::abs(lo), std::abs(hi)));
        if (lo <= 0.0 && hi >= 0.0) slowest = *spec.k_min;
        const double longest = atom_duration(slowest, receiver, waveform, *spec.k_min);
        spec.time_range = {-longest, waveform.chirp_duration()};
    }
    return spec;
}

Mitigator::Mitigator(WaveformParams waveform, ReceiverConfig receiver, MitigationConfig config)
    : waveform_(std::move(waveform)), receiver_(receiver), config_(std::move(config)) {
    config_.validate();
    receiver_.check_against(waveform_);
    coarse_grid_ = build_grid(config_.coarse_grid_spec(receiver_, waveform_), receiver_, waveform_);
    if (config_.highpass) coarse_grid_ = filter_dictionary(coarse_grid_, *config_.highpass);
}

Mitigator::Mitigator(WaveformParams waveform, ReceiverConfig receiver, MitigationConfig config,
                     DictionaryGrid coarse_grid)
    : waveform_(std::move(waveform)), receiver_(receiver), config_(std::move(config)),
      coarse_grid_(std::move(coarse_grid)) {
    config_.validate();
    receiver_.check_against(waveform_);
    const auto& rx = coarse_grid_.receiver();
    if (rx.num_samples() != receiver_.num_samples() || rx.sample_rate() != receiver_.sample_rate())
        throw InvalidParameter("coarse grid was built for a different receiver");
    const auto& gf = coarse_grid_.filter();
    const bool same_filter = config_.highpass ? (gf && gf->taps == config_.highpass->taps) : !gf;
    if (!same_filter) throw InvalidParameter("coarse grid filter differs from the configured high-pass");
}

SampledSignal Mitigator::preprocess(const SampledSignal& y) const {
    if (y.size() != receiver_.num_samples()) throw LengthMismatch("signal length differs from receiver N");
    return config_.highpass ? apply_filter(*config_.highpass, y) : y;
}

DictionaryGrid Mitigator::fine_grid_for(const OmpResult& coarse) const {
    auto fine = refine_grid(coarse, coarse_grid_, config_.fine.slope_hypotheses, config_.fine.time_hypotheses);
    if (config_.highpass) fine = filter_dictionary(fine, *config_.highpass);
    return fine;
}

MitigationOutput Mitigator::run(const SampledSignal& y) const {
    const auto start = Clock::now();
    MitigationOutput out;
    const SampledSignal filtered = preprocess(y);
    auto& report = out.report;

    auto t0 = Clock::now();
    out.coarse = omp_run(coarse_grid_, filtered, config_.coarse.omp);
    report.omp_wall_time += seconds_since(t0);
    report.coarse_iterations = out.coarse.iterations_run;
    report.coarse_stop = out.coarse.stop_reason;
    report.coarse_atoms = coarse_grid_.size();

    if (out.coarse.support.empty()) {
        out.clean = filtered;
    } else {
        const auto fine_grid = fine_grid_for(out.coarse);
        report.fine_atoms = fine_grid.size();
        t0 = Clock::now();
        out.fine = omp_run(fine_grid, filtered, config_.fine.omp);
        report.omp_wall_time += seconds_since(t0);
        report.fine_iterations = out.fine->iterations_run;
        report.fine_stop = out.fine->stop_reason;
        out.clean = out.fine->residual;
        report.detected_interferers = detections_of(*out.fine, fine_grid);
        const double slope_cell =
            coarse_grid_.slope_values().empty() ? 0.0 : coarse_grid_.slope_cell(0);
        report.clusters = cluster_detections(report.detected_interferers, slope_cell, coarse_grid_.time_cell());
    }

    const auto before = range_spectrum(filtered, config_.window, waveform_.slope());
    const auto after = range_spectrum(out.clean, config_.window, waveform_.slope());
    if (!config_.target_freqs.empty()) {
        report.target_bins = target_bins_for(after, config_.target_freqs);
    } else {
        report.target_bins = strongest_peak_bins(after);
    }
    const auto cmp = compare_runs(before, after, nullptr, report.target_bins);
    report.snir_before_db = cmp.before.snir_db;
    report.snir_after_db = cmp.after.snir_db;
    report.snir_improvement_db = report.snir_after_db - report.snir_before_db;
    if (out.coarse.support.empty()) {
        report.snir_after_coarse_db = report.snir_before_db;
    } else {
        const auto coarse_spec = range_spectrum(out.coarse.residual, config_.window, waveform_.slope());
        report.snir_after_coarse_db = snir_estimate(coarse_spec, report.target_bins).snir_db;
    }
    const double e_in = filtered.energy();
    report.residual_energy_ratio = e_in > 0.0 ? out.clean.energy() / e_in : 1.0;
    report.wall_time = seconds_since(start);
    return out;
}

std::pair<SampledSignal, MitigationReport> mitigate(const SampledSignal& y, const WaveformParams& waveform,
                                                    const ReceiverConfig& receiver,
                                                    const MitigationConfig& config) {
    const auto start = Clock::now();
    Mitigator m(waveform, receiver, config);
    auto out = m.run(y);
    out.report.wall_time = seconds_since(start);
    return {std::move(out.clean), std::move(out.report)};
}

ChirpletAtom equivalent_atom(const WaveformParams& waveform, const InterferenceSource& interferer,
                             const ReceiverConfig& receiver) {
    const double dk = baseband_slope(waveform, interferer);
    if (dk == 0.0) throw InvalidParameter("constant-frequency interference has no chirplet equivalent");
    const double fr = receiver.cutoff();
    const double centre = interferer.slope * interferer.delay;
    const double a = (centre - fr) / dk;
    const double b = (centre + fr) / dk;
    ChirpletAtom atom;
    atom.time_shift = std::min(a, b);
    atom.slope = std::abs(dk);
    atom.duration = std::min(2.0 * fr / std::abs(dk), waveform.chirp_duration());
    atom.start_freq = fr;
    return atom;
}

std::vector<DetectedChirplet> cluster_detections(const std::vector<DetectedChirplet>& detections,
                                                 double slope_cell, double time_cell) {
    const std::size_t n = detections.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = detections[i];
            const auto& b = detections[j];
            if (std::abs(a.slope - b.slope) <= slope_cell && std::abs(a.time_shift - b.time_shift) <= time_cell)
                parent[find(i)] = find(j);
        }
    std::vector<DetectedChirplet> out;
    std::vector<std::size_t> root_slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (root_slot[r] == n) {
            root_slot[r] = out.size();
            out.push_back(detections[i]);
        } else if (detections[i].amplitude > out[root_slot[r]].amplitude) {
            out[root_slot[r]] = detections[i];
        }
    }
    return out;
}

} // namespace fmcwim
