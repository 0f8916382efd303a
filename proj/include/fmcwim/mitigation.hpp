#pragma once

// Blind interference removal: optional high-pass on signal and dictionary,
// coarse pursuit over the full slope/time-shift range, fine pursuit on dense
// grids around the coarse detections, then subtraction of the fine fit.

#include "fmcwim/analysis.hpp"
#include "fmcwim/chirplet_dictionary.hpp"
#include "fmcwim/highpass.hpp"
#include "fmcwim/omp_engine.hpp"
#include "fmcwim/signal_model.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fmcwim {

struct CoarseStage {
    std::size_t slope_hypotheses = 200;
    std::size_t time_hypotheses = 600;
    std::optional<std::pair<double, double>> slope_range; // default [k_min, f_r * f_s]
    std::optional<std::pair<double, double>> time_range;  // default [-longest atom, T]
    OmpConfig omp;
};

struct FineStage {
    std::size_t slope_hypotheses = 40;
    std::size_t time_hypotheses = 40;
    OmpConfig omp;
};

struct MitigationConfig {
    CoarseStage coarse;
    FineStage fine;
    std::optional<FilterCoeffs> highpass;
    std::optional<double> k_min;
    // Beat frequencies used for SNIR accounting. Empty: the strongest
    // post-mitigation peak is used.
    std::vector<double> target_freqs;
    WindowKind window = WindowKind::hann;

    void validate() const;
    // Grid spec of the coarse stage with defaults resolved.
    GridSpec coarse_grid_spec(const ReceiverConfig& receiver, const WaveformParams& waveform) const;
};

struct DetectedChirplet {
    std::size_t atom_index = 0;
    double slope = 0.0;      // Hz/s
    double time_shift = 0.0; // s
    double duration = 0.0;   // s
    double amplitude = 0.0;
    double phase = 0.0; // rad
};

struct MitigationReport {
    std::vector<DetectedChirplet> detected_interferers; // one per fine support atom
    std::vector<DetectedChirplet> clusters;             // strongest atom per group
    std::vector<std::size_t> target_bins;
    double snir_before_db = 0.0;
    double snir_after_db = 0.0;
    double snir_improvement_db = 0.0;
    double snir_after_coarse_db = 0.0; // coarse reconstruction subtracted only
    double residual_energy_ratio = 1.0;
    std::size_t coarse_iterations = 0;
    std::size_t fine_iterations = 0;
    std::size_t coarse_atoms = 0;
    std::size_t fine_atoms = 0;
    StopReason coarse_stop = StopReason::none;
    StopReason fine_stop = StopReason::none;
    double wall_time = 0.0;     // s, whole call
    double omp_wall_time = 0.0; // s, pursuit only
};

struct MitigationOutput {
    SampledSignal clean;
    MitigationReport report;
    OmpResult coarse;
    std::optional<OmpResult> fine;
};

// Reusable pipeline: the (filtered) coarse dictionary is built once.
class Mitigator {
public:
    Mitigator(WaveformParams waveform, ReceiverConfig receiver, MitigationConfig config);
    // Uses a prebuilt coarse grid (e.g. from the dictionary cache). It must
    // match the receiver and carry the configured filter; InvalidParameter
    // otherwise.
    Mitigator(WaveformParams waveform, ReceiverConfig receiver, MitigationConfig config,
              DictionaryGrid coarse_grid);

    const MitigationConfig& config() const noexcept { return config_; }
    const DictionaryGrid& coarse_grid() const noexcept { return coarse_grid_; }
    const WaveformParams& waveform() const noexcept { return waveform_; }
    const ReceiverConfig& receiver() const noexcept { return receiver_; }

    // y after the configured high-pass (a copy of y when none is set).
    SampledSignal preprocess(const SampledSignal& y) const;
    // Filtered fine dictionary around the coarse support.
    DictionaryGrid fine_grid_for(const OmpResult& coarse) const;

    MitigationOutput run(const SampledSignal& y) const;

private:
    WaveformParams waveform_;
    ReceiverConfig receiver_;
    MitigationConfig config_;
    DictionaryGrid coarse_grid_;
};

std::pair<SampledSignal, MitigationReport> mitigate(const SampledSignal& y, const WaveformParams& waveform,
                                                    const ReceiverConfig& receiver,
                                                    const MitigationConfig& config);

// Dictionary parameters that reproduce an interferer exactly: baseband slope
// magnitude and the (unclipped) start of its support.
ChirpletAtom equivalent_atom(const WaveformParams& waveform, const InterferenceSource& interferer,
                             const ReceiverConfig& receiver);

// Groups detections whose slope and time shift lie within the given cells.
std::vector<DetectedChirplet> cluster_detections(const std::vector<DetectedChirplet>& detections,
                                                 double slope_cell, double time_cell);

} // namespace fmcwim
