#pragma once

// YAML config files for scenarios and mitigation runs, and structured-text /
// CSV export of mitigation reports. Parsing is strict: unknown keys, wrong
// types and invalid values raise ConfigError naming the field and line.

#include "fmcwim/mitigation.hpp"
#include "fmcwim/signal_model.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmcwim {

// Optional multi-chirp section of a scenario file.
struct FrameSpec {
    std::size_t num_chirps = 1;
    std::vector<double> doppler_phase_steps; // rad per chirp, one per target (missing -> 0)
};

struct ScenarioFile {
    Scenario scenario;
    std::optional<FrameSpec> frame;
};

// High-pass request as written in a config: designed or explicit taps.
struct HighpassSpec {
    double cutoff = 0.0;
    double transition_width = 0.0;
    std::vector<double> taps; // non-empty: used verbatim
};

struct MitigationFile {
    WaveformParams waveform;
    ReceiverConfig receiver;
    MitigationConfig config; // highpass already designed, target freqs resolved
    std::optional<HighpassSpec> highpass;
    std::vector<double> target_delays; // as written; folded into config.target_freqs
};

ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const ScenarioFile& file);

MitigationFile parse_mitigation(std::string_view text);
MitigationFile load_mitigation(const std::filesystem::path& path);
std::string dump_mitigation(const MitigationFile& file);

// Structured text (YAML) and one CSV row per chirp.
std::string report_yaml(const MitigationReport& report);
std::string report_yaml(const std::vector<MitigationReport>& frame);
std::string report_csv_header();
std::string report_csv_row(std::size_t chirp, const MitigationReport& report);

} // namespace fmcwim
