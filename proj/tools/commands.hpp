#pragma once

// The four CLI commands as callable functions. Each writes its outputs and
// one manifest, and returns a process exit code. Library errors propagate
// as exceptions; exit_code_for() maps them.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fmcwim::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageOrConfigError = 2,
    kNumericalFailure = 3,
    kIoFailure = 4,
};

int exit_code_for(const std::exception& e) noexcept;

struct SimulateOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> frames; // overrides the scenario's frame section
    bool verbose = false;
    std::vector<std::string> arguments; // recorded in the manifest
};

struct MitigateOptions {
    std::filesystem::path input;
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::size_t> frames;
    std::optional<std::filesystem::path> cache_dir;
    bool verbose = false;
    std::vector<std::string> arguments;
};

struct AnalyzeOptions {
    std::filesystem::path before;
    std::filesystem::path after;
    std::optional<std::filesystem::path> reference;
    std::optional<std::filesystem::path> config; // mitigation config: rate, slope, targets, window
    std::vector<double> target_freqs;            // Hz; overrides the config's targets
    std::optional<double> sample_rate;           // needed for .f32 inputs without a config
    std::filesystem::path out;                   // output directory
    bool verbose = false;
    std::vector<std::string> arguments;
};

struct BenchOptions {
    std::filesystem::path input;
    std::filesystem::path config;
    std::size_t repetitions = 5;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> out; // timing CSV
    bool verbose = false;
    std::vector<std::string> arguments;
};

// "<stem>.ref<ext>": interference-free companion of a simulated signal.
std::filesystem::path reference_path(const std::filesystem::path& signal);

int cmd_simulate(const SimulateOptions& opts, std::ostream& log);
int cmd_mitigate(const MitigateOptions& opts, std::ostream& log);
int cmd_analyze(const AnalyzeOptions& opts, std::ostream& log);
int cmd_bench(const BenchOptions& opts, std::ostream& log);

// Full command line: parses with CLI11, dispatches, maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fmcwim::cli
