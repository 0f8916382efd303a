#pragma once

#include "fmcwim/signal_model.hpp"

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace fmcwim {

enum class WindowKind { rectangular, hann };

inline constexpr double kFloorGuardDb = -300.0;
// Bins further than this below the spectrum maximum are window leakage or
// rounding, and read as the guard.
inline constexpr double kDynamicRangeDb = 150.0;

// One-sided (N/2 + 1 bins) windowed power spectrum. Values are scaled so a
// bin-centred tone of amplitude A reads 20*log10(A) for either window.
struct RangeSpectrum {
    std::vector<double> power_db;
    std::vector<double> bin_freqs;  // Hz
    std::vector<double> range_axis; // m; empty unless a slope was supplied
    WindowKind window = WindowKind::hann;
    std::size_t signal_length = 0;
    double window_sum = 0.0; // sum of window samples (coherent gain * N)

    std::size_t size() const noexcept { return power_db.size(); }
    double bin_width() const noexcept {
        return bin_freqs.size() > 1 ? bin_freqs[1] - bin_freqs[0] : 0.0;
    }
};

struct SnirEstimate {
    std::vector<std::size_t> target_bins;
    double signal_power_db = 0.0;
    double floor_db = 0.0; // median over bins outside targets +- guard
    double snir_db = 0.0;
    bool floor_at_guard = false; // floor hit the numerical guard; snir is a cap
};

struct ComparisonReport {
    std::vector<double> per_bin_delta_db; // after - before
    SnirEstimate before;
    SnirEstimate after;
    double snir_improvement_db = 0.0;
    std::optional<SnirEstimate> reference;
    std::optional<double> gap_to_reference_db;       // |ref peak - after peak| at target bins
    std::optional<double> floor_gap_to_reference_db; // after floor - reference floor
};

inline constexpr std::size_t kGuardCells = 3;

std::vector<double> make_window(WindowKind kind, std::size_t length);

// slope (Hz/s), when given, fills the range axis r = f c / (2 slope).
RangeSpectrum range_spectrum(const SampledSignal& signal, WindowKind window = WindowKind::hann,
                             std::optional<double> slope = std::nullopt);

// Time-domain energy recovered from a rectangular-window spectrum (Parseval).
double spectrum_energy(const RangeSpectrum& spectrum);

std::size_t nearest_bin(const RangeSpectrum& spectrum, double frequency);

// Bins within +-halfwidth of each frequency, deduplicated and sorted.
std::vector<std::size_t> target_bins_for(const RangeSpectrum& spectrum,
                                         std::span<const double> frequencies,
                                         std::size_t halfwidth = 1);

// Bins around the strongest peak above DC; used when no target is known.
std::vector<std::size_t> strongest_peak_bins(const RangeSpectrum& spectrum, std::size_t halfwidth = 1);

SnirEstimate snir_estimate(const RangeSpectrum& spectrum, std::span<const std::size_t> target_bins);

// Throws LengthMismatch for spectra of different lengths.
ComparisonReport compare_runs(const RangeSpectrum& before, const RangeSpectrum& after,
                              const RangeSpectrum* reference, std::span<const std::size_t> target_bins);

// Windowed DFT coefficient at one bin (direct sum).
std::complex<double> dft_bin(const SampledSignal& signal, std::size_t bin,
                             WindowKind window = WindowKind::hann);

// Two columns: frequency (or range when available and requested), power_db.
void write_spectrum_csv(std::ostream& out, const RangeSpectrum& spectrum, bool use_range = false);

} // namespace fmcwim
