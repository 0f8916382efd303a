#pragma once

// Baseband FMCW receive model: target beat tones plus chirp-like interference
// gated by an ideal anti-alias low-pass, with optional white Gaussian noise.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmcwim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

// Transmit chirp. slope == bandwidth / chirp_duration always holds.
class WaveformParams {
public:
    WaveformParams() = default;

    // Derives the slope from bandwidth and duration.
    WaveformParams(double carrier_freq, double bandwidth, double chirp_duration);

    // Rejects a slope that disagrees with bandwidth / chirp_duration.
    WaveformParams(double carrier_freq, double bandwidth, double chirp_duration, double slope);

    double carrier_freq() const noexcept { return carrier_freq_; }
    double bandwidth() const noexcept { return bandwidth_; }
    double chirp_duration() const noexcept { return chirp_duration_; }
    double slope() const noexcept { return slope_; }

    // Advisory findings (e.g. carrier outside 76-81 GHz). Never fatal.
    std::vector<std::string> warnings() const;

private:
    double carrier_freq_ = 77e9;
    double bandwidth_ = 300e6;
    double chirp_duration_ = 100e-6;
    double slope_ = 3e12;
};

// ADC side. The anti-alias cutoff is pinned to half the sample rate.
class ReceiverConfig {
public:
    ReceiverConfig() = default;
    ReceiverConfig(double sample_rate, std::size_t num_samples);

    double sample_rate() const noexcept { return sample_rate_; }
    std::size_t num_samples() const noexcept { return num_samples_; }
    double cutoff() const noexcept { return sample_rate_ / 2.0; }
    double sample_period() const noexcept { return 1.0 / sample_rate_; }
    double window_duration() const noexcept {
        return static_cast<double>(num_samples_) / sample_rate_;
    }
    double time_of(std::size_t n) const noexcept {
        return static_cast<double>(n) / sample_rate_;
    }

    // Throws InvalidParameter if the samples do not fit inside one chirp.
    void check_against(const WaveformParams& waveform) const;

private:
    double sample_rate_ = 20e6;
    std::size_t num_samples_ = 2000;
};

struct TargetEcho {
    double delay = 0.0;      // s
    double amplitude = 1.0;  // linear

    void validate() const;
    double beat_frequency(const WaveformParams& waveform) const noexcept {
        return waveform.slope() * delay;
    }
};

struct InterferenceSource {
    double slope = 0.0;      // Hz/s, interferer's own chirp rate
    double delay = 0.0;      // s, relative to the victim chirp start
    double amplitude = 1.0;  // linear

    void validate() const;
};

struct SampledSignal {
    std::vector<double> samples;
    double sample_rate = 0.0;

    SampledSignal() = default;
    SampledSignal(std::vector<double> s, double fs) : samples(std::move(s)), sample_rate(fs) {}
    SampledSignal(std::size_t n, double fs) : samples(n, 0.0), sample_rate(fs) {}

    std::size_t size() const noexcept { return samples.size(); }
    std::span<const double> view() const noexcept { return samples; }
    double energy() const noexcept;
    bool all_finite() const noexcept;

    SampledSignal& operator+=(const SampledSignal& other);
};

SampledSignal operator-(const SampledSignal& a, const SampledSignal& b);

struct Scenario {
    WaveformParams waveform;
    ReceiverConfig receiver;
    std::vector<TargetEcho> targets;
    std::vector<InterferenceSource> interferers;
    double noise_std = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
    // Advisory findings collected from every component.
    std::vector<std::string> warnings() const;
    // Same scenario with interferers stripped; shares the noise realization.
    Scenario without_interference() const;
};

// Closed time interval; empty when start > end.
struct TimeInterval {
    double start = 0.0;
    double end = -1.0;

    bool empty() const noexcept { return start > end; }
    double length() const noexcept { return empty() ? 0.0 : end - start; }
    bool contains(double t) const noexcept { return t >= start && t <= end; }
};

struct InterferenceSupport {
    TimeInterval interval;   // already intersected with [0, T]
    bool degenerate = false; // interferer slope equals the victim slope
};

// Baseband slope of an interferer after mixing with the reference chirp.
inline double baseband_slope(const WaveformParams& w, const InterferenceSource& i) noexcept {
    return i.slope - w.slope();
}

// Instantaneous baseband frequency of the interference at time t.
double interference_frequency(const WaveformParams& waveform, const InterferenceSource& interferer,
                              double t) noexcept;

SampledSignal target_baseband(const WaveformParams& waveform, const TargetEcho& target,
                              const ReceiverConfig& receiver);

InterferenceSupport interference_support(const WaveformParams& waveform,
                                         const InterferenceSource& interferer,
                                         const ReceiverConfig& receiver);

SampledSignal interference_baseband(const WaveformParams& waveform,
                                    const InterferenceSource& interferer,
                                    const ReceiverConfig& receiver);

SampledSignal synthesize_scenario(const Scenario& scenario);

// Multi-chirp helper for phase-preservation checks: chirp c adds
// c * doppler_phase_step[t] to the constant phase of target t. Interferers
// are repeated unchanged, noise is drawn per chirp from the scenario seed.
std::vector<SampledSignal> synthesize_frame(const Scenario& scenario, std::size_t num_chirps,
                                            std::span<const double> doppler_phase_step);

} // namespace fmcwim
