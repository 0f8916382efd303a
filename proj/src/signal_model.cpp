#include "fmcwim/signal_model.hpp"

#include "fmcwim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fmcwim {

namespace {

// sin(2*pi*cycles) with the integer part of each term stripped first, so
// large carrier phase terms keep full precision.
double sin_cycles(double a, double b) {
    double fa = a - std::floor(a);
    double fb = b - std::floor(b);
    double c = fa + fb;
    return std::sin(2.0 * kPi * (c - std::floor(c)));
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void add_noise(std::vector<double>& samples, double noise_std, std::uint64_t seed) {
    if (noise_std <= 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, noise_std);
    for (double& s : samples) s += dist(rng);
}

} // namespace

WaveformParams::WaveformParams(double carrier_freq, double bandwidth, double chirp_duration)
    : WaveformParams(carrier_freq, bandwidth, chirp_duration, bandwidth / chirp_duration) {}

WaveformParams::WaveformParams(double carrier_freq, double bandwidth, double chirp_duration,
                               double slope)
    : carrier_freq_(carrier_freq), bandwidth_(bandwidth), chirp_duration_(chirp_duration),
      slope_(slope) {
    if (!finite_positive(bandwidth)) throw InvalidParameter("bandwidth must be > 0");
    if (!finite_positive(chirp_duration)) throw InvalidParameter("chirp_duration must be > 0");
    if (!std::isfinite(carrier_freq)) throw InvalidParameter("carrier_freq must be finite");
    const double expected = bandwidth / chirp_duration;
    if (!std::isfinite(slope) || std::abs(slope - expected) > 1e-9 * std::abs(expected))
        throw InvalidParameter("slope must equal bandwidth / chirp_duration");
    slope_ = expected;
}

std::vector<std::string> WaveformParams::warnings() const {
    std::vector<std::string> out;
    if (carrier_freq_ < 76e9 || carrier_freq_ > 81e9)
        out.push_back("carrier frequency " + std::to_string(carrier_freq_) +
                      " Hz outside the 76-81 GHz automotive band");
    return out;
}

ReceiverConfig::ReceiverConfig(double sample_rate, std::size_t num_samples)
    : sample_rate_(sample_rate), num_samples_(num_samples) {
    if (!finite_positive(sample_rate)) throw InvalidParameter("sample_rate must be > 0");
    if (num_samples < 2) throw InvalidParameter("num_samples must be >= 2");
}

void ReceiverConfig::check_against(const WaveformParams& waveform) const {
    // Allow rounding slack of a thousandth of a sample.
    if (window_duration() > waveform.chirp_duration() + 1e-3 * sample_period())
        throw InvalidParameter("num_samples / sample_rate exceeds the chirp duration");
}

void TargetEcho::validate() const {
    if (!std::isfinite(delay) || delay < 0.0) throw InvalidParameter("target delay must be >= 0");
    if (!finite_positive(amplitude)) throw InvalidParameter("target amplitude must be > 0");
}

void InterferenceSource::validate() const {
    if (!std::isfinite(slope)) throw InvalidParameter("interferer slope must be finite");
    if (!std::isfinite(delay)) throw InvalidParameter("interferer delay must be finite");
    if (!finite_positive(amplitude)) throw InvalidParameter("interferer amplitude must be > 0");
}

double SampledSignal::energy() const noexcept {
    return std::inner_product(samples.begin(), samples.end(), samples.begin(), 0.0);
}

bool SampledSignal::all_finite() const noexcept {
    return std::all_of(samples.begin(), samples.end(), [](double v) { return std::isfinite(v); });
}

SampledSignal& SampledSignal::operator+=(const SampledSignal& other) {
    if (other.size() != size()) throw LengthMismatch("signal lengths differ");
    for (std::size_t n = 0; n < samples.size(); ++n) samples[n] += other.samples[n];
    return *this;
}

SampledSignal operator-(const SampledSignal& a, const SampledSignal& b) {
    if (a.size() != b.size()) throw LengthMismatch("signal lengths differ");
    SampledSignal out(a.size(), a.sample_rate);
    for (std::size_t n = 0; n < a.size(); ++n) out.samples[n] = a.samples[n] - b.samples[n];
    return out;
}

void Scenario::validate() const {
    receiver.check_against(waveform);
    for (const auto& t : targets) t.validate();
    for (const auto& i : interferers) i.validate();
    if (!std::isfinite(noise_std) || noise_std < 0.0)
        throw InvalidParameter("noise_std must be >= 0");
}

std::vector<std::string> Scenario::warnings() const {
    auto out = waveform.warnings();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i].beat_frequency(waveform) >= receiver.cutoff())
            out.push_back("target " + std::to_string(i) +
                          " beat frequency is above the receiver cutoff");
    }
    return out;
}

Scenario Scenario::without_interference() const {
    Scenario s = *this;
    s.interferers.clear();
    return s;
}

double interference_frequency(const WaveformParams& waveform, const InterferenceSource& interferer,
                              double t) noexcept {
    return baseband_slope(waveform, interferer) * t - interferer.slope * interferer.delay;
}

SampledSignal target_baseband(const WaveformParams& waveform, const TargetEcho& target,
                              const ReceiverConfig& receiver) {
    const double k = waveform.slope();
    const double tau = target.delay;
    SampledSignal out(receiver.num_samples(), receiver.sample_rate());
    const double carrier_cycles = waveform.carrier_freq() * tau;
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double t = receiver.time_of(n);
        // pi*k*(tau^2 - 2*t*tau) expressed in cycles
        const double chirp_cycles = 0.5 * k * (tau * tau - 2.0 * t * tau);
        out.samples[n] = target.amplitude * sin_cycles(chirp_cycles, carrier_cycles);
    }
    return out;
}

InterferenceSupport interference_support(const WaveformParams& waveform,
                                         const InterferenceSource& interferer,
                                         const ReceiverConfig& receiver) {
    const double chirp_end = waveform.chirp_duration();
    const double dk = baseband_slope(waveform, interferer);
    InterferenceSupport out;
    if (std::abs(dk) <= 1e-12 * std::abs(waveform.slope())) {
        out.degenerate = true;
        out.interval = {0.0, chirp_end};
        return out;
    }
    const double fr = receiver.cutoff();
    const double centre = interferer.slope * interferer.delay;
    double a = (centre - fr) / dk;
    double b = (centre + fr) / dk;
    if (a > b) std::swap(a, b);
    out.interval = {std::max(a, 0.0), std::min(b, chirp_end)};
    return out;
}

SampledSignal interference_baseband(const WaveformParams& waveform,
                                    const InterferenceSource& interferer,
                                    const ReceiverConfig& receiver) {
    SampledSignal out(receiver.num_samples(), receiver.sample_rate());
    const auto support = interference_support(waveform, interferer, receiver);
    if (support.interval.empty()) return out;

    const double dk = baseband_slope(waveform, interferer);
    const double ki = interferer.slope;
    const double tau = interferer.delay;
    const double carrier_cycles = waveform.carrier_freq() * tau;
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double t = receiver.time_of(n);
        if (!support.interval.contains(t)) continue;
        const double chirp_cycles = 0.5 * (dk * t * t - 2.0 * ki * t * tau + ki * tau * tau);
        out.samples[n] = interferer.amplitude * sin_cycles(chirp_cycles, carrier_cycles);
    }
    return out;
}

SampledSignal synthesize_scenario(const Scenario& scenario) {
    scenario.validate();
    const auto& rx = scenario.receiver;
    SampledSignal out(rx.num_samples(), rx.sample_rate());
    for (const auto& t : scenario.targets) out += target_baseband(scenario.waveform, t, rx);
    for (const auto& i : scenario.interferers) out += interference_baseband(scenario.waveform, i, rx);
    add_noise(out.samples, scenario.noise_std, scenario.rng_seed);
    return out;
}

std::vector<SampledSignal> synthesize_frame(const Scenario& scenario, std::size_t num_chirps,
                                            std::span<const double> doppler_phase_step) {
    scenario.validate();
    if (doppler_phase_step.size() != scenario.targets.size())
        throw InvalidParameter("one doppler phase step per target is required");
    const auto& rx = scenario.receiver;
    const double k = scenario.waveform.slope();
    std::vector<SampledSignal> frame;
    frame.reserve(num_chirps);
    for (std::size_t c = 0; c < num_chirps; ++c) {
        SampledSignal chirp(rx.num_samples(), rx.sample_rate());
        for (std::size_t ti = 0; ti < scenario.targets.size(); ++ti) {
            const auto& target = scenario.targets[ti];
            const double tau = target.delay;
            const double offset_cycles = scenario.waveform.carrier_freq() * tau +
                                         static_cast<double>(c) * doppler_phase_step[ti] / (2.0 * kPi);
            for (std::size_t n = 0; n < chirp.size(); ++n) {
                const double t = rx.time_of(n);
                const double chirp_cycles = 0.5 * k * (tau * tau - 2.0 * t * tau);
                chirp.samples[n] += target.amplitude * sin_cycles(chirp_cycles, offset_cycles);
            }
        }
        for (const auto& i : scenario.interferers)
            chirp += interference_baseband(scenario.waveform, i, rx);
        add_noise(chirp.samples, scenario.noise_std, scenario.rng_seed + c);
        frame.push_back(std::move(chirp));
    }
    return frame;
}

} // namespace fmcwim
