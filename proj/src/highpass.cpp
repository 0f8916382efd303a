#include "fmcwim/highpass.hpp"

#include "fmcwim/errors.hpp"

#include <cmath>
#include <numeric>

namespace fmcwim {

void FilterCoeffs::validate() const {
    if (taps.empty()) throw InvalidParameter("filter needs at least one tap");
    for (double t : taps)
        if (!std::isfinite(t)) throw InvalidParameter("filter taps must be finite");
}

double FilterCoeffs::dc_gain() const noexcept {
    return std::accumulate(taps.begin(), taps.end(), 0.0);
}

FilterCoeffs design_highpass(double cutoff, double transition_width, const ReceiverConfig& receiver) {
    const double fs = receiver.sample_rate();
    if (!(cutoff > 0.0) || !(cutoff < receiver.cutoff()))
        throw InvalidCutoff("high-pass cutoff must lie in (0, fs/2)");
    if (!(transition_width > 0.0) || transition_width >= receiver.cutoff())
        throw InvalidCutoff("transition width must lie in (0, fs/2)");

    // Hamming main-lobe width: ~3.3 / L in normalized frequency.
    auto len = static_cast<std::size_t>(std::ceil(3.3 * fs / transition_width));
    if (len % 2 == 0) ++len;
    if (len < 3) len = 3;

    const double fc = cutoff / fs; // cycles per sample
    const double mid = static_cast<double>(len - 1) / 2.0;
    std::vector<double> lowpass(len);
    for (std::size_t n = 0; n < len; ++n) {
        const double m = static_cast<double>(n) - mid;
        const double sinc = (m == 0.0) ? 2.0 * fc : std::sin(2.0 * kPi * fc * m) / (kPi * m);
        const double window =
            0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(len - 1));
        lowpass[n] = sinc * window;
    }
    const double gain = std::accumulate(lowpass.begin(), lowpass.end(), 0.0);
    FilterCoeffs out;
    out.taps.resize(len);
    for (std::size_t n = 0; n < len; ++n) out.taps[n] = -lowpass[n] / gain;
    out.taps[len / 2] += 1.0;
    out.cutoff = cutoff;
    out.transition_width = transition_width;
    out.design = "windowed-sinc hamming high-pass";
    return out;
}

std::vector<double> apply_filter(const FilterCoeffs& filter, std::span<const double> x) {
    filter.validate();
    const auto& h = filter.taps;
    const auto len = static_cast<std::ptrdiff_t>(h.size());
    const std::ptrdiff_t half = (len - 1) / 2;
    const auto size = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> y(x.size(), 0.0);
    for (std::ptrdiff_t n = 0; n < size; ++n) {
        double acc = 0.0;
        for (std::ptrdiff_t j = 0; j < len; ++j) {
            const std::ptrdiff_t idx = n + half - j;
            if (idx >= 0 && idx < size) acc += h[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(idx)];
        }
        y[static_cast<std::size_t>(n)] = acc;
    }
    return y;
}

SampledSignal apply_filter(const FilterCoeffs& filter, const SampledSignal& x) {
    return {apply_filter(filter, x.view()), x.sample_rate};
}

} // namespace fmcwim
