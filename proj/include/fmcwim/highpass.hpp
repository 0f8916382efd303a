#pragma once

#include "fmcwim/signal_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace fmcwim {

// FIR taps plus the design parameters they came from.
struct FilterCoeffs {
    std::vector<double> taps;
    double cutoff = 0.0;           // Hz, 0 when not a designed high-pass
    double transition_width = 0.0; // Hz
    std::string design;            // e.g. "windowed-sinc hamming high-pass"

    static FilterCoeffs identity() { return {{1.0}, 0.0, 0.0, "identity"}; }

    void validate() const;
    double dc_gain() const noexcept;
};

// Linear-phase windowed-sinc (Hamming) high-pass built by spectral inversion
// of a unit-DC-gain low-pass. Tap count is odd, sized from the transition width.
FilterCoeffs design_highpass(double cutoff, double transition_width, const ReceiverConfig& receiver);

// Zero-delay ("same") convolution: output[n] = sum_j taps[j] * x[n + (L-1)/2 - j],
// with x taken as zero outside its range. Output has the input length.
std::vector<double> apply_filter(const FilterCoeffs& filter, std::span<const double> x);
SampledSignal apply_filter(const FilterCoeffs& filter, const SampledSignal& x);

} // namespace fmcwim
