#include "fmcwim/analysis.hpp"

#include "fmcwim/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>

namespace fmcwim {

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

double to_db(double power) {
    return power > 0.0 ? std::max(10.0 * std::log10(power), kFloorGuardDb) : kFloorGuardDb;
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double peak_at(const RangeSpectrum& s, std::span<const std::size_t> bins) {
    double best = kFloorGuardDb;
    for (auto b : bins) best = std::max(best, s.power_db.at(b));
    return best;
}

} // namespace

std::vector<double> make_window(WindowKind kind, std::size_t length) {
    std::vector<double> w(length, 1.0);
    if (kind == WindowKind::hann && length > 1) {
        for (std::size_t n = 0; n < length; ++n)
            w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(length - 1));
    }
    return w;
}

RangeSpectrum range_spectrum(const SampledSignal& signal, WindowKind window, std::optional<double> slope) {
    const std::size_t n = signal.size();
    if (n < 2) throw InvalidParameter("spectrum needs at least two samples");
    const auto w = make_window(window, n);
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    const std::size_t bins = n / 2 + 1;

    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(bins);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) in[i] = signal.samples[i] * w[i];
    fftw_execute(plan);

    RangeSpectrum s;
    s.window = window;
    s.signal_length = n;
    s.window_sum = wsum;
    s.power_db.resize(bins);
    s.bin_freqs.resize(bins);
    const double scale = 2.0 / wsum;
    for (std::size_t k = 0; k < bins; ++k) {
        const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        s.power_db[k] = to_db(mag2 * scale * scale);
        s.bin_freqs[k] = static_cast<double>(k) * signal.sample_rate / static_cast<double>(n);
    }
    const double top = *std::max_element(s.power_db.begin(), s.power_db.end());
    for (auto& v : s.power_db)
        if (v < top - kDynamicRangeDb) v = kFloorGuardDb;
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);

    if (slope && *slope != 0.0) {
        s.range_axis.resize(bins);
        for (std::size_t k = 0; k < bins; ++k) s.range_axis[k] = s.bin_freqs[k] * kSpeedOfLight / (2.0 * *slope);
    }
    return s;
}

double spectrum_energy(const RangeSpectrum& spectrum) {
    const std::size_t n = spectrum.signal_length;
    const double unscale = spectrum.window_sum * spectrum.window_sum / 4.0;
    double total = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double db = spectrum.power_db[k];
        const double mag2 = db <= kFloorGuardDb ? 0.0 : std::pow(10.0, db / 10.0) * unscale;
        const bool unpaired = k == 0 || (n % 2 == 0 && k == spectrum.size() - 1);
        total += unpaired ? mag2 : 2.0 * mag2;
    }
    return total / static_cast<double>(n);
}

std::size_t nearest_bin(const RangeSpectrum& spectrum, double frequency) {
    const double width = spectrum.bin_width();
    if (!(width > 0.0)) return 0;
    const auto b = static_cast<long long>(std::llround(std::abs(frequency) / width));
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, static_cast<long long>(spectrum.size()) - 1));
}

std::vector<std::size_t> target_bins_for(const RangeSpectrum& spectrum, std::span<const double> frequencies,
                                         std::size_t halfwidth) {
    std::set<std::size_t> bins;
    for (double f : frequencies) {
        const std::size_t c = nearest_bin(spectrum, f);
        const std::size_t lo = c > halfwidth ? c - halfwidth : 0;
        const std::size_t hi = std::min(spectrum.size() - 1, c + halfwidth);
        for (std::size_t b = lo; b <= hi; ++b) bins.insert(b);
    }
    return {bins.begin(), bins.end()};
}

std::vector<std::size_t> strongest_peak_bins(const RangeSpectrum& spectrum, std::size_t halfwidth) {
    if (spectrum.size() < 2) throw InvalidParameter("spectrum has no bins above DC");
    const auto peak = std::max_element(spectrum.power_db.begin() + 1, spectrum.power_db.end());
    const double f = spectrum.bin_freqs[static_cast<std::size_t>(peak - spectrum.power_db.begin())];
    return target_bins_for(spectrum, std::span<const double>(&f, 1), halfwidth);
}

SnirEstimate snir_estimate(const RangeSpectrum& spectrum, std::span<const std::size_t> target_bins) {
    if (target_bins.empty()) throw InvalidParameter("at least one target bin is required");
    std::vector<bool> excluded(spectrum.size(), false);
    for (auto b : target_bins) {
        if (b >= spectrum.size()) throw InvalidParameter("target bin outside the spectrum");
        const std::size_t lo = b > kGuardCells ? b - kGuardCells : 0;
        const std::size_t hi = std::min(spectrum.size() - 1, b + kGuardCells);
        for (std::size_t k = lo; k <= hi; ++k) excluded[k] = true;
    }
    std::vector<double> rest;
    for (std::size_t k = 0; k < spectrum.size(); ++k)
        if (!excluded[k]) rest.push_back(spectrum.power_db[k]);
    if (rest.empty()) throw InvalidParameter("no bins left to estimate the floor");

    SnirEstimate e;
    e.target_bins.assign(target_bins.begin(), target_bins.end());
    e.signal_power_db = peak_at(spectrum, target_bins);
    e.floor_db = median(std::move(rest));
    e.floor_at_guard = e.floor_db <= kFloorGuardDb;
    e.snir_db = e.signal_power_db - e.floor_db;
    return e;
}

ComparisonReport compare_runs(const RangeSpectrum& before, const RangeSpectrum& after,
                              const RangeSpectrum* reference, std::span<const std::size_t> target_bins) {
    if (before.size() != after.size() || (reference && reference->size() != after.size()))
        throw LengthMismatch("spectra must have equal length");
    ComparisonReport r;
    r.per_bin_delta_db.resize(after.size());
    for (std::size_t k = 0; k < after.size(); ++k) r.per_bin_delta_db[k] = after.power_db[k] - before.power_db[k];
    r.before = snir_estimate(before, target_bins);
    r.after = snir_estimate(after, target_bins);
    r.snir_improvement_db = r.after.snir_db - r.before.snir_db;
    if (reference) {
        r.reference = snir_estimate(*reference, target_bins);
        r.gap_to_reference_db = std::abs(r.reference->signal_power_db - r.after.signal_power_db);
        r.floor_gap_to_reference_db = r.after.floor_db - r.reference->floor_db;
    }
    return r;
}

std::complex<double> dft_bin(const SampledSignal& signal, std::size_t bin, WindowKind window) {
    const std::size_t n = signal.size();
    const auto w = make_window(window, n);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        // Reduce the index product first so the angle stays small.
        const auto m = (static_cast<unsigned long long>(bin) * i) % n;
        const double angle = -2.0 * kPi * static_cast<double>(m) / static_cast<double>(n);
        acc += signal.samples[i] * w[i] * std::polar(1.0, angle);
    }
    return acc;
}

void write_spectrum_csv(std::ostream& out, const RangeSpectrum& spectrum, bool use_range) {
    const bool range = use_range && !spectrum.range_axis.empty();
    out << (range ? "range_m" : "freq_hz") << ",power_db\n";
    out.precision(10);
    for (std::size_t k = 0; k < spectrum.size(); ++k)
        out << (range ? spectrum.range_axis[k] : spectrum.bin_freqs[k]) << ',' << spectrum.power_db[k] << '\n';
}

} // namespace fmcwim
