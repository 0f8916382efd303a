#include "fmcwim/chirplet_dictionary.hpp"

#include "fmcwim/errors.hpp"
#include "fmcwim/omp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

namespace fmcwim {

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

double cell_of(double lo, double hi, std::size_t count) {
    return count > 1 ? (hi - lo) / static_cast<double>(count - 1) : (hi - lo);
}

// Fill the two quadrature components of an unfiltered atom over its window.
void fill_atom(const ChirpletAtom& atom, const ReceiverConfig& receiver, std::size_t first,
               std::span<double> in_phase, std::span<double> quadrature) {
    for (std::size_t j = 0; j < in_phase.size(); ++j) {
        const double u = receiver.time_of(first + j) - atom.time_shift;
        const double cycles = atom.start_freq * u + 0.5 * atom.slope * u * u;
        const double phase = 2.0 * kPi * (cycles - std::floor(cycles));
        in_phase[j] = std::sin(phase);
        quadrature[j] = std::cos(phase);
    }
}

double norm_of(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

struct SlopeSegment {
    double lo;
    double hi;
    std::size_t count;
};

std::vector<SlopeSegment> slope_segments(std::pair<double, double> range, std::size_t count,
                                         double k_min) {
    const auto [lo, hi] = range;
    std::vector<SlopeSegment> segs;
    const bool has_neg = lo <= -k_min;
    const bool has_pos = hi >= k_min;
    if (!has_neg && !has_pos)
        throw InvalidRange("slope range lies inside the forbidden band (-k_min, k_min)");
    const double neg_hi = std::min(hi, -k_min);
    const double pos_lo = std::max(lo, k_min);
    if (has_neg && has_pos) {
        const double len_neg = neg_hi - lo;
        const double len_pos = hi - pos_lo;
        if (count == 1) {
            if (len_neg > len_pos)
                segs.push_back({lo, neg_hi, 1});
            else
                segs.push_back({pos_lo, hi, 1});
            return segs;
        }
        const double total = len_neg + len_pos;
        auto n_neg = total > 0.0
                         ? static_cast<std::size_t>(std::llround(static_cast<double>(count) * len_neg / total))
                         : count / 2;
        n_neg = std::clamp<std::size_t>(n_neg, 1, count - 1);
        segs.push_back({lo, neg_hi, n_neg});
        segs.push_back({pos_lo, hi, count - n_neg});
        return segs;
    }
    if (has_neg)
        segs.push_back({lo, neg_hi, count});
    else
        segs.push_back({pos_lo, hi, count});
    return segs;
}

} // namespace

SampledSignal AtomWaveforms::dense_in_phase(const ReceiverConfig& receiver) const {
    SampledSignal out(receiver.num_samples(), receiver.sample_rate());
    std::copy(in_phase.begin(), in_phase.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(offset));
    return out;
}

SampledSignal AtomWaveforms::dense_quadrature(const ReceiverConfig& receiver) const {
    SampledSignal out(receiver.num_samples(), receiver.sample_rate());
    std::copy(quadrature.begin(), quadrature.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(offset));
    return out;
}

AtomWaveforms AtomView::to_waveforms() const {
    return {offset, {in_phase.begin(), in_phase.end()}, {quadrature.begin(), quadrature.end()}, norm,
            quadrature_norm};
}

AtomBank::AtomBank(std::span<const std::size_t> offsets, std::span<const std::size_t> lengths)
    : offsets_(offsets.begin(), offsets.end()), lengths_(lengths.begin(), lengths.end()),
      starts_(offsets.size()), norms_(offsets.size(), 0.0),
      quadrature_norms_(offsets.size(), 0.0), crosses_(offsets.size(), 0.0) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < lengths_.size(); ++i) {
        starts_[i] = total;
        total += lengths_[i];
    }
    in_phase_.assign(total, 0.0);
    quadrature_.assign(total, 0.0);
}

AtomView AtomBank::view(std::size_t i) const noexcept {
    const std::span<const double> ip(in_phase_);
    const std::span<const double> qu(quadrature_);
    return {offsets_[i], ip.subspan(starts_[i], lengths_[i]), qu.subspan(starts_[i], lengths_[i]),
            norms_[i], quadrature_norms_[i], crosses_[i]};
}

void AtomBank::store(std::size_t i, std::span<const double> in_phase,
                     std::span<const double> quadrature) {
    std::copy(in_phase.begin(), in_phase.end(), in_phase_.begin() + static_cast<std::ptrdiff_t>(starts_[i]));
    std::copy(quadrature.begin(), quadrature.end(),
              quadrature_.begin() + static_cast<std::ptrdiff_t>(starts_[i]));
    norms_[i] = norm_of(in_phase);
    quadrature_norms_[i] = norm_of(quadrature);
    crosses_[i] = std::inner_product(in_phase.begin(), in_phase.end(), quadrature.begin(), 0.0);
}

AtomBank AtomBank::from_packed(std::vector<std::size_t> offsets, std::vector<std::size_t> lengths,
                               std::vector<double> in_phase, std::vector<double> quadrature,
                               std::vector<double> norms, std::vector<double> quadrature_norms) {
    AtomBank bank;
    bank.starts_.resize(lengths.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        bank.starts_[i] = total;
        total += lengths[i];
    }
    if (total != in_phase.size() || total != quadrature.size() || norms.size() != lengths.size() ||
        quadrature_norms.size() != lengths.size() ||
        offsets.size() != lengths.size())
        throw InvalidParameter("inconsistent packed atom bank");
    bank.offsets_ = std::move(offsets);
    bank.lengths_ = std::move(lengths);
    bank.in_phase_ = std::move(in_phase);
    bank.quadrature_ = std::move(quadrature);
    bank.norms_ = std::move(norms);
    bank.quadrature_norms_ = std::move(quadrature_norms);
    bank.crosses_.resize(bank.lengths_.size());
    for (std::size_t i = 0; i < bank.lengths_.size(); ++i) {
        const auto v = bank.view(i);
        bank.crosses_[i] = std::inner_product(v.in_phase.begin(), v.in_phase.end(), v.quadrature.begin(), 0.0);
    }
    return bank;
}

std::size_t DictionaryGrid::index_of(std::size_t kappa_index, std::size_t tau_index) const {
    if (!rectangular_ || kappa_index >= slope_hypotheses_ || tau_index >= time_hypotheses_)
        throw InvalidParameter("grid index out of range");
    return kappa_index * time_hypotheses_ + tau_index;
}

std::pair<std::size_t, std::size_t> DictionaryGrid::indices_of(std::size_t atom_index) const {
    if (!rectangular_ || atom_index >= atoms_.size())
        throw InvalidParameter("atom index out of range");
    return {atom_index / time_hypotheses_, atom_index % time_hypotheses_};
}

std::size_t DictionaryGrid::active_atoms() const noexcept {
    std::size_t count = 0;
    for (std::size_t i = 0; i < bank_.size(); ++i) count += bank_.view(i).active() ? 1 : 0;
    return count;
}

void DictionaryGrid::synthesize_bank() {
    const std::size_t m = atoms_.size();
    std::vector<std::size_t> offsets(m), lengths(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = atoms_[i];
        const auto [first, count] = window_samples(a.time_shift, a.time_shift + a.duration, receiver_);
        offsets[i] = first;
        lengths[i] = count;
    }
    bank_ = AtomBank(offsets, lengths);
    const auto total = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
    {
        std::vector<double> ip, qu;
#pragma omp for schedule(dynamic, 64)
        for (std::ptrdiff_t ii = 0; ii < total; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (lengths[i] == 0) continue;
            ip.resize(lengths[i]);
            qu.resize(lengths[i]);
            fill_atom(atoms_[i], receiver_, offsets[i], ip, qu);
            bank_.store(i, ip, qu);
        }
    }
}

double default_k_min(const ReceiverConfig& receiver, const WaveformParams& waveform) {
    return 2.0 * receiver.sample_rate() /
           (static_cast<double>(receiver.num_samples()) * waveform.chirp_duration());
}

double default_k_max(const ReceiverConfig& receiver) {
    return receiver.cutoff() * receiver.sample_rate();
}

double atom_duration(double slope, const ReceiverConfig& receiver, const WaveformParams& waveform,
                     double k_min) {
    if (!std::isfinite(slope) || std::abs(slope) < k_min)
        throw SlopeTooSmall("|slope| below the minimum dictionary slope");
    return std::min(std::abs(2.0 * receiver.cutoff() / slope), waveform.chirp_duration());
}

double atom_duration(double slope, const ReceiverConfig& receiver, const WaveformParams& waveform) {
    return atom_duration(slope, receiver, waveform, default_k_min(receiver, waveform));
}

ChirpletAtom make_atom(double time_shift, double slope, const ReceiverConfig& receiver,
                       const WaveformParams& waveform, double k_min) {
    return {time_shift, slope, atom_duration(slope, receiver, waveform, k_min), receiver.cutoff()};
}

std::pair<std::size_t, std::size_t> window_samples(double start, double end,
                                                   const ReceiverConfig& receiver) {
    const std::size_t n = receiver.num_samples();
    if (!(start <= end) || end < 0.0) return {0, 0};
    const double fs = receiver.sample_rate();
    // Estimate from the scaled bounds, then settle with the exact t_n comparison
    // so the window agrees with per-sample membership tests.
    double lo_est = std::max(0.0, std::ceil(start * fs) - 1.0);
    auto first = static_cast<std::size_t>(std::min(lo_est, static_cast<double>(n)));
    while (first < n && receiver.time_of(first) < start) ++first;
    while (first > 0 && receiver.time_of(first - 1) >= start) --first;
    if (first >= n || receiver.time_of(first) > end) return {0, 0};
    double hi_est = std::floor(end * fs) + 1.0;
    auto last = static_cast<std::size_t>(std::clamp(hi_est, 0.0, static_cast<double>(n - 1)));
    while (last > first && receiver.time_of(last) > end) --last;
    while (last + 1 < n && receiver.time_of(last + 1) <= end) ++last;
    return {first, last - first + 1};
}

AtomWaveforms synthesize_atom(const ChirpletAtom& atom, const ReceiverConfig& receiver) {
    const auto [first, count] = window_samples(atom.time_shift, atom.time_shift + atom.duration, receiver);
    if (count == 0) throw EmptyWindow("atom window does not overlap the sample window");
    AtomWaveforms out;
    out.offset = first;
    out.in_phase.resize(count);
    out.quadrature.resize(count);
    fill_atom(atom, receiver, first, out.in_phase, out.quadrature);
    out.norm = norm_of(out.in_phase);
    out.quadrature_norm = norm_of(out.quadrature);
    return out;
}

DictionaryGrid build_grid(const GridSpec& spec, const ReceiverConfig& receiver,
                          const WaveformParams& waveform) {
    receiver.check_against(waveform);
    if (spec.slope_hypotheses < 1 || spec.time_hypotheses < 1)
        throw InvalidRange("grid needs at least one hypothesis per axis");
    const auto [s_lo, s_hi] = spec.slope_range;
    const auto [t_lo, t_hi] = spec.time_range;
    if (!std::isfinite(s_lo) || !std::isfinite(s_hi) || s_lo > s_hi)
        throw InvalidRange("slope range is empty");
    if (!std::isfinite(t_lo) || !std::isfinite(t_hi) || t_lo > t_hi)
        throw InvalidRange("time range is empty");
    const double k_min = spec.k_min.value_or(default_k_min(receiver, waveform));
    if (!(k_min > 0.0)) throw InvalidRange("k_min must be > 0");

    DictionaryGrid grid;
    grid.receiver_ = receiver;
    grid.waveform_ = waveform;
    grid.k_min_ = k_min;
    grid.slope_hypotheses_ = spec.slope_hypotheses;
    grid.time_hypotheses_ = spec.time_hypotheses;
    grid.slope_range_ = spec.slope_range;
    grid.time_range_ = spec.time_range;
    grid.rectangular_ = true;
    grid.regions_ = 1;

    for (const auto& seg : slope_segments(spec.slope_range, spec.slope_hypotheses, k_min)) {
        const auto values = linspace(seg.lo, seg.hi, seg.count);
        grid.slope_values_.insert(grid.slope_values_.end(), values.begin(), values.end());
        grid.slope_cells_.insert(grid.slope_cells_.end(), seg.count, cell_of(seg.lo, seg.hi, seg.count));
    }
    grid.time_values_ = linspace(t_lo, t_hi, spec.time_hypotheses);
    grid.time_cell_ = cell_of(t_lo, t_hi, spec.time_hypotheses);

    grid.atoms_.reserve(spec.slope_hypotheses * spec.time_hypotheses);
    for (double slope : grid.slope_values_)
        for (double shift : grid.time_values_)
            grid.atoms_.push_back(make_atom(shift, slope, receiver, waveform, k_min));
    grid.synthesize_bank();
    return grid;
}

DictionaryGrid refine_grid(const OmpResult& coarse_result, const DictionaryGrid& coarse_grid,
                           std::size_t fine_slope_hypotheses, std::size_t fine_time_hypotheses) {
    if (coarse_result.support.empty()) throw EmptySupport("coarse search selected no atoms");
    if (!coarse_grid.rectangular()) throw InvalidParameter("refinement needs a rectangular coarse grid");
    if (fine_slope_hypotheses < 1 || fine_time_hypotheses < 1)
        throw InvalidRange("fine grid needs at least one hypothesis per axis");

    const auto& rx = coarse_grid.receiver();
    const auto& wf = coarse_grid.waveform_params();
    const double k_min = coarse_grid.k_min();
    const auto [s_lo, s_hi] = coarse_grid.slope_range();
    const auto [t_lo, t_hi] = coarse_grid.time_range();
    const double time_cell = coarse_grid.time_cell();
    const double ms = static_cast<double>(fine_slope_hypotheses);
    const double mt = static_cast<double>(fine_time_hypotheses);
    const double time_step = 2.0 * time_cell / mt;

    DictionaryGrid fine;
    fine.receiver_ = rx;
    fine.waveform_ = wf;
    fine.k_min_ = k_min;
    fine.slope_hypotheses_ = fine_slope_hypotheses;
    fine.time_hypotheses_ = fine_time_hypotheses;
    fine.slope_range_ = coarse_grid.slope_range();
    fine.time_range_ = coarse_grid.time_range();
    fine.rectangular_ = false;
    fine.regions_ = 0;

    // Every region sits on the same half-step lattice anchored at the range
    // origin, so overlapping regions produce identical keys.
    std::set<std::tuple<int, long long, long long>> seen;
    const double slope_tol = 1e-9 * std::max(std::abs(s_lo), std::abs(s_hi));
    const double time_tol = 1e-9 * std::max(time_cell, rx.sample_period());

    for (std::size_t atom_index : coarse_result.support) {
        const auto [ki, ti] = coarse_grid.indices_of(atom_index);
        const double centre_slope = coarse_grid.slope_values()[ki];
        // Snap the region centre so its midpoints fall on the shared time lattice.
        const double raw_mid = coarse_grid.time_values()[ti] + 0.5 * atom_duration(centre_slope, rx, wf, k_min);
        const double parity = fine_time_hypotheses % 2 == 0 ? 0.5 : 0.0;
        const double centre_mid =
            t_lo + (std::round((raw_mid - t_lo) / time_step - parity) + parity) * time_step;
        const double slope_cell = coarse_grid.slope_cell(ki);
        const double slope_step = 2.0 * slope_cell / ms;
        const int segment = centre_slope < 0.0 ? -1 : 1;
        const double seg_origin = segment < 0 ? s_lo : std::max(s_lo, k_min);
        ++fine.regions_;
        for (std::size_t a = 0; a < fine_slope_hypotheses; ++a) {
            const double slope =
                centre_slope + (static_cast<double>(a) - (ms - 1.0) / 2.0) * slope_step;
            if (slope < s_lo - slope_tol || slope > s_hi + slope_tol) continue;
            if (std::abs(slope) < k_min) continue;
            const long long slope_key =
                slope_step > 0.0 ? std::llround(2.0 * (slope - seg_origin) / slope_step) : 0;
            const double half_duration = 0.5 * atom_duration(slope, rx, wf, k_min);
            for (std::size_t b = 0; b < fine_time_hypotheses; ++b) {
                const double mid = centre_mid + (static_cast<double>(b) - (mt - 1.0) / 2.0) * time_step;
                const double shift = mid - half_duration;
                if (shift < t_lo - time_tol || shift > t_hi + time_tol) continue;
                const long long time_key =
                    time_step > 0.0 ? std::llround(2.0 * (mid - t_lo) / time_step) : 0;
                if (!seen.emplace(segment, slope_key, time_key).second) continue;
                fine.atoms_.push_back(make_atom(shift, slope, rx, wf, k_min));
            }
        }
    }
    fine.synthesize_bank();
    return fine;
}

DictionaryGrid filter_dictionary(const DictionaryGrid& grid, const FilterCoeffs& filter) {
    filter.validate();
    DictionaryGrid out = grid;
    const auto& rx = grid.receiver();
    const std::size_t n_total = rx.num_samples();
    const std::size_t half = (filter.taps.size() - 1) / 2;
    const std::size_t m = grid.size();

    std::vector<std::size_t> offsets(m), lengths(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto v = grid.waveform(i);
        if (v.length() == 0) {
            offsets[i] = 0;
            lengths[i] = 0;
            continue;
        }
        const std::size_t lo = v.offset > half ? v.offset - half : 0;
        const std::size_t hi = std::min(n_total, v.offset + v.length() + half);
        offsets[i] = lo;
        lengths[i] = hi - lo;
    }
    out.bank_ = AtomBank(offsets, lengths);
    const auto total = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
    {
        std::vector<double> ip, qu;
#pragma omp for schedule(dynamic, 64)
        for (std::ptrdiff_t ii = 0; ii < total; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (lengths[i] == 0) continue;
            const auto v = grid.waveform(i);
            ip.assign(lengths[i], 0.0);
            qu.assign(lengths[i], 0.0);
            const std::size_t shift = v.offset - offsets[i];
            std::copy(v.in_phase.begin(), v.in_phase.end(), ip.begin() + static_cast<std::ptrdiff_t>(shift));
            std::copy(v.quadrature.begin(), v.quadrature.end(), qu.begin() + static_cast<std::ptrdiff_t>(shift));
            out.bank_.store(i, apply_filter(filter, ip), apply_filter(filter, qu));
        }
    }
    out.filter_ = filter;
    return out;
}

} // namespace fmcwim
