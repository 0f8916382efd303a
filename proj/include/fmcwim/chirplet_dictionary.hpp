#pragma once

// Reduced chirplet dictionary. Each atom starts at the receiver cutoff
// frequency and its duration is tied to its slope (2 f_r / |slope|, clamped to
// the chirp), so only time shift and slope are free. Atoms are stored as
// sine/cosine pairs so a fitted pair carries amplitude and phase.

#include "fmcwim/highpass.hpp"
#include "fmcwim/signal_model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace fmcwim {

struct OmpResult;

struct ChirpletAtom {
    double time_shift = 0.0; // s, window start
    double slope = 0.0;      // Hz/s, baseband chirp rate
    double duration = 0.0;   // s
    double start_freq = 0.0; // Hz, always the receiver cutoff
};

// Sample window [offset, offset + length) with the two quadrature components.
struct AtomWaveforms {
    std::size_t offset = 0;
    std::vector<double> in_phase;   // sine atom
    std::vector<double> quadrature; // cosine atom
    double norm = 0.0;              // Euclidean norm of in_phase
    double quadrature_norm = 0.0;   // Euclidean norm of quadrature

    std::size_t length() const noexcept { return in_phase.size(); }
    // Full-length copy (zeros outside the window).
    SampledSignal dense_in_phase(const ReceiverConfig& receiver) const;
    SampledSignal dense_quadrature(const ReceiverConfig& receiver) const;
};

// Non-owning view of one packed atom.
struct AtomView {
    std::size_t offset = 0;
    std::span<const double> in_phase;
    std::span<const double> quadrature;
    double norm = 0.0;
    double quadrature_norm = 0.0;
    double cross = 0.0; // <in_phase, quadrature>

    std::size_t length() const noexcept { return in_phase.size(); }
    // A single sample cannot hold two independent columns, so such atoms
    // never enter a pursuit.
    bool active() const noexcept { return length() > 1 && norm > 0.0 && quadrature_norm > 0.0; }
    AtomWaveforms to_waveforms() const;
};

// Contiguous storage of all atom windows; the correlation kernels walk it.
class AtomBank {
public:
    AtomBank() = default;
    // Reserves one window per atom; lengths[i] == 0 marks an inactive atom.
    AtomBank(std::span<const std::size_t> offsets, std::span<const std::size_t> lengths);

    std::size_t size() const noexcept { return offsets_.size(); }
    std::size_t total_samples() const noexcept { return in_phase_.size(); }

    AtomView view(std::size_t i) const noexcept;

    // Fill slot i. Safe to call concurrently for distinct i.
    void store(std::size_t i, std::span<const double> in_phase, std::span<const double> quadrature);

    // Packed access used by the cache and the kernels.
    std::span<const std::size_t> offsets() const noexcept { return offsets_; }
    std::span<const std::size_t> lengths() const noexcept { return lengths_; }
    std::span<const std::size_t> starts() const noexcept { return starts_; }
    std::span<const double> norms() const noexcept { return norms_; }
    std::span<const double> quadrature_norms() const noexcept { return quadrature_norms_; }
    std::span<const double> crosses() const noexcept { return crosses_; }
    std::span<const double> in_phase_data() const noexcept { return in_phase_; }
    std::span<const double> quadrature_data() const noexcept { return quadrature_; }

    static AtomBank from_packed(std::vector<std::size_t> offsets, std::vector<std::size_t> lengths,
                                std::vector<double> in_phase, std::vector<double> quadrature,
                                std::vector<double> norms, std::vector<double> quadrature_norms);

private:
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> lengths_;
    std::vector<std::size_t> starts_;
    std::vector<double> in_phase_;
    std::vector<double> quadrature_;
    std::vector<double> norms_;
    std::vector<double> quadrature_norms_;
    std::vector<double> crosses_;
};

// Parameters of a rectangular (slope x time-shift) hypothesis grid.
struct GridSpec {
    std::pair<double, double> slope_range;
    std::pair<double, double> time_range;
    std::size_t slope_hypotheses = 1;
    std::size_t time_hypotheses = 1;
    std::optional<double> k_min; // defaults to default_k_min()
};

class DictionaryGrid {
public:
    DictionaryGrid() = default;

    std::size_t size() const noexcept { return atoms_.size(); }
    const std::vector<ChirpletAtom>& atoms() const noexcept { return atoms_; }
    const ChirpletAtom& atom(std::size_t i) const { return atoms_.at(i); }
    const AtomBank& bank() const noexcept { return bank_; }
    AtomView waveform(std::size_t i) const noexcept { return bank_.view(i); }

    const ReceiverConfig& receiver() const noexcept { return receiver_; }
    const WaveformParams& waveform_params() const noexcept { return waveform_; }
    double k_min() const noexcept { return k_min_; }

    std::size_t slope_hypotheses() const noexcept { return slope_hypotheses_; }
    std::size_t time_hypotheses() const noexcept { return time_hypotheses_; }
    std::pair<double, double> slope_range() const noexcept { return slope_range_; }
    std::pair<double, double> time_range() const noexcept { return time_range_; }

    // Rectangular grids come from build_grid; refined grids are unions of regions.
    bool rectangular() const noexcept { return rectangular_; }
    std::size_t regions() const noexcept { return regions_; }

    // Hypothesis axes of a rectangular grid.
    const std::vector<double>& slope_values() const noexcept { return slope_values_; }
    const std::vector<double>& time_values() const noexcept { return time_values_; }
    // Cell size around each slope / time hypothesis (used by refinement).
    double slope_cell(std::size_t kappa_index) const { return slope_cells_.at(kappa_index); }
    double time_cell() const noexcept { return time_cell_; }

    // Column ordering: time-shift index varies fastest within each slope.
    std::size_t index_of(std::size_t kappa_index, std::size_t tau_index) const;
    std::pair<std::size_t, std::size_t> indices_of(std::size_t atom_index) const;

    const std::optional<FilterCoeffs>& filter() const noexcept { return filter_; }

    std::size_t active_atoms() const noexcept;

private:
    friend DictionaryGrid build_grid(const GridSpec&, const ReceiverConfig&, const WaveformParams&);
    friend DictionaryGrid refine_grid(const OmpResult&, const DictionaryGrid&, std::size_t, std::size_t);
    friend DictionaryGrid filter_dictionary(const DictionaryGrid&, const FilterCoeffs&);
    friend class DictionaryCacheAccess;

    void synthesize_bank();

    std::vector<ChirpletAtom> atoms_;
    AtomBank bank_;
    ReceiverConfig receiver_;
    WaveformParams waveform_;
    double k_min_ = 0.0;
    std::size_t slope_hypotheses_ = 0;
    std::size_t time_hypotheses_ = 0;
    std::pair<double, double> slope_range_{0.0, 0.0};
    std::pair<double, double> time_range_{0.0, 0.0};
    bool rectangular_ = false;
    std::size_t regions_ = 0;
    std::vector<double> slope_values_;
    std::vector<double> time_values_;
    std::vector<double> slope_cells_;
    double time_cell_ = 0.0;
    std::optional<FilterCoeffs> filter_;
};

// Smallest admissible |slope|: sweeps two DFT bins over the chirp.
double default_k_min(const ReceiverConfig& receiver, const WaveformParams& waveform);

// Largest useful |slope|: the atom still spans two samples.
double default_k_max(const ReceiverConfig& receiver);

// min(2 f_r / |slope|, T). Throws SlopeTooSmall when |slope| < k_min.
double atom_duration(double slope, const ReceiverConfig& receiver, const WaveformParams& waveform,
                     double k_min);
double atom_duration(double slope, const ReceiverConfig& receiver, const WaveformParams& waveform);

ChirpletAtom make_atom(double time_shift, double slope, const ReceiverConfig& receiver,
                       const WaveformParams& waveform, double k_min);

// Sample indices n with t_n inside [start, end], clipped to the receiver window.
// Returns {first, count}; count == 0 when nothing is covered.
std::pair<std::size_t, std::size_t> window_samples(double start, double end,
                                                   const ReceiverConfig& receiver);

// Throws EmptyWindow when the atom covers no sample.
AtomWaveforms synthesize_atom(const ChirpletAtom& atom, const ReceiverConfig& receiver);

// Throws InvalidRange for empty ranges or a slope range inside (-k_min, k_min).
DictionaryGrid build_grid(const GridSpec& spec, const ReceiverConfig& receiver,
                          const WaveformParams& waveform);

// Dense local grids (+- one coarse cell) around every coarse support atom,
// merged on a shared lattice. Throws EmptySupport for an empty support.
DictionaryGrid refine_grid(const OmpResult& coarse_result, const DictionaryGrid& coarse_grid,
                           std::size_t fine_slope_hypotheses, std::size_t fine_time_hypotheses);

// Same grid with every atom passed through the filter; norms recomputed.
DictionaryGrid filter_dictionary(const DictionaryGrid& grid, const FilterCoeffs& filter);

} // namespace fmcwim
