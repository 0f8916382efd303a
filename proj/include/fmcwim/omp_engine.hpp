#pragma once

// Orthogonal matching pursuit over a chirplet dictionary. Each selected
// hypothesis contributes a sine/cosine column pair; the least-squares refit
// runs on an incrementally updated QR factorization of those columns.

#include "fmcwim/chirplet_dictionary.hpp"
#include "fmcwim/correlation.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmcwim {

struct OmpConfig {
    std::size_t max_iterations = 100;
    double energy_variation_threshold = 0.01;
    std::optional<double> absolute_residual_threshold = 1e-6;
    CorrelationMode correlation = CorrelationMode::normalized;
    bool parallel = true;

    void validate() const;
};

enum class StopReason {
    none,
    max_iterations,     // (a)
    residual_threshold, // (b) residual energy below the absolute fraction
    energy_variation,   // (c) relative decrease too small; last candidate dropped
    rank_deficient,     // candidate columns dependent on the support; dropped
    zero_input,         // nothing to fit
};

std::string to_string(StopReason reason);

// Complex amplitude realized as a sine/cosine pair:
// in_phase * sin(phi) + quadrature * cos(phi) == magnitude * sin(phi + phase).
struct AtomCoefficient {
    double in_phase = 0.0;
    double quadrature = 0.0;

    double magnitude() const noexcept;
    double phase() const noexcept;
};

struct OmpIteration {
    std::size_t atom_index = 0;
    double score = 0.0;
    double residual_energy = 0.0;
};

struct OmpResult {
    std::vector<std::size_t> support;
    std::vector<AtomCoefficient> coefficients;
    SampledSignal residual;
    SampledSignal reconstruction;
    std::size_t iterations_run = 0;
    // Entry 0 is the input energy, then one entry per accepted iteration.
    std::vector<double> residual_energy_history;
    StopReason stop_reason = StopReason::none;
    std::vector<OmpIteration> trace;
};

// Appends column pairs to a thin QR factorization, one hypothesis at a time.
class IncrementalQR {
public:
    explicit IncrementalQR(std::size_t rows, double rank_tolerance = 1e-9);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t columns() const noexcept { return q_.size(); }

    // Orthogonalizes the column (nonzero on [offset, offset + values.size())).
    // Returns false and leaves the factorization untouched if it is dependent.
    bool append(std::size_t offset, std::span<const double> values);
    void pop_back();

    // Orthonormal column j of Q.
    std::span<const double> q(std::size_t j) const { return q_.at(j); }

    // Least-squares coefficients of y on every appended column.
    std::vector<double> solve(std::span<const double> y) const;

private:
    std::size_t rows_;
    double rank_tolerance_;
    std::vector<std::vector<double>> q_;
    std::vector<std::vector<double>> r_; // r_[j] is column j of R (length j+1)
};

// Index of the atom best correlated with the residual (lowest index on ties).
Selection correlate_select(const DictionaryGrid& grid, std::span<const double> residual,
                           CorrelationMode mode = CorrelationMode::normalized, bool parallel = true);

// Least-squares fit of y on the selected atom pairs. Throws RankDeficient.
std::vector<AtomCoefficient> least_squares_fit(std::span<const AtomWaveforms> selected_atoms,
                                               const SampledSignal& y);

OmpResult omp_run(const DictionaryGrid& grid, const SampledSignal& y, const OmpConfig& config);

// Per-iteration diagnostic trace.
void write_trace_csv(std::ostream& out, const OmpResult& result, const DictionaryGrid& grid);

} // namespace fmcwim
