#include "fmcwim/omp_engine.hpp"

#include "fmcwim/errors.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

namespace fmcwim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void add_scaled(std::vector<double>& dst, std::size_t offset, std::span<const double> src, double scale) {
    for (std::size_t j = 0; j < src.size(); ++j) dst[offset + j] += scale * src[j];
}

} // namespace

void OmpConfig::validate() const {
    if (max_iterations < 1) throw InvalidParameter("max_iterations must be >= 1");
    if (!(energy_variation_threshold > 0.0 && energy_variation_threshold < 1.0))
        throw InvalidParameter("energy_variation_threshold must lie in (0, 1)");
    if (absolute_residual_threshold &&
        !(*absolute_residual_threshold > 0.0 && *absolute_residual_threshold < 1.0))
        throw InvalidParameter("absolute_residual_threshold must lie in (0, 1)");
}

std::string to_string(StopReason reason) {
    switch (reason) {
    case StopReason::none: return "none";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::residual_threshold: return "residual_threshold";
    case StopReason::energy_variation: return "energy_variation";
    case StopReason::rank_deficient: return "rank_deficient";
    case StopReason::zero_input: return "zero_input";
    }
    return "unknown";
}

double AtomCoefficient::magnitude() const noexcept { return std::hypot(in_phase, quadrature); }
double AtomCoefficient::phase() const noexcept { return std::atan2(quadrature, in_phase); }

IncrementalQR::IncrementalQR(std::size_t rows, double rank_tolerance)
    : rows_(rows), rank_tolerance_(rank_tolerance) {}

bool IncrementalQR::append(std::size_t offset, std::span<const double> values) {
    if (offset + values.size() > rows_) throw LengthMismatch("column exceeds QR row count");
    std::vector<double> v(rows_, 0.0);
    std::copy(values.begin(), values.end(), v.begin() + static_cast<std::ptrdiff_t>(offset));
    const double original = std::sqrt(dot(v, v));
    if (!(original > 0.0)) return false;

    // Classical Gram-Schmidt, repeated once when the first pass cancelled
    // most of the column (Q then stays orthogonal to working precision).
    std::vector<double> rcol(q_.size() + 1, 0.0);
    double before = original;
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < q_.size(); ++j) {
            const double h = dot(q_[j], v);
            rcol[j] += h;
            for (std::size_t n = 0; n < rows_; ++n) v[n] -= h * q_[j][n];
        }
        const double after = std::sqrt(dot(v, v));
        if (after > 0.7071 * before) break;
        before = after;
    }
    const double remaining = std::sqrt(dot(v, v));
    if (!(remaining > rank_tolerance_ * original)) return false;
    for (double& x : v) x /= remaining;
    rcol.back() = remaining;
    q_.push_back(std::move(v));
    r_.push_back(std::move(rcol));
    return true;
}

void IncrementalQR::pop_back() {
    if (q_.empty()) return;
    q_.pop_back();
    r_.pop_back();
}

std::vector<double> IncrementalQR::solve(std::span<const double> y) const {
    if (y.size() != rows_) throw LengthMismatch("right-hand side length differs from QR rows");
    const std::size_t k = q_.size();
    std::vector<double> w(k);
    for (std::size_t j = 0; j < k; ++j) w[j] = dot(q_[j], y);
    for (std::size_t jj = k; jj-- > 0;) {
        double acc = w[jj];
        for (std::size_t c = jj + 1; c < k; ++c) acc -= r_[c][jj] * w[c];
        w[jj] = acc / r_[jj][jj];
    }
    return w;
}

Selection correlate_select(const DictionaryGrid& grid, std::span<const double> residual,
                           CorrelationMode mode, bool parallel) {
    if (residual.size() != grid.receiver().num_samples())
        throw LengthMismatch("residual length differs from dictionary row count");
    return parallel ? select_atom_parallel(grid.bank(), residual, mode)
                    : select_atom_serial(grid.bank(), residual, mode);
}

std::vector<AtomCoefficient> least_squares_fit(std::span<const AtomWaveforms> selected_atoms,
                                               const SampledSignal& y) {
    IncrementalQR qr(y.size());
    for (const auto& atom : selected_atoms) {
        if (atom.offset + atom.length() > y.size())
            throw LengthMismatch("atom window exceeds signal length");
        if (!qr.append(atom.offset, atom.in_phase) || !qr.append(atom.offset, atom.quadrature))
            throw RankDeficient("selected atom columns are linearly dependent");
    }
    const auto w = qr.solve(y.view());
    std::vector<AtomCoefficient> out(selected_atoms.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {w[2 * i], w[2 * i + 1]};
    return out;
}

OmpResult omp_run(const DictionaryGrid& grid, const SampledSignal& y, const OmpConfig& config) {
    config.validate();
    const std::size_t n = grid.receiver().num_samples();
    if (y.size() != n) throw LengthMismatch("signal length differs from dictionary row count");
    if (!y.all_finite()) throw NumericalError("signal contains non-finite samples");

    OmpResult result;
    result.residual = y;
    result.reconstruction = SampledSignal(n, y.sample_rate);
    const double input_energy = y.energy();
    result.residual_energy_history.push_back(input_energy);
    if (!(input_energy > 0.0)) {
        result.stop_reason = StopReason::zero_input;
        return result;
    }

    IncrementalQR qr(n);
    double previous = input_energy;

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        const auto sel = correlate_select(grid, result.residual.view(), config.correlation, config.parallel);
        const auto atom = grid.waveform(sel.index);
        if (!(sel.score > 0.0) || !atom.active()) {
            result.stop_reason = StopReason::energy_variation;
            break;
        }
        if (!qr.append(atom.offset, atom.in_phase)) {
            result.stop_reason = StopReason::rank_deficient;
            break;
        }
        if (!qr.append(atom.offset, atom.quadrature)) {
            qr.pop_back();
            result.stop_reason = StopReason::rank_deficient;
            break;
        }
        // The new orthonormal directions are all that changes in the projection.
        std::vector<double> resid = result.residual.samples;
        for (std::size_t j = qr.columns() - 2; j < qr.columns(); ++j) {
            const auto qj = qr.q(j);
            const double z = dot(qj, resid);
            for (std::size_t i = 0; i < n; ++i) resid[i] -= z * qj[i];
        }
        const double energy = std::inner_product(resid.begin(), resid.end(), resid.begin(), 0.0);

        if ((previous - energy) / previous < config.energy_variation_threshold) {
            qr.pop_back();
            qr.pop_back();
            result.stop_reason = StopReason::energy_variation;
            break;
        }

        result.support.push_back(sel.index);
        result.residual.samples = std::move(resid);
        result.residual_energy_history.push_back(energy);
        result.trace.push_back({sel.index, sel.score, energy});
        ++result.iterations_run;
        previous = energy;

        if (config.absolute_residual_threshold &&
            energy < *config.absolute_residual_threshold * input_energy) {
            result.stop_reason = StopReason::residual_threshold;
            break;
        }
    }
    if (result.stop_reason == StopReason::none) result.stop_reason = StopReason::max_iterations;

    if (result.support.empty()) return result;
    const auto w = qr.solve(y.view());
    result.coefficients.resize(result.support.size());
    auto& recon = result.reconstruction.samples;
    for (std::size_t s = 0; s < result.support.size(); ++s) {
        result.coefficients[s] = {w[2 * s], w[2 * s + 1]};
        const auto view = grid.waveform(result.support[s]);
        add_scaled(recon, view.offset, view.in_phase, w[2 * s]);
        add_scaled(recon, view.offset, view.quadrature, w[2 * s + 1]);
    }
    for (std::size_t i = 0; i < n; ++i) result.residual.samples[i] = y.samples[i] - recon[i];
    return result;
}

void write_trace_csv(std::ostream& out, const OmpResult& result, const DictionaryGrid& grid) {
    out << "iteration,atom_index,slope_hz_per_s,time_shift_s,duration_s,score,residual_energy\n";
    out.precision(17);
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        const auto& t = result.trace[i];
        const auto& a = grid.atom(t.atom_index);
        out << (i + 1) << ',' << t.atom_index << ',' << a.slope << ',' << a.time_shift << ','
            << a.duration << ',' << t.score << ',' << t.residual_energy << '\n';
    }
}

} // namespace fmcwim
