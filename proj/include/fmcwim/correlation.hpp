#pragma once

// Dictionary correlation scan: the hot loop of every pursuit iteration.
// Both kernels compute each atom's score with identical arithmetic, so the
// parallel scan returns exactly what the serial reference returns.

#include "fmcwim/chirplet_dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace fmcwim {

enum class CorrelationMode {
    normalized,   // sqrt((<sin,r>/||sin||)^2 + (<cos,r>/||cos||)^2)
    unnormalized, // sqrt(<sin,r>^2 + <cos,r>^2)
    projection,   // norm of the projection of r onto span{sin, cos}
};

struct Selection {
    std::size_t index = 0;
    double score = 0.0;
};

inline double atom_score(const AtomView& atom, std::span<const double> residual,
                         CorrelationMode mode) noexcept {
    if (!atom.active()) return 0.0;
    const double* r = residual.data() + atom.offset;
    const double* s = atom.in_phase.data();
    const double* c = atom.quadrature.data();
    const std::size_t len = atom.length();
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        a += s[j] * r[j];
        b += c[j] * r[j];
    }
    if (mode == CorrelationMode::projection) {
        // Near DC the pair is far from orthogonal; solve the 2x2 Gram system.
        const double ss = atom.norm * atom.norm;
        const double cc = atom.quadrature_norm * atom.quadrature_norm;
        const double sc = atom.cross;
        const double det = ss * cc - sc * sc;
        if (!(det > 1e-12 * ss * cc)) return std::max(std::abs(a) / atom.norm, std::abs(b) / atom.quadrature_norm);
        return std::sqrt(std::max(0.0, (cc * a * a - 2.0 * sc * a * b + ss * b * b) / det));
    }
    if (mode == CorrelationMode::normalized) {
        a /= atom.norm;
        b /= atom.quadrature_norm;
    }
    return std::sqrt(a * a + b * b);
}

// Highest score wins; ties go to the lowest index. An all-zero residual
// yields {0, 0}.
Selection select_atom_serial(const AtomBank& bank, std::span<const double> residual,
                             CorrelationMode mode);
Selection select_atom_parallel(const AtomBank& bank, std::span<const double> residual,
                               CorrelationMode mode);

// Scores of every atom, serial. Used by diagnostics and tests.
std::vector<double> score_all(const AtomBank& bank, std::span<const double> residual,
                              CorrelationMode mode);

// Number of OpenMP threads the parallel kernel will use (1 without OpenMP).
int correlation_threads() noexcept;

} // namespace fmcwim
