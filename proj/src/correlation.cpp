#include "fmcwim/correlation.hpp"

#include "fmcwim/errors.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fmcwim {

namespace {

inline bool better(double score, std::size_t index, const Selection& best) noexcept {
    return score > best.score || (score == best.score && index < best.index);
}

void check_length(const AtomBank& bank, std::span<const double> residual) {
    const auto offsets = bank.offsets();
    const auto lengths = bank.lengths();
    for (std::size_t i = 0; i < bank.size(); ++i)
        if (lengths[i] != 0 && offsets[i] + lengths[i] > residual.size())
            throw LengthMismatch("residual shorter than the dictionary rows");
}

} // namespace

Selection select_atom_serial(const AtomBank& bank, std::span<const double> residual,
                             CorrelationMode mode) {
    check_length(bank, residual);
    Selection best{0, -1.0};
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double score = atom_score(bank.view(i), residual, mode);
        if (better(score, i, best)) best = {i, score};
    }
    if (best.score < 0.0) best = {0, 0.0};
    return best;
}

Selection select_atom_parallel(const AtomBank& bank, std::span<const double> residual,
                               CorrelationMode mode) {
    check_length(bank, residual);
    Selection best{0, -1.0};
    const auto total = static_cast<std::ptrdiff_t>(bank.size());
#pragma omp parallel
    {
        Selection local{0, -1.0};
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t ii = 0; ii < total; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double score = atom_score(bank.view(i), residual, mode);
            if (better(score, i, local)) local = {i, score};
        }
#pragma omp critical(fmcwim_select_atom)
        {
            if (local.score >= 0.0 && better(local.score, local.index, best)) best = local;
        }
    }
    if (best.score < 0.0) best = {0, 0.0};
    return best;
}

std::vector<double> score_all(const AtomBank& bank, std::span<const double> residual,
                              CorrelationMode mode) {
    check_length(bank, residual);
    std::vector<double> out(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) out[i] = atom_score(bank.view(i), residual, mode);
    return out;
}

int correlation_threads() noexcept {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace fmcwim
