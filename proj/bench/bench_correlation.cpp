// Timing of the correlation scan (serial vs parallel) and of omp_run on the
// N = 229 configuration and the fig3-sized dictionary.

#include "fmcwim/config.hpp"
#include "fmcwim/correlation.hpp"
#include "fmcwim/mitigation.hpp"
#include "fmcwim/omp_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

using namespace fmcwim;

namespace {

using Clock = std::chrono::steady_clock;

std::string preset(const std::string& name) { return std::string(FMCWIM_PRESET_DIR) + "/" + name; }

template <typename F>
double median_seconds(int reps, F&& f) {
    std::vector<double> t;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        t.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

void scan(const char* label, const std::string& scenario, const std::string& mitigation, int reps) {
    const auto sc = load_scenario(preset(scenario)).scenario;
    const auto mf = load_mitigation(preset(mitigation));
    const auto y = synthesize_scenario(sc);

    const auto t_build = Clock::now();
    const Mitigator m(mf.waveform, mf.receiver, mf.config);
    const double build = std::chrono::duration<double>(Clock::now() - t_build).count();
    const auto& g = m.coarse_grid();
    const auto mode = mf.config.coarse.omp.correlation;

    volatile std::size_t sink = 0;
    const double serial = median_seconds(reps, [&] { sink = select_atom_serial(g.bank(), y.view(), mode).index; });
    const double parallel = median_seconds(reps, [&] { sink = select_atom_parallel(g.bank(), y.view(), mode).index; });
    const double coarse = median_seconds(reps, [&] { sink = omp_run(g, y, mf.config.coarse.omp).iterations_run; });
    std::vector<double> omp;
    for (int r = 0; r < reps; ++r) omp.push_back(m.run(y).report.omp_wall_time);
    std::sort(omp.begin(), omp.end());
    (void)sink;

    std::printf("%s: N = %zu, %zu coarse atoms, %d thread(s)\n", label, mf.receiver.num_samples(), g.size(),
                correlation_threads());
    std::printf("  dictionary build   %9.4f s\n", build);
    std::printf("  scan, serial       %9.6f s\n", serial);
    std::printf("  scan, parallel     %9.6f s  (x%.2f)\n", parallel, serial / parallel);
    std::printf("  coarse omp_run     %9.4f s\n", coarse);
    std::printf("  coarse+fine OMP    %9.4f s median, %.4f min\n", omp[omp.size() / 2], omp.front());
}

} // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 11;
    scan("bench229", "bench229.scenario", "bench229.mitigation", reps);
    scan("fig3", "fig3.scenario", "fig3.mitigation", std::max(1, reps / 4));
    return 0;
}
