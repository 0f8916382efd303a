#include "commands.hpp"

#include "manifest.hpp"

#include "fmcwim/analysis.hpp"
#include "fmcwim/config.hpp"
#include "fmcwim/dictionary_cache.hpp"
#include "fmcwim/errors.hpp"
#include "fmcwim/mitigation.hpp"
#include "fmcwim/signal_io.hpp"

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <new>
#include <ostream>

namespace fmcwim::cli {

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
    auto out = p;
    out.replace_filename(p.stem().string() + suffix);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void ensure_parent(const fs::path& path) {
    const auto parent = path.parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

RunManifest start_manifest(std::string command, const std::vector<std::string>& arguments) {
    RunManifest m;
    m.command = std::move(command);
    m.arguments = arguments;
    m.tool_version = tool_version();
    return m;
}

std::unique_ptr<Mitigator> make_mitigator(const MitigationFile& cfg, const std::optional<fs::path>& cache_dir,
                                          bool verbose, std::ostream& log) {
    if (!cache_dir) return std::make_unique<Mitigator>(cfg.waveform, cfg.receiver, cfg.config);
    const auto spec = cfg.config.coarse_grid_spec(cfg.receiver, cfg.waveform);
    auto cached = cached_grid(spec, cfg.receiver, cfg.waveform, cfg.config.highpass, *cache_dir);
    if (verbose) log << "dictionary cache " << (cached.hit ? "hit" : "miss") << " (" << cached.key << ")\n";
    return std::make_unique<Mitigator>(cfg.waveform, cfg.receiver, cfg.config, std::move(cached.grid));
}

void write_traces(const fs::path& path, const MitigationOutput& out, const DictionaryGrid& coarse_grid) {
    std::ofstream csv(path);
    if (!csv) throw IoError("cannot open '" + path.string() + "' for writing");
    csv << "stage,iteration,atom_index,slope_hz_per_s,time_shift_s,duration_s,score,residual_energy\n";
    csv.precision(17);
    for (std::size_t i = 0; i < out.coarse.trace.size(); ++i) {
        const auto& t = out.coarse.trace[i];
        const auto& a = coarse_grid.atom(t.atom_index);
        csv << "coarse," << i + 1 << ',' << t.atom_index << ',' << a.slope << ',' << a.time_shift << ','
            << a.duration << ',' << t.score << ',' << t.residual_energy << '\n';
    }
    if (out.fine) {
        // Detections follow the fine support order, which is the trace order.
        const auto& det = out.report.detected_interferers;
        for (std::size_t i = 0; i < out.fine->trace.size() && i < det.size(); ++i) {
            const auto& t = out.fine->trace[i];
            csv << "fine," << i + 1 << ',' << t.atom_index << ',' << det[i].slope << ',' << det[i].time_shift
                << ',' << det[i].duration << ',' << t.score << ',' << t.residual_energy << '\n';
        }
    }
    if (!csv) throw IoError("write to '" + path.string() + "' failed");
}

void emit_estimate(YAML::Emitter& e, const char* key, const SnirEstimate& s) {
    e << YAML::Key << key << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "signal_power_db" << YAML::Value << s.signal_power_db;
    e << YAML::Key << "floor_db" << YAML::Value << s.floor_db;
    e << YAML::Key << "snir_db" << YAML::Value << s.snir_db;
    e << YAML::Key << "floor_at_guard" << YAML::Value << s.floor_at_guard;
    e << YAML::EndMap;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidParameter*>(&e) ||
        dynamic_cast<const InvalidRange*>(&e) || dynamic_cast<const InvalidCutoff*>(&e) ||
        dynamic_cast<const SlopeTooSmall*>(&e) || dynamic_cast<const EmptyWindow*>(&e) ||
        dynamic_cast<const LengthMismatch*>(&e))
        return kUsageOrConfigError;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kIoFailure;
    return kNumericalFailure;
}

fs::path reference_path(const fs::path& signal) { return sibling(signal, ".ref" + signal.extension().string()); }

int cmd_simulate(const SimulateOptions& opts, std::ostream& log) {
    const auto t0 = Clock::now();
    auto file = load_scenario(opts.config);
    auto& scenario = file.scenario;
    if (opts.seed) scenario.rng_seed = *opts.seed;
    for (const auto& w : scenario.warnings()) log << "warning: " << w << '\n';

    auto manifest = start_manifest("simulate", opts.arguments);
    manifest.add_config(opts.config);
    manifest.seed = scenario.rng_seed;
    ensure_parent(opts.out);

    std::size_t chirps = file.frame ? file.frame->num_chirps : 1;
    if (opts.frames) chirps = *opts.frames;
    if (chirps < 1) throw InvalidParameter("--frames must be >= 1");
    const bool frame_mode = file.frame.has_value() || opts.frames.has_value();

    const auto t_synth = Clock::now();
    if (!frame_mode) {
        write_signal(opts.out, synthesize_scenario(scenario));
        write_signal(reference_path(opts.out), synthesize_scenario(scenario.without_interference()));
        manifest.add_output("signal", opts.out);
        manifest.add_output("reference", reference_path(opts.out));
    } else {
        std::vector<double> steps(scenario.targets.size(), 0.0);
        if (file.frame)
            std::copy(file.frame->doppler_phase_steps.begin(), file.frame->doppler_phase_steps.end(), steps.begin());
        const auto frame = synthesize_frame(scenario, chirps, steps);
        const auto ref = synthesize_frame(scenario.without_interference(), chirps, steps);
        for (std::size_t c = 0; c < chirps; ++c) {
            const auto p = frame_path(opts.out, c);
            write_signal(p, frame[c]);
            write_signal(reference_path(p), ref[c]);
            manifest.add_output("signal", p);
            manifest.add_output("reference", reference_path(p));
        }
    }
    manifest.timings.emplace_back("synthesis", seconds_since(t_synth));
    manifest.timings.emplace_back("total", seconds_since(t0));
    manifest.write(manifest_path_for(opts.out));
    if (opts.verbose)
        log << "simulated " << chirps << " chirp(s) of " << scenario.receiver.num_samples() << " samples -> "
            << opts.out.string() << '\n';
    return kSuccess;
}

int cmd_mitigate(const MitigateOptions& opts, std::ostream& log) {
    const auto t0 = Clock::now();
    const auto cfg = load_mitigation(opts.config);
    auto manifest = start_manifest("mitigate", opts.arguments);
    manifest.add_config(opts.config);
    ensure_parent(opts.out);

    const std::size_t chirps = opts.frames.value_or(1);
    if (chirps < 1) throw InvalidParameter("--frames must be >= 1");
    const bool frame_mode = opts.frames.has_value();
    std::vector<fs::path> inputs, outputs;
    for (std::size_t c = 0; c < chirps; ++c) {
        inputs.push_back(frame_mode ? frame_path(opts.input, c) : opts.input);
        outputs.push_back(frame_mode ? frame_path(opts.out, c) : opts.out);
    }
    std::vector<SampledSignal> signals;
    for (const auto& p : inputs) {
        signals.push_back(read_signal(p, cfg.receiver.sample_rate()));
        if (signals.back().size() != cfg.receiver.num_samples())
            throw LengthMismatch(p.string() + ": " + std::to_string(signals.back().size()) +
                                 " samples, config expects " + std::to_string(cfg.receiver.num_samples()));
        manifest.add_input("signal", p);
    }

    const auto t_dict = Clock::now();
    const auto mitigator = make_mitigator(cfg, opts.cache_dir, opts.verbose, log);
    manifest.timings.emplace_back("coarse_dictionary", seconds_since(t_dict));

    // Chirps are independent: one pipeline run per chirp, concurrently.
    std::vector<MitigationOutput> results(chirps);
    std::exception_ptr failure;
    const auto t_run = Clock::now();
#pragma omp parallel for schedule(dynamic) if (chirps > 1)
    for (std::size_t c = 0; c < chirps; ++c) {
        try {
            results[c] = mitigator->run(signals[c]);
        } catch (...) {
#pragma omp critical(fmcwim_frame_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    manifest.timings.emplace_back("mitigation", seconds_since(t_run));

    std::vector<MitigationReport> reports;
    double omp_total = 0.0;
    for (std::size_t c = 0; c < chirps; ++c) {
        write_signal(outputs[c], results[c].clean);
        manifest.add_output("clean", outputs[c]);
        reports.push_back(results[c].report);
        omp_total += results[c].report.omp_wall_time;
        if (opts.verbose) {
            const auto trace = frame_mode ? sibling(outputs[c], ".trace.csv") : sibling(opts.out, ".trace.csv");
            write_traces(trace, results[c], mitigator->coarse_grid());
            manifest.add_output("trace", trace);
        }
    }
    const auto report_yaml_path = sibling(opts.out, ".report.yaml");
    const auto report_csv_path = sibling(opts.out, ".report.csv");
    write_text(report_yaml_path, frame_mode ? report_yaml(reports) : report_yaml(reports.front()));
    std::string csv = report_csv_header();
    for (std::size_t c = 0; c < chirps; ++c) csv += report_csv_row(c, reports[c]);
    write_text(report_csv_path, csv);
    manifest.add_output("report", report_yaml_path);
    manifest.add_output("report_csv", report_csv_path);
    manifest.timings.emplace_back("omp", omp_total);
    manifest.timings.emplace_back("total", seconds_since(t0));
    manifest.write(manifest_path_for(opts.out));

    for (std::size_t c = 0; c < chirps; ++c) {
        const auto& r = reports[c];
        log << (frame_mode ? "chirp " + std::to_string(c) + ": " : std::string()) << "SNIR " << r.snir_before_db
            << " dB -> " << r.snir_after_db << " dB (improvement " << r.snir_improvement_db << " dB), "
            << r.clusters.size() << " chirplet cluster(s), " << r.coarse_iterations << '+' << r.fine_iterations
            << " iterations\n";
    }
    return kSuccess;
}

int cmd_analyze(const AnalyzeOptions& opts, std::ostream& log) {
    const auto t0 = Clock::now();
    std::optional<MitigationFile> cfg;
    if (opts.config) cfg = load_mitigation(*opts.config);
    std::optional<double> rate = opts.sample_rate;
    if (!rate && cfg) rate = cfg->receiver.sample_rate();
    const WindowKind window = cfg ? cfg->config.window : WindowKind::hann;
    const std::optional<double> slope = cfg ? std::optional(cfg->waveform.slope()) : std::nullopt;

    auto manifest = start_manifest("analyze", opts.arguments);
    if (opts.config) manifest.add_config(*opts.config);
    const auto before = read_signal(opts.before, rate);
    const auto after = read_signal(opts.after, rate);
    manifest.add_input("before", opts.before);
    manifest.add_input("after", opts.after);
    std::optional<SampledSignal> reference;
    if (opts.reference) {
        reference = read_signal(*opts.reference, rate);
        manifest.add_input("reference", *opts.reference);
    }
    if (before.size() != after.size() || (reference && reference->size() != after.size()))
        throw LengthMismatch("signals must have equal length");

    const auto s_before = range_spectrum(before, window, slope);
    const auto s_after = range_spectrum(after, window, slope);
    std::optional<RangeSpectrum> s_ref;
    if (reference) s_ref = range_spectrum(*reference, window, slope);

    std::vector<double> freqs = opts.target_freqs;
    if (freqs.empty() && cfg) freqs = cfg->config.target_freqs;
    const auto bins = freqs.empty() ? strongest_peak_bins(s_after) : target_bins_for(s_after, freqs);
    const auto cmp = compare_runs(s_before, s_after, s_ref ? &*s_ref : nullptr, bins);

    std::error_code ec;
    fs::create_directories(opts.out, ec);
    if (ec) throw IoError("cannot create directory '" + opts.out.string() + "': " + ec.message());
    const bool use_range = slope.has_value();
    auto write_spectrum = [&](const RangeSpectrum& s, const std::string& name) {
        const auto p = opts.out / name;
        std::ofstream out(p);
        if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
        write_spectrum_csv(out, s, use_range);
        if (!out) throw IoError("write to '" + p.string() + "' failed");
        out.close();
        manifest.add_output("spectrum", p);
    };
    write_spectrum(s_before, "before_spectrum.csv");
    write_spectrum(s_after, "after_spectrum.csv");
    if (s_ref) write_spectrum(*s_ref, "reference_spectrum.csv");

    {
        const auto p = opts.out / "delta.csv";
        std::ofstream out(p);
        if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
        out << "freq_hz,delta_db\n";
        out.precision(10);
        for (std::size_t k = 0; k < cmp.per_bin_delta_db.size(); ++k)
            out << s_after.bin_freqs[k] << ',' << cmp.per_bin_delta_db[k] << '\n';
        out.close();
        manifest.add_output("delta", p);
    }

    YAML::Emitter e;
    e.SetDoublePrecision(12);
    e << YAML::BeginMap;
    e << YAML::Key << "target_bins" << YAML::Value << YAML::Flow << cmp.before.target_bins;
    emit_estimate(e, "before", cmp.before);
    emit_estimate(e, "after", cmp.after);
    e << YAML::Key << "snir_improvement_db" << YAML::Value << cmp.snir_improvement_db;
    double max_abs_delta = 0.0;
    for (double d : cmp.per_bin_delta_db) max_abs_delta = std::max(max_abs_delta, std::abs(d));
    e << YAML::Key << "max_abs_bin_delta_db" << YAML::Value << max_abs_delta;
    if (cmp.reference) {
        emit_estimate(e, "reference", *cmp.reference);
        e << YAML::Key << "gap_to_reference_db" << YAML::Value << *cmp.gap_to_reference_db;
        e << YAML::Key << "floor_gap_to_reference_db" << YAML::Value << *cmp.floor_gap_to_reference_db;
    }
    e << YAML::EndMap;
    const auto report = opts.out / "comparison.yaml";
    write_text(report, std::string(e.c_str()) + "\n");
    manifest.add_output("comparison", report);
    manifest.timings.emplace_back("total", seconds_since(t0));
    manifest.write(opts.out / "manifest.yaml");

    log << "SNIR " << cmp.before.snir_db << " dB -> " << cmp.after.snir_db << " dB (improvement "
        << cmp.snir_improvement_db << " dB)";
    if (cmp.gap_to_reference_db) log << ", target gap to reference " << *cmp.gap_to_reference_db << " dB";
    log << '\n';
    return kSuccess;
}

int cmd_bench(const BenchOptions& opts, std::ostream& log) {
    if (opts.repetitions < 1) throw InvalidParameter("--repetitions must be >= 1");
    const auto t0 = Clock::now();
    const auto cfg = load_mitigation(opts.config);
    auto manifest = start_manifest("bench", opts.arguments);
    manifest.add_config(opts.config);
    const auto y = read_signal(opts.input, cfg.receiver.sample_rate());
    manifest.add_input("signal", opts.input);

    // Dictionary construction is setup, not part of the timed pursuit.
    const auto t_dict = Clock::now();
    const auto mitigator = make_mitigator(cfg, opts.cache_dir, opts.verbose, log);
    manifest.timings.emplace_back("coarse_dictionary", seconds_since(t_dict));

    std::vector<double> omp_times, run_times;
    for (std::size_t r = 0; r < opts.repetitions; ++r) {
        const auto out = mitigator->run(y);
        omp_times.push_back(out.report.omp_wall_time);
        run_times.push_back(out.report.wall_time);
        if (opts.verbose)
            log << "repetition " << r << ": omp " << out.report.omp_wall_time << " s, pipeline "
                << out.report.wall_time << " s\n";
    }
    const auto [mn, mx] = std::minmax_element(omp_times.begin(), omp_times.end());
    const double med = median_of(omp_times);
    log << "omp-only wall time over " << opts.repetitions << " run(s): median " << med << " s, min " << *mn
        << " s, max " << *mx << " s (reference point: 0.07 s)\n";

    if (opts.out) {
        ensure_parent(*opts.out);
        std::string csv = "repetition,omp_seconds,pipeline_seconds\n";
        for (std::size_t r = 0; r < omp_times.size(); ++r)
            csv += std::to_string(r) + ',' + std::to_string(omp_times[r]) + ',' + std::to_string(run_times[r]) + '\n';
        write_text(*opts.out, csv);
        manifest.add_output("timings", *opts.out);
    }
    manifest.timings.emplace_back("omp_median", med);
    manifest.timings.emplace_back("omp_min", *mn);
    manifest.timings.emplace_back("omp_max", *mx);
    manifest.timings.emplace_back("total", seconds_since(t0));
    manifest.write(opts.out ? manifest_path_for(*opts.out) : sibling(opts.input, ".bench.manifest.yaml"));
    return kSuccess;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Blind FMCW interference mitigation with a reduced chirplet basis"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);

    std::vector<std::string> arguments(argv + 1, argv + argc);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Synthesize a scenario and its interference-free companion");
    simulate->add_option("--config", sim.config, "Scenario YAML")->required();
    simulate->add_option("--out", sim.out, "Output signal (.csv or .f32)")->required();
    simulate->add_option("--seed", sim.seed, "Override the scenario noise seed");
    simulate->add_option("--frames", sim.frames, "Number of chirps (frame mode)");
    simulate->add_flag("--verbose", sim.verbose);

    MitigateOptions mit;
    auto* mitigate = app.add_subcommand("mitigate", "Remove interference from a stored signal");
    mitigate->add_option("signal", mit.input, "Input signal (.csv or .f32)")->required();
    mitigate->add_option("--config", mit.config, "Mitigation YAML")->required();
    mitigate->add_option("--out", mit.out, "Clean output signal")->required();
    mitigate->add_option("--frames", mit.frames, "Process <signal>_cNNN files as one frame");
    mitigate->add_option("--cache-dir", mit.cache_dir, "Directory for cached coarse dictionaries");
    mitigate->add_flag("--verbose", mit.verbose, "Also write per-iteration pursuit traces");

    AnalyzeOptions ana;
    auto* analyze = app.add_subcommand("analyze", "Range spectra and SNIR comparison of two signals");
    analyze->add_option("before", ana.before)->required();
    analyze->add_option("after", ana.after)->required();
    analyze->add_option("--reference", ana.reference, "Interference-free reference signal");
    analyze->add_option("--config", ana.config, "Mitigation YAML (sample rate, slope, targets, window)");
    analyze->add_option("--targets", ana.target_freqs, "Target beat frequencies in Hz");
    analyze->add_option("--sample-rate", ana.sample_rate, "Sample rate for .f32 inputs");
    analyze->add_option("--out", ana.out, "Output directory")->required();
    analyze->add_flag("--verbose", ana.verbose);

    BenchOptions ben;
    auto* bench = app.add_subcommand("bench", "Time the pursuit stages with a prebuilt dictionary");
    bench->add_option("signal", ben.input)->required();
    bench->add_option("--config", ben.config, "Mitigation YAML")->required();
    bench->add_option("--repetitions", ben.repetitions, "Timed runs")->capture_default_str();
    bench->add_option("--cache-dir", ben.cache_dir, "Directory for cached coarse dictionaries");
    bench->add_option("--out", ben.out, "Timing CSV");
    bench->add_flag("--verbose", ben.verbose);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForVersion&) {
        out << tool_version() << '\n';
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (app.get_subcommands().empty()) err << app.help();
        return kUsageOrConfigError;
    }

    try {
        if (simulate->parsed()) {
            sim.arguments = arguments;
            return cmd_simulate(sim, err);
        }
        if (mitigate->parsed()) {
            mit.arguments = arguments;
            return cmd_mitigate(mit, out);
        }
        if (analyze->parsed()) {
            ana.arguments = arguments;
            return cmd_analyze(ana, out);
        }
        ben.arguments = arguments;
        return cmd_bench(ben, out);
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace fmcwim::cli
