#include "fmcwim/config.hpp"

#include "fmcwim/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fmcwim {

namespace {

int line_of(const YAML::Node& node) {
    const auto mark = node.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
}

std::string join(const std::string& path, const std::string& key) {
    if (key.empty()) return path;
    return path.empty() ? key : path + "." + key;
}

double as_double(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) throw ConfigError(field, line_of(node), "expected a number");
    double v = 0.0;
    try {
        v = node.as<double>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, line_of(node), "expected a number, got '" + node.Scalar() + "'");
    }
    if (!std::isfinite(v)) throw ConfigError(field, line_of(node), "must be finite");
    return v;
}

long long as_integer(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) throw ConfigError(field, line_of(node), "expected an integer");
    try {
        return node.as<long long>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, line_of(node), "expected an integer, got '" + node.Scalar() + "'");
    }
}

std::size_t as_count(const YAML::Node& node, const std::string& field) {
    const auto v = as_integer(node, field);
    if (v < 0) throw ConfigError(field, line_of(node), "must be >= 0");
    return static_cast<std::size_t>(v);
}

bool as_bool(const YAML::Node& node, const std::string& field) {
    try {
        return node.as<bool>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, line_of(node), "expected true or false");
    }
}

std::string as_word(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) throw ConfigError(field, line_of(node), "expected a word");
    return node.Scalar();
}

std::vector<double> as_doubles(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) throw ConfigError(field, line_of(node), "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < node.size(); ++i)
        out.push_back(as_double(node[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

std::pair<double, double> as_range(const YAML::Node& node, const std::string& field) {
    const auto v = as_doubles(node, field);
    if (v.size() != 2) throw ConfigError(field, line_of(node), "expected [low, high]");
    if (!(v[0] <= v[1])) throw ConfigError(field, line_of(node), "low must not exceed high");
    return {v[0], v[1]};
}

// Mapping reader that remembers which keys were consumed so leftovers can
// be reported as unknown.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError(path_, line_of(node_), "expected a mapping");
    }

    std::string field(const std::string& key) const { return join(path_, key); }
    int line() const { return line_of(node_); }

    std::optional<YAML::Node> find(const std::string& key) {
        used_.insert(key);
        const YAML::Node& node = node_;
        const YAML::Node child = node[key];
        if (!child || child.IsNull()) return std::nullopt;
        return child;
    }

    YAML::Node need(const std::string& key) {
        auto child = find(key);
        if (!child) throw ConfigError(field(key), line(), "required field is missing");
        return *child;
    }

    double number(const std::string& key) { return as_double(need(key), field(key)); }
    std::optional<double> maybe_number(const std::string& key) {
        auto c = find(key);
        return c ? std::optional(as_double(*c, field(key))) : std::nullopt;
    }

    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!used_.count(key)) throw ConfigError(field(key), line_of(kv.first), "unknown field");
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

// Runs a domain constructor/validator and re-labels its error as a config error.
template <typename F>
auto checked(const std::string& field, int line, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, line, e.what());
    }
}

YAML::Node parse_root(std::string_view text) {
    try {
        YAML::Node root = YAML::Load(std::string(text));
        if (!root.IsMap()) throw ConfigError("", line_of(root), "top level must be a mapping");
        return root;
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
    }
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

WaveformParams read_waveform(Section& root) {
    Section s(root.need("waveform"), "waveform");
    const double fc = s.number("carrier_frequency");
    const double b = s.number("bandwidth");
    const double t = s.number("chirp_duration");
    const auto k = s.maybe_number("slope");
    s.finish();
    return checked("waveform", s.line(),
                   [&] { return k ? WaveformParams(fc, b, t, *k) : WaveformParams(fc, b, t); });
}

ReceiverConfig read_receiver(Section& root) {
    Section s(root.need("receiver"), "receiver");
    const double fs = s.number("sample_rate");
    const std::size_t n = as_count(s.need("num_samples"), s.field("num_samples"));
    s.finish();
    return checked("receiver", s.line(), [&] { return ReceiverConfig(fs, n); });
}

template <typename T, typename F>
std::vector<T> read_list(Section& root, const std::string& key, F&& read_one) {
    std::vector<T> out;
    auto node = root.find(key);
    if (!node) return out;
    if (!node->IsSequence()) throw ConfigError(root.field(key), line_of(*node), "expected a list");
    for (std::size_t i = 0; i < node->size(); ++i) {
        Section item((*node)[i], root.field(key) + "[" + std::to_string(i) + "]");
        out.push_back(read_one(item));
        item.finish();
    }
    return out;
}

OmpConfig read_omp(Section& stage, OmpConfig defaults) {
    auto node = stage.find("omp");
    if (!node) return defaults;
    Section s(*node, stage.field("omp"));
    OmpConfig c = defaults;
    if (auto v = s.find("max_iterations")) c.max_iterations = as_count(*v, s.field("max_iterations"));
    if (auto v = s.maybe_number("energy_variation_threshold")) c.energy_variation_threshold = *v;
    {
        // An explicit null disables the absolute criterion.
        const YAML::Node& omp = *node;
        const bool present = static_cast<bool>(omp["absolute_residual_threshold"]);
        auto v = s.maybe_number("absolute_residual_threshold");
        if (present) c.absolute_residual_threshold = v;
    }
    if (auto v = s.find("correlation")) {
        const auto mode = as_word(*v, s.field("correlation"));
        if (mode == "normalized")
            c.correlation = CorrelationMode::normalized;
        else if (mode == "unnormalized")
            c.correlation = CorrelationMode::unnormalized;
        else if (mode == "projection")
            c.correlation = CorrelationMode::projection;
        else
            throw ConfigError(s.field("correlation"), line_of(*v), "expected normalized, unnormalized or projection");
    }
    if (auto v = s.find("parallel")) c.parallel = as_bool(*v, s.field("parallel"));
    s.finish();
    checked(s.field(""), s.line(), [&] {
        c.validate();
        return 0;
    });
    return c;
}

void emit_omp(YAML::Emitter& e, const OmpConfig& c) {
    e << YAML::Key << "omp" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "max_iterations" << YAML::Value << c.max_iterations;
    e << YAML::Key << "energy_variation_threshold" << YAML::Value << c.energy_variation_threshold;
    e << YAML::Key << "absolute_residual_threshold" << YAML::Value;
    if (c.absolute_residual_threshold)
        e << *c.absolute_residual_threshold;
    else
        e << YAML::Null;
    e << YAML::Key << "correlation" << YAML::Value
      << (c.correlation == CorrelationMode::normalized     ? "normalized"
          : c.correlation == CorrelationMode::unnormalized ? "unnormalized"
                                                            : "projection");
    e << YAML::Key << "parallel" << YAML::Value << c.parallel;
    e << YAML::EndMap;
}

void emit_pair(YAML::Emitter& e, const char* key, const std::pair<double, double>& p) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << p.first << p.second << YAML::EndSeq;
}

void emit_waveform_receiver(YAML::Emitter& e, const WaveformParams& w, const ReceiverConfig& r) {
    e << YAML::Key << "waveform" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "carrier_frequency" << YAML::Value << w.carrier_freq();
    e << YAML::Key << "bandwidth" << YAML::Value << w.bandwidth();
    e << YAML::Key << "chirp_duration" << YAML::Value << w.chirp_duration();
    e << YAML::EndMap;
    e << YAML::Key << "receiver" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "sample_rate" << YAML::Value << r.sample_rate();
    e << YAML::Key << "num_samples" << YAML::Value << r.num_samples();
    e << YAML::EndMap;
}

YAML::Emitter& precise(YAML::Emitter& e) {
    e.SetDoublePrecision(17);
    return e;
}

void emit_detection(YAML::Emitter& e, const DetectedChirplet& d) {
    e << YAML::Flow << YAML::BeginMap;
    e << YAML::Key << "slope" << YAML::Value << d.slope;
    e << YAML::Key << "time_shift" << YAML::Value << d.time_shift;
    e << YAML::Key << "duration" << YAML::Value << d.duration;
    e << YAML::Key << "amplitude" << YAML::Value << d.amplitude;
    e << YAML::Key << "phase" << YAML::Value << d.phase;
    e << YAML::EndMap;
}

void emit_report_body(YAML::Emitter& e, const MitigationReport& r) {
    e << YAML::Key << "snir_before_db" << YAML::Value << r.snir_before_db;
    e << YAML::Key << "snir_after_db" << YAML::Value << r.snir_after_db;
    e << YAML::Key << "snir_improvement_db" << YAML::Value << r.snir_improvement_db;
    e << YAML::Key << "snir_after_coarse_db" << YAML::Value << r.snir_after_coarse_db;
    e << YAML::Key << "residual_energy_ratio" << YAML::Value << r.residual_energy_ratio;
    e << YAML::Key << "target_bins" << YAML::Value << YAML::Flow << r.target_bins;
    e << YAML::Key << "coarse" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "atoms" << YAML::Value << r.coarse_atoms;
    e << YAML::Key << "iterations" << YAML::Value << r.coarse_iterations;
    e << YAML::Key << "stop_reason" << YAML::Value << to_string(r.coarse_stop);
    e << YAML::EndMap;
    e << YAML::Key << "fine" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "atoms" << YAML::Value << r.fine_atoms;
    e << YAML::Key << "iterations" << YAML::Value << r.fine_iterations;
    e << YAML::Key << "stop_reason" << YAML::Value << to_string(r.fine_stop);
    e << YAML::EndMap;
    e << YAML::Key << "wall_time_s" << YAML::Value << r.wall_time;
    e << YAML::Key << "omp_wall_time_s" << YAML::Value << r.omp_wall_time;
    e << YAML::Key << "clusters" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : r.clusters) emit_detection(e, d);
    e << YAML::EndSeq;
    e << YAML::Key << "detected_interferers" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : r.detected_interferers) emit_detection(e, d);
    e << YAML::EndSeq;
}

} // namespace

namespace {

ScenarioFile parse_scenario_impl(std::string_view text) {
    Section root(parse_root(text), "");
    ScenarioFile f;
    auto& s = f.scenario;
    s.waveform = read_waveform(root);
    s.receiver = read_receiver(root);
    s.targets = read_list<TargetEcho>(root, "targets", [](Section& t) {
        TargetEcho e{t.number("delay"), t.maybe_number("amplitude").value_or(1.0)};
        checked(t.field(""), t.line(), [&] {
            e.validate();
            return 0;
        });
        return e;
    });
    s.interferers = read_list<InterferenceSource>(root, "interferers", [](Section& t) {
        InterferenceSource i{t.number("slope"), t.number("delay"), t.maybe_number("amplitude").value_or(1.0)};
        checked(t.field(""), t.line(), [&] {
            i.validate();
            return 0;
        });
        return i;
    });
    s.noise_std = root.maybe_number("noise_std").value_or(0.0);
    if (auto v = root.find("seed")) s.rng_seed = static_cast<std::uint64_t>(as_count(*v, "seed"));
    if (auto node = root.find("frame")) {
        Section fr(*node, "frame");
        FrameSpec spec;
        spec.num_chirps = as_count(fr.need("num_chirps"), fr.field("num_chirps"));
        if (spec.num_chirps < 1) throw ConfigError(fr.field("num_chirps"), fr.line(), "must be >= 1");
        if (auto v = fr.find("doppler_phase_steps"))
            spec.doppler_phase_steps = as_doubles(*v, fr.field("doppler_phase_steps"));
        if (spec.doppler_phase_steps.size() > s.targets.size())
            throw ConfigError(fr.field("doppler_phase_steps"), fr.line(), "more entries than targets");
        fr.finish();
        f.frame = spec;
    }
    root.finish();
    checked("", 0, [&] {
        s.validate();
        return 0;
    });
    return f;
}

} // namespace

ScenarioFile parse_scenario(std::string_view text) {
    try {
        return parse_scenario_impl(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("", e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
    }
}

ScenarioFile load_scenario(const std::filesystem::path& path) { return parse_scenario(slurp(path)); }

std::string dump_scenario(const ScenarioFile& f) {
    YAML::Emitter e;
    precise(e) << YAML::BeginMap;
    emit_waveform_receiver(e, f.scenario.waveform, f.scenario.receiver);
    e << YAML::Key << "targets" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : f.scenario.targets)
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "delay" << YAML::Value << t.delay << YAML::Key
          << "amplitude" << YAML::Value << t.amplitude << YAML::EndMap;
    e << YAML::EndSeq;
    e << YAML::Key << "interferers" << YAML::Value << YAML::BeginSeq;
    for (const auto& i : f.scenario.interferers)
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "slope" << YAML::Value << i.slope << YAML::Key << "delay"
          << YAML::Value << i.delay << YAML::Key << "amplitude" << YAML::Value << i.amplitude << YAML::EndMap;
    e << YAML::EndSeq;
    e << YAML::Key << "noise_std" << YAML::Value << f.scenario.noise_std;
    e << YAML::Key << "seed" << YAML::Value << f.scenario.rng_seed;
    if (f.frame) {
        e << YAML::Key << "frame" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "num_chirps" << YAML::Value << f.frame->num_chirps;
        e << YAML::Key << "doppler_phase_steps" << YAML::Value << YAML::Flow << f.frame->doppler_phase_steps;
        e << YAML::EndMap;
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

namespace {

MitigationFile parse_mitigation_impl(std::string_view text) {
    Section root(parse_root(text), "");
    MitigationFile f;
    f.waveform = read_waveform(root);
    f.receiver = read_receiver(root);
    checked("receiver", 0, [&] {
        f.receiver.check_against(f.waveform);
        return 0;
    });
    auto& c = f.config;
    if (auto node = root.find("coarse")) {
        Section s(*node, "coarse");
        if (auto v = s.find("slope_hypotheses")) c.coarse.slope_hypotheses = as_count(*v, s.field("slope_hypotheses"));
        if (auto v = s.find("time_hypotheses")) c.coarse.time_hypotheses = as_count(*v, s.field("time_hypotheses"));
        if (auto v = s.find("slope_range")) c.coarse.slope_range = as_range(*v, s.field("slope_range"));
        if (auto v = s.find("time_range")) c.coarse.time_range = as_range(*v, s.field("time_range"));
        c.coarse.omp = read_omp(s, c.coarse.omp);
        s.finish();
    }
    if (auto node = root.find("fine")) {
        Section s(*node, "fine");
        if (auto v = s.find("slope_hypotheses")) c.fine.slope_hypotheses = as_count(*v, s.field("slope_hypotheses"));
        if (auto v = s.find("time_hypotheses")) c.fine.time_hypotheses = as_count(*v, s.field("time_hypotheses"));
        c.fine.omp = read_omp(s, c.fine.omp);
        s.finish();
    }
    if (auto node = root.find("highpass")) {
        Section s(*node, "highpass");
        HighpassSpec hp;
        if (auto v = s.find("taps")) {
            hp.taps = as_doubles(*v, s.field("taps"));
            if (hp.taps.empty()) throw ConfigError(s.field("taps"), line_of(*v), "needs at least one tap");
            c.highpass = FilterCoeffs{hp.taps, 0.0, 0.0, "explicit taps"};
        } else {
            hp.cutoff = s.number("cutoff");
            hp.transition_width = s.maybe_number("transition_width").value_or(hp.cutoff);
            c.highpass = checked(s.field("cutoff"), s.line(), [&] {
                return design_highpass(hp.cutoff, hp.transition_width, f.receiver);
            });
        }
        s.finish();
        f.highpass = hp;
    }
    c.k_min = root.maybe_number("k_min");
    if (auto v = root.find("target_frequencies")) c.target_freqs = as_doubles(*v, "target_frequencies");
    if (auto v = root.find("target_delays")) {
        f.target_delays = as_doubles(*v, "target_delays");
        for (double d : f.target_delays) c.target_freqs.push_back(f.waveform.slope() * d);
    }
    if (auto v = root.find("window")) {
        const auto w = as_word(*v, "window");
        if (w == "hann")
            c.window = WindowKind::hann;
        else if (w == "rectangular")
            c.window = WindowKind::rectangular;
        else
            throw ConfigError("window", line_of(*v), "expected hann or rectangular");
    }
    root.finish();
    checked("", 0, [&] {
        c.validate();
        return 0;
    });
    return f;
}

} // namespace

MitigationFile parse_mitigation(std::string_view text) {
    try {
        return parse_mitigation_impl(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("", e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
    }
}

MitigationFile load_mitigation(const std::filesystem::path& path) { return parse_mitigation(slurp(path)); }

std::string dump_mitigation(const MitigationFile& f) {
    const auto& c = f.config;
    YAML::Emitter e;
    precise(e) << YAML::BeginMap;
    emit_waveform_receiver(e, f.waveform, f.receiver);
    e << YAML::Key << "coarse" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "slope_hypotheses" << YAML::Value << c.coarse.slope_hypotheses;
    e << YAML::Key << "time_hypotheses" << YAML::Value << c.coarse.time_hypotheses;
    if (c.coarse.slope_range) emit_pair(e, "slope_range", *c.coarse.slope_range);
    if (c.coarse.time_range) emit_pair(e, "time_range", *c.coarse.time_range);
    emit_omp(e, c.coarse.omp);
    e << YAML::EndMap;
    e << YAML::Key << "fine" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "slope_hypotheses" << YAML::Value << c.fine.slope_hypotheses;
    e << YAML::Key << "time_hypotheses" << YAML::Value << c.fine.time_hypotheses;
    emit_omp(e, c.fine.omp);
    e << YAML::EndMap;
    if (c.highpass) {
        e << YAML::Key << "highpass" << YAML::Value << YAML::BeginMap;
        if (f.highpass && f.highpass->taps.empty()) {
            e << YAML::Key << "cutoff" << YAML::Value << f.highpass->cutoff;
            e << YAML::Key << "transition_width" << YAML::Value << f.highpass->transition_width;
        } else {
            e << YAML::Key << "taps" << YAML::Value << YAML::Flow << c.highpass->taps;
        }
        e << YAML::EndMap;
    }
    if (c.k_min) e << YAML::Key << "k_min" << YAML::Value << *c.k_min;
    // Delays were folded into frequencies on load; write frequencies only.
    if (!c.target_freqs.empty())
        e << YAML::Key << "target_frequencies" << YAML::Value << YAML::Flow << c.target_freqs;
    e << YAML::Key << "window" << YAML::Value << (c.window == WindowKind::hann ? "hann" : "rectangular");
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string report_yaml(const MitigationReport& report) {
    YAML::Emitter e;
    precise(e) << YAML::BeginMap;
    emit_report_body(e, report);
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string report_yaml(const std::vector<MitigationReport>& frame) {
    YAML::Emitter e;
    precise(e) << YAML::BeginMap << YAML::Key << "chirps" << YAML::Value << YAML::BeginSeq;
    for (std::size_t c = 0; c < frame.size(); ++c) {
        e << YAML::BeginMap << YAML::Key << "chirp" << YAML::Value << c;
        emit_report_body(e, frame[c]);
        e << YAML::EndMap;
    }
    e << YAML::EndSeq << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string report_csv_header() {
    return "chirp,snir_before_db,snir_after_db,snir_improvement_db,snir_after_coarse_db,residual_energy_ratio,"
           "coarse_iterations,fine_iterations,coarse_stop,fine_stop,clusters,detected,wall_time_s,omp_wall_time_s\n";
}

std::string report_csv_row(std::size_t chirp, const MitigationReport& r) {
    std::ostringstream out;
    out.precision(10);
    out << chirp << ',' << r.snir_before_db << ',' << r.snir_after_db << ',' << r.snir_improvement_db << ','
        << r.snir_after_coarse_db << ',' << r.residual_energy_ratio << ',' << r.coarse_iterations << ','
        << r.fine_iterations << ',' << to_string(r.coarse_stop) << ',' << to_string(r.fine_stop) << ','
        << r.clusters.size() << ',' << r.detected_interferers.size() << ',' << r.wall_time << ','
        << r.omp_wall_time << '\n';
    return out.str();
}

} // namespace fmcwim
