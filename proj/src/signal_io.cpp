#include "fmcwim/signal_io.hpp"

#include "fmcwim/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace fmcwim {

namespace {

constexpr std::string_view kRateKey = "sample_rate=";

double parse_double(std::string_view text, std::size_t line) {
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ' || text.back() == '\t'))
        text.remove_suffix(1);
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw IoError("line " + std::to_string(line) + ": not a number: '" + std::string(text) + "'");
    return value;
}

} // namespace

SignalFormat format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".f32" || ext == ".bin" ? SignalFormat::f32 : SignalFormat::csv;
}

void write_signal_csv(std::ostream& out, const SampledSignal& signal) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", signal.sample_rate);
    out << kRateKey << buf << '\n';
    for (double x : signal.samples) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << '\n';
    }
}

SampledSignal read_signal_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kRateKey, 0) != 0)
        throw IoError("line 1: expected header 'sample_rate=<Hz>'");
    SampledSignal s;
    s.sample_rate = parse_double(std::string_view(line).substr(kRateKey.size()), 1);
    if (!(s.sample_rate > 0.0) || !std::isfinite(s.sample_rate)) throw IoError("line 1: sample rate must be > 0");
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        s.samples.push_back(parse_double(line, n));
    }
    return s;
}

void write_signal_f32(std::ostream& out, const SampledSignal& signal) {
    for (double x : signal.samples) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        char bytes[4];
        std::memcpy(bytes, &bits, 4);
        out.write(bytes, 4);
    }
}

SampledSignal read_signal_f32(std::istream& in, double sample_rate) {
    if (!(sample_rate > 0.0)) throw IoError("float32 signals need a sample rate > 0");
    SampledSignal s;
    s.sample_rate = sample_rate;
    char bytes[4];
    while (in.read(bytes, 4)) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, bytes, 4);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        s.samples.push_back(static_cast<double>(std::bit_cast<float>(bits)));
    }
    if (in.gcount() != 0) throw IoError("float32 file size is not a multiple of 4 bytes");
    return s;
}

void write_signal(const std::filesystem::path& path, const SampledSignal& signal) {
    const auto fmt = format_for(path);
    std::ofstream out(path, fmt == SignalFormat::f32 ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (fmt == SignalFormat::f32)
        write_signal_f32(out, signal);
    else
        write_signal_csv(out, signal);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

SampledSignal read_signal(const std::filesystem::path& path, std::optional<double> sample_rate) {
    const auto fmt = format_for(path);
    std::ifstream in(path, fmt == SignalFormat::f32 ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        if (fmt == SignalFormat::f32) {
            if (!sample_rate) throw IoError("float32 signals need a sample rate");
            return read_signal_f32(in, *sample_rate);
        }
        auto s = read_signal_csv(in);
        if (sample_rate && s.sample_rate != *sample_rate)
            throw IoError("sample rate " + std::to_string(s.sample_rate) + " differs from expected " +
                          std::to_string(*sample_rate));
        return s;
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::filesystem::path frame_path(const std::filesystem::path& path, std::size_t chirp) {
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_c%03zu", chirp);
    auto out = path;
    out.replace_filename(path.stem().string() + suffix + path.extension().string());
    return out;
}

} // namespace fmcwim
