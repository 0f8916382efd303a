#pragma once

// Signal files. CSV: a `sample_rate=<Hz>` header line, then one sample per
// line printed with 17 significant digits (round-trips doubles exactly).
// F32: raw little-endian float32 with no header; the rate comes from outside.

#include "fmcwim/signal_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace fmcwim {

enum class SignalFormat { csv, f32 };

// ".f32" and ".bin" select F32, anything else CSV.
SignalFormat format_for(const std::filesystem::path& path);

void write_signal_csv(std::ostream& out, const SampledSignal& signal);
SampledSignal read_signal_csv(std::istream& in);

void write_signal_f32(std::ostream& out, const SampledSignal& signal);
SampledSignal read_signal_f32(std::istream& in, double sample_rate);

// Throw IoError on open/read/write failures and malformed content.
void write_signal(const std::filesystem::path& path, const SampledSignal& signal);
// sample_rate is required for F32 files; for CSV it must match the header
// when given.
SampledSignal read_signal(const std::filesystem::path& path,
                          std::optional<double> sample_rate = std::nullopt);

// "<stem>_c007<ext>": file of chirp 7 in a frame.
std::filesystem::path frame_path(const std::filesystem::path& path, std::size_t chirp);

} // namespace fmcwim
