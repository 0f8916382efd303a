#pragma once

// On-disk dictionary cache. A file holds a fixed header (magic, format
// version, cache key, receiver and waveform) followed by the packed atoms.
// The key is a SHA-256 over every input that shapes the atoms, so a file is
// only ever reused for exactly the grid it was built for.

#include "fmcwim/chirplet_dictionary.hpp"
#include "fmcwim/highpass.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace fmcwim {

std::string dictionary_cache_key(const GridSpec& spec, const ReceiverConfig& receiver,
                                 const WaveformParams& waveform, const std::optional<FilterCoeffs>& filter);

void write_dictionary(std::ostream& out, const DictionaryGrid& grid, const std::string& key);
// Throws IoError for truncated or malformed streams. Returns nullopt when
// the stored key differs from expected_key.
std::optional<DictionaryGrid> read_dictionary(std::istream& in, const std::string& expected_key);

void save_dictionary(const std::filesystem::path& path, const DictionaryGrid& grid, const std::string& key);
// nullopt when the file is missing or keyed differently.
std::optional<DictionaryGrid> load_dictionary(const std::filesystem::path& path, const std::string& expected_key);

// "<dir>/<key>.dict"
std::filesystem::path dictionary_cache_path(const std::filesystem::path& dir, const std::string& key);

struct CachedGrid {
    DictionaryGrid grid;
    std::string key;
    bool hit = false;
};

// Built (and filtered, when a filter is given) grid, read from cache_dir
// when a matching file exists and written there otherwise.
CachedGrid cached_grid(const GridSpec& spec, const ReceiverConfig& receiver, const WaveformParams& waveform,
                       const std::optional<FilterCoeffs>& filter, const std::filesystem::path& cache_dir);

} // namespace fmcwim
