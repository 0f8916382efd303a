#pragma once

// One manifest per CLI run: what ran, on which files, with which seed, and
// the SHA-256 of every input and output so a rerun can be checked.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fmcwim::cli {

struct FileRecord {
    std::string role; // e.g. "config", "signal", "reference"
    std::filesystem::path path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;
    std::vector<FileRecord> configs;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::optional<std::uint64_t> seed;
    std::string tool_version;
    std::vector<std::pair<std::string, double>> timings; // stage, seconds

    // Hashes the file now; throws IoError if it cannot be read.
    void add_config(const std::filesystem::path& path);
    void add_input(std::string role, const std::filesystem::path& path);
    void add_output(std::string role, const std::filesystem::path& path);

    std::string to_yaml() const;
    void write(const std::filesystem::path& path) const;
};

RunManifest read_manifest(const std::filesystem::path& path);

// "<out stem>.manifest.yaml" next to <out>
std::filesystem::path manifest_path_for(const std::filesystem::path& out);

const char* tool_version() noexcept;

} // namespace fmcwim::cli
