#include "manifest.hpp"

#include "fmcwim/errors.hpp"
#include "fmcwim/hashing.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>

#ifndef FMCWIM_VERSION
#define FMCWIM_VERSION "0.0.0"
#endif

namespace fmcwim::cli {

namespace {

void emit_files(YAML::Emitter& e, const char* key, const std::vector<FileRecord>& files) {
    e << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (const auto& f : files) {
        e << YAML::BeginMap;
        if (!f.role.empty()) e << YAML::Key << "role" << YAML::Value << f.role;
        e << YAML::Key << "path" << YAML::Value << f.path.string();
        e << YAML::Key << "sha256" << YAML::Value << f.sha256;
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;
}

std::vector<FileRecord> read_files(const YAML::Node& node) {
    std::vector<FileRecord> out;
    if (!node || !node.IsSequence()) return out;
    for (const auto& f : node)
        out.push_back({f["role"] ? f["role"].as<std::string>() : "", f["path"].as<std::string>(),
                       f["sha256"].as<std::string>()});
    return out;
}

} // namespace

void RunManifest::add_config(const std::filesystem::path& path) {
    configs.push_back({"config", path, sha256_file(path)});
}

void RunManifest::add_input(std::string role, const std::filesystem::path& path) {
    inputs.push_back({std::move(role), path, sha256_file(path)});
}

void RunManifest::add_output(std::string role, const std::filesystem::path& path) {
    outputs.push_back({std::move(role), path, sha256_file(path)});
}

std::string RunManifest::to_yaml() const {
    YAML::Emitter e;
    e.SetDoublePrecision(9);
    e << YAML::BeginMap;
    e << YAML::Key << "command" << YAML::Value << command;
    e << YAML::Key << "arguments" << YAML::Value << YAML::Flow << arguments;
    e << YAML::Key << "tool_version" << YAML::Value << tool_version;
    e << YAML::Key << "seed" << YAML::Value;
    if (seed)
        e << *seed;
    else
        e << YAML::Null;
    emit_files(e, "configs", configs);
    emit_files(e, "inputs", inputs);
    emit_files(e, "outputs", outputs);
    e << YAML::Key << "timings_s" << YAML::Value << YAML::BeginMap;
    for (const auto& [stage, seconds] : timings) e << YAML::Key << stage << YAML::Value << seconds;
    e << YAML::EndMap;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << to_yaml();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

RunManifest read_manifest(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw IoError("cannot open '" + path.string() + "'");
    } catch (const YAML::Exception& e) {
        throw ConfigError("", e.mark.line + 1, e.msg);
    }
    RunManifest m;
    try {
        m.command = root["command"].as<std::string>();
        if (root["arguments"]) m.arguments = root["arguments"].as<std::vector<std::string>>();
        m.tool_version = root["tool_version"] ? root["tool_version"].as<std::string>() : "";
        if (root["seed"] && !root["seed"].IsNull()) m.seed = root["seed"].as<std::uint64_t>();
        m.configs = read_files(root["configs"]);
        m.inputs = read_files(root["inputs"]);
        m.outputs = read_files(root["outputs"]);
        if (root["timings_s"])
            for (const auto& kv : root["timings_s"])
                m.timings.emplace_back(kv.first.as<std::string>(), kv.second.as<double>());
    } catch (const YAML::Exception& e) {
        throw ConfigError("", e.mark.line + 1, "malformed manifest: " + e.msg);
    }
    return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
    auto p = out;
    p.replace_filename(out.stem().string() + ".manifest.yaml");
    return p;
}

const char* tool_version() noexcept { return FMCWIM_VERSION; }

} // namespace fmcwim::cli
