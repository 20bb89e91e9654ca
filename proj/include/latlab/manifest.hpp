#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "latlab/container.hpp"
#include "latlab/error.hpp"

namespace latlab {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fmt_int(long long v) { return std::to_string(v); }

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

// Rows of pre-formatted cells; no quoting (cells never contain commas here).
inline std::string to_csv(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw DataError("csv row width mismatch");
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

inline std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

// Per-run provenance: command, configuration, input hashes, output hashes.
// Content only, no timestamps, so identical runs write identical manifests.
struct RunManifest {
    json j;

    RunManifest(const std::string& command, const json& config) {
        j["version"] = 1;
        j["command"] = command;
        j["config"] = config;
        j["inputs"] = json::object();
        j["outputs"] = json::object();
    }

    void input(const std::string& name, const std::filesystem::path& path) {
        j["inputs"][name] = json{{"path", path.string()}, {"hash", file_hash_hex(path)}};
    }

    void output(const std::string& name, const std::filesystem::path& path) {
        j["outputs"][name] = json{{"file", path.filename().string()}, {"hash", file_hash_hex(path)}};
    }

    void write(const std::filesystem::path& path) const {
        write_text_atomic(path, j.dump(2) + "\n");
    }
};

}  // namespace latlab
