#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "latlab/error.hpp"
#include "latlab/mat.hpp"

namespace latlab {

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts unsupported");

using json = nlohmann::ordered_json;

enum class ContainerKind { checkpoint, sae, activation_dump };

inline const char* magic_of(ContainerKind k) {
    switch (k) {
        case ContainerKind::checkpoint: return "LSLC1";
        case ContainerKind::sae: return "LSSA1";
        case ContainerKind::activation_dump: return "LSAD1";
    }
    throw DataError("unknown container kind");
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// File layout: 5-byte magic, u32 LE header length, UTF-8 JSON header, payload.
// The header declares "payload_bytes"; a file whose size disagrees is rejected.
struct Container {
    ContainerKind kind = ContainerKind::checkpoint;
    json header;
    std::vector<uint8_t> payload;
};

namespace detail {

inline void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    const size_t n = out.size();
    out.resize(n + 4);
    std::memcpy(out.data() + n, &v, 4);
}

}  // namespace detail

// Atomic write: the bytes land in a sibling temp file first, then rename.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open for writing: " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw DataError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_container(const std::filesystem::path& path, const Container& c) {
    json header = c.header;
    header["payload_bytes"] = c.payload.size();
    const std::string hs = header.dump();
    std::vector<uint8_t> out;
    out.reserve(5 + 4 + hs.size() + c.payload.size());
    const char* magic = magic_of(c.kind);
    out.insert(out.end(), magic, magic + 5);
    detail::append_u32(out, static_cast<uint32_t>(hs.size()));
    out.insert(out.end(), hs.begin(), hs.end());
    out.insert(out.end(), c.payload.begin(), c.payload.end());
    write_file_atomic(path, out);
}

inline Container read_container(const std::filesystem::path& path, ContainerKind expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 9) throw DataError("truncated container (no header): " + path.string());
    const std::string magic(bytes.begin(), bytes.begin() + 5);
    if (magic != magic_of(expected))
        throw DataError("magic mismatch in " + path.string() + ": got \"" + magic + "\", want \"" +
                        magic_of(expected) + "\"");

    uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 5, 4);
    if (bytes.size() < 9 + static_cast<size_t>(hlen))
        throw DataError("truncated container (header cut short): " + path.string());

    Container c;
    c.kind = expected;
    try {
        c.header = json::parse(bytes.begin() + 9, bytes.begin() + 9 + hlen);
    } catch (const std::exception& e) {
        throw DataError("bad container header in " + path.string() + ": " + e.what());
    }
    const int version = c.header.value("version", -1);
    if (version != 1) throw DataError("unsupported container version in " + path.string());

    const size_t declared = c.header.value("payload_bytes", size_t(0));
    const size_t actual = bytes.size() - 9 - hlen;
    if (declared != actual)
        throw DataError("payload length mismatch in " + path.string() + ": header declares " +
                        std::to_string(declared) + " bytes, file has " + std::to_string(actual));
    c.payload.assign(bytes.begin() + 9 + hlen, bytes.end());
    return c;
}

// ---------------------------------------------------------------------------
// Tensor containers (checkpoints, SAE weights): an ordered manifest of named
// f32 tensors with shapes and byte offsets into the payload.
// ---------------------------------------------------------------------------

class TensorFile {
public:
    json meta;  // kind-specific header fields, stored under "meta"

    void add(const std::string& name, std::vector<int> shape, std::span<const float> data) {
        size_t count = 1;
        for (const int s : shape) count *= static_cast<size_t>(s);
        if (count != data.size())
            throw DataError("tensor " + name + ": shape/count mismatch");
        Entry e;
        e.name = name;
        e.shape = std::move(shape);
        e.offset = payload_.size();
        payload_.resize(payload_.size() + count * 4);
        std::memcpy(payload_.data() + e.offset, data.data(), count * 4);
        entries_.push_back(std::move(e));
    }

    void add(const std::string& name, const Mat<float>& m) {
        add(name, {m.rows, m.cols}, std::span<const float>(m.a));
    }

    void write(const std::filesystem::path& path, ContainerKind kind) const {
        Container c;
        c.kind = kind;
        c.header["version"] = 1;
        c.header["meta"] = meta.is_null() ? json::object() : meta;
        json tensors = json::array();
        for (const Entry& e : entries_) {
            tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"dtype", "f32"}, {"offset", e.offset}});
        }
        c.header["tensors"] = tensors;
        c.payload = payload_;
        write_container(path, c);
    }

    static TensorFile read(const std::filesystem::path& path, ContainerKind kind) {
        const Container c = read_container(path, kind);
        TensorFile t;
        t.meta = c.header.value("meta", json::object());
        if (!c.header.contains("tensors") || !c.header["tensors"].is_array())
            throw DataError("missing tensor manifest in " + path.string());
        for (const auto& j : c.header["tensors"]) {
            Entry e;
            e.name = j.at("name").get<std::string>();
            e.shape = j.at("shape").get<std::vector<int>>();
            if (j.value("dtype", "") != std::string("f32"))
                throw DataError("tensor " + e.name + ": unsupported dtype");
            e.offset = j.at("offset").get<size_t>();
            size_t count = 1;
            for (const int s : e.shape) {
                if (s <= 0) throw DataError("tensor " + e.name + ": non-positive dimension");
                count *= static_cast<size_t>(s);
            }
            if (e.offset + count * 4 > c.payload.size())
                throw DataError("tensor " + e.name + " extends past payload end");
            t.entries_.push_back(std::move(e));
        }
        t.payload_ = c.payload;
        return t;
    }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    std::vector<int> shape(const std::string& name) const { return require(name).shape; }

    // Copies out a tensor, validating the declared shape.
    std::vector<float> tensor(const std::string& name, const std::vector<int>& expected_shape) const {
        const Entry& e = require(name);
        if (e.shape != expected_shape) {
            std::string got = "[", want = "[";
            for (const int s : e.shape) got += std::to_string(s) + ",";
            for (const int s : expected_shape) want += std::to_string(s) + ",";
            throw DataError("shape mismatch for tensor \"" + name + "\": file has " + got + "], expected " +
                            want + "]");
        }
        size_t count = 1;
        for (const int s : e.shape) count *= static_cast<size_t>(s);
        std::vector<float> out(count);
        std::memcpy(out.data(), payload_.data() + e.offset, count * 4);
        return out;
    }

    Mat<float> matrix(const std::string& name, int rows, int cols) const {
        Mat<float> m(rows, cols);
        m.a = tensor(name, {rows, cols});
        return m;
    }

private:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        size_t offset = 0;
    };

    const Entry* find(const std::string& name) const {
        for (const Entry& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }

    const Entry& require(const std::string& name) const {
        const Entry* e = find(name);
        if (!e) throw DataError("missing tensor \"" + name + "\"");
        return *e;
    }

    std::vector<Entry> entries_;
    std::vector<uint8_t> payload_;
};

// ---------------------------------------------------------------------------
// Activation dumps: fixed-width f32 rows, each prefixed by four u32 tags
// (example-id hash, condition index, layer, step). Record order is capture
// order and round-trips unchanged.
// ---------------------------------------------------------------------------

struct ActivationDump {
    int width = 0;
    std::vector<std::string> labels;  // condition index -> label

    struct Rec {
        uint32_t example_hash = 0;
        uint32_t condition = 0;
        uint32_t layer = 0;
        uint32_t step = 0;
        std::vector<float> values;
    };
    std::vector<Rec> records;

    int condition_index(const std::string& label) {
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        labels.push_back(label);
        return static_cast<int>(labels.size()) - 1;
    }
};

inline Mat<float> dump_to_mat(const ActivationDump& d) {
    if (d.records.empty()) throw DataError("dump_to_mat: empty dump");
    Mat<float> rows(static_cast<int>(d.records.size()), d.width);
    for (size_t r = 0; r < d.records.size(); ++r) {
        if (static_cast<int>(d.records[r].values.size()) != d.width)
            throw DataError("activation record width mismatch");
        std::copy(d.records[r].values.begin(), d.records[r].values.end(),
                  rows.row(static_cast<int>(r)).begin());
    }
    return rows;
}

inline void save_dump(const std::filesystem::path& path, const ActivationDump& d) {
    Container c;
    c.kind = ContainerKind::activation_dump;
    c.header["version"] = 1;
    c.header["width"] = d.width;
    c.header["count"] = d.records.size();
    c.header["labels"] = d.labels;
    const size_t row = 16 + static_cast<size_t>(d.width) * 4;
    c.payload.resize(row * d.records.size());
    size_t off = 0;
    for (const ActivationDump::Rec& r : d.records) {
        if (static_cast<int>(r.values.size()) != d.width)
            throw DataError("activation record width mismatch");
        std::memcpy(c.payload.data() + off + 0, &r.example_hash, 4);
        std::memcpy(c.payload.data() + off + 4, &r.condition, 4);
        std::memcpy(c.payload.data() + off + 8, &r.layer, 4);
        std::memcpy(c.payload.data() + off + 12, &r.step, 4);
        std::memcpy(c.payload.data() + off + 16, r.values.data(), static_cast<size_t>(d.width) * 4);
        off += row;
    }
    write_container(path, c);
}

inline ActivationDump load_dump(const std::filesystem::path& path) {
    const Container c = read_container(path, ContainerKind::activation_dump);
    ActivationDump d;
    d.width = c.header.value("width", 0);
    if (d.width <= 0) throw DataError("activation dump with non-positive width: " + path.string());
    d.labels = c.header.value("labels", std::vector<std::string>{});
    const size_t count = c.header.value("count", size_t(0));
    const size_t row = 16 + static_cast<size_t>(d.width) * 4;
    if (c.payload.size() != row * count)
        throw DataError("activation dump truncated: " + path.string() + " (header count " +
                        std::to_string(count) + ")");
    d.records.resize(count);
    size_t off = 0;
    for (ActivationDump::Rec& r : d.records) {
        std::memcpy(&r.example_hash, c.payload.data() + off + 0, 4);
        std::memcpy(&r.condition, c.payload.data() + off + 4, 4);
        std::memcpy(&r.layer, c.payload.data() + off + 8, 4);
        std::memcpy(&r.step, c.payload.data() + off + 12, 4);
        r.values.resize(d.width);
        std::memcpy(r.values.data(), c.payload.data() + off + 16, static_cast<size_t>(d.width) * 4);
        off += row;
    }
    return d;
}

}  // namespace latlab
