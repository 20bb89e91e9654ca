#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "latlab/error.hpp"

namespace latlab {

// Plain lookup tokenizer: one token per vocab line, line number = id.
// Text is split on whitespace; pieces missing from the vocab fall back to
// their bytes via <0xHH> entries when the vocab provides them.
class Vocab {
public:
    Vocab() = default;

    explicit Vocab(std::vector<std::string> tokens) { init(std::move(tokens)); }

    static Vocab from_file(const std::filesystem::path& path) {
        std::ifstream f(path);
        if (!f) throw DataError("cannot open vocab file: " + path.string());
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(f, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            tokens.push_back(line);
        }
        return Vocab(std::move(tokens));
    }

    void save(const std::filesystem::path& path) const {
        std::ostringstream out;
        for (const std::string& t : tokens_) out << t << "\n";
        const std::string s = out.str();
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write vocab file: " + path.string());
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    const std::string& token(int id) const {
        if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
        return tokens_[id];
    }

    bool contains(const std::string& t) const { return ids_.count(t) > 0; }

    int id(const std::string& t) const {
        const auto it = ids_.find(t);
        if (it == ids_.end()) throw DataError("token not in vocab: \"" + t + "\"");
        return it->second;
    }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        std::istringstream in(text);
        std::string piece;
        while (in >> piece) {
            const auto it = ids_.find(piece);
            if (it != ids_.end()) {
                out.push_back(it->second);
                continue;
            }
            for (const unsigned char b : piece) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "<0x%02X>", b);
                const auto bit = ids_.find(buf);
                if (bit == ids_.end())
                    throw DataError("cannot tokenize \"" + piece + "\": not in vocab and no byte fallback");
                out.push_back(bit->second);
            }
        }
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (size_t i = 0; i < ids.size(); ++i) {
            if (i) out += ' ';
            out += token(ids[i]);
        }
        return out;
    }

private:
    void init(std::vector<std::string> tokens) {
        tokens_ = std::move(tokens);
        for (size_t i = 0; i < tokens_.size(); ++i) {
            if (tokens_[i].empty()) continue;  // blank lines act as reserved ids
            const auto [it, fresh] = ids_.emplace(tokens_[i], static_cast<int>(i));
            if (!fresh) throw DataError("duplicate vocab token: \"" + tokens_[i] + "\"");
        }
    }

    std::vector<std::string> tokens_;
    std::map<std::string, int> ids_;
};

}  // namespace latlab
