#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "latlab/error.hpp"
#include "latlab/rng.hpp"

namespace latlab {

struct DatasetRecord {
    std::string example_id;
    std::string question;
    std::string gold_answer;
};

struct DatasetFields {
    std::string id = "id";
    std::string question = "question";
    std::string answer = "answer";
};

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline std::string strip(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Canonical form for answer comparison: take the text after the last "####"
// marker if present, trim, lowercase. Numeric strings additionally drop
// thousands separators, a leading '+', and redundant zeros.
inline std::string normalize_answer(const std::string& raw) {
    std::string s = raw;
    const size_t pos = s.rfind("####");
    if (pos != std::string::npos) s = s.substr(pos + 4);
    s = lowercase(strip(s));

    std::string t;
    for (const char c : s)
        if (c != ',' && c != '$') t += c;

    // numeric canonicalization
    size_t i = 0;
    bool neg = false;
    if (i < t.size() && (t[i] == '+' || t[i] == '-')) neg = (t[i++] == '-');
    size_t digits = i;
    while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
    size_t frac = digits;
    if (frac < t.size() && t[frac] == '.') {
        ++frac;
        while (frac < t.size() && std::isdigit(static_cast<unsigned char>(t[frac]))) ++frac;
    }
    if (digits > i && frac == t.size()) {
        std::string ip = t.substr(i, digits - i);
        std::string fp = (frac > digits) ? t.substr(digits + 1, frac - digits - 1) : "";
        while (ip.size() > 1 && ip.front() == '0') ip.erase(ip.begin());
        while (!fp.empty() && fp.back() == '0') fp.pop_back();
        std::string out = (neg && !(ip == "0" && fp.empty())) ? "-" : "";
        out += ip;
        if (!fp.empty()) out += "." + fp;
        return out;
    }
    return t;
}

// One JSON object per line. Duplicate ids rejected; missing ids autonumbered.
inline std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path,
                                               const DatasetFields& fields = {}) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open dataset: " + path.string());
    std::vector<DatasetRecord> out;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        DatasetRecord r;
        r.example_id = j.contains(fields.id) ? j[fields.id].is_string() ? j[fields.id].get<std::string>()
                                                                        : j[fields.id].dump()
                                             : "ex" + std::to_string(lineno);
        if (!j.contains(fields.question) || !j.contains(fields.answer))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing \"" + fields.question +
                            "\" or \"" + fields.answer + "\" field");
        r.question = j[fields.question].get<std::string>();
        r.gold_answer = normalize_answer(j[fields.answer].get<std::string>());
        if (r.question.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty question");
        if (r.gold_answer.empty())
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty gold answer");
        if (!seen.insert(r.example_id).second)
            throw DataError(path.string() + ": duplicate example id \"" + r.example_id + "\"");
        out.push_back(std::move(r));
    }
    return out;
}

// Uniform sample of n records without replacement; both halves keep the
// original file order. Deterministic in seed.
inline std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> sample_split(
    const std::vector<DatasetRecord>& data, size_t n, uint64_t seed) {
    if (n < 1 || n > data.size())
        throw DataError("sample_split: n=" + std::to_string(n) + " out of range for dataset of " +
                        std::to_string(data.size()));
    Rng rng(seed);
    const std::vector<size_t> pick = rng.sample_indices(data.size(), n);
    std::vector<bool> in(data.size(), false);
    for (const size_t i : pick) in[i] = true;
    std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> out;
    for (size_t i = 0; i < data.size(); ++i) (in[i] ? out.first : out.second).push_back(data[i]);
    return out;
}

inline void save_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& data,
                         const DatasetFields& fields = {}) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write dataset: " + path.string());
    for (const DatasetRecord& r : data) {
        nlohmann::ordered_json j;
        j[fields.id] = r.example_id;
        j[fields.question] = r.question;
        j[fields.answer] = r.gold_answer;
        f << j.dump() << "\n";
    }
}

// Completion scoring: pull the answer span out of generated text, compare to
// the gold answer. The span is whatever follows the last occurrence of the
// delimiter; absent a delimiter hit, the last number in the text, else the
// last whitespace token.
struct Scorer {
    std::string delimiter = "answer:";

    std::string extract(const std::string& completion) const {
        std::string text = lowercase(completion);
        if (!delimiter.empty()) {
            const size_t pos = text.rfind(lowercase(delimiter));
            if (pos != std::string::npos) text = text.substr(pos + delimiter.size());
        }
        // last numeric run
        std::string best;
        for (size_t i = 0; i < text.size();) {
            if (std::isdigit(static_cast<unsigned char>(text[i])) ||
                (text[i] == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
                size_t j = i + (text[i] == '-' ? 1 : 0);
                while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.' ||
                                           text[j] == ','))
                    ++j;
                best = text.substr(i, j - i);
                while (!best.empty() && (best.back() == '.' || best.back() == ',')) best.pop_back();
                i = j;
            } else {
                ++i;
            }
        }
        if (!best.empty()) return normalize_answer(best);
        // fall back to the last token
        std::istringstream in(text);
        std::string tok, last;
        while (in >> tok) last = tok;
        return normalize_answer(last);
    }

    bool correct(const std::string& completion, const std::string& normalized_gold) const {
        return extract(completion) == normalized_gold;
    }
};

}  // namespace latlab
