#include "attgan/attributes.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "attgan/seed.hpp"

namespace attgan {

const std::vector<std::string>& default_attribute_names() {
    static const std::vector<std::string> names = {
        "Bald",      "Bangs",    "Black_Hair",          "Blond_Hair", "Brown_Hair",
        "Bushy_Eyebrows", "Eyeglasses", "Male", "Mouth_Slightly_Open", "Mustache",
        "No_Beard",  "Pale_Skin", "Young"};
    return names;
}

AttributeVector::AttributeVector(std::vector<std::string> names, std::vector<float> values)
    : names_(std::move(names)), values_(std::move(values)) {
    if (names_.size() != values_.size())
        throw std::invalid_argument("AttributeVector: " + std::to_string(names_.size()) + " names but " +
                                    std::to_string(values_.size()) + " values");
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!(values_[i] >= 0.0f && values_[i] <= 1.0f))
            throw std::invalid_argument("AttributeVector: value of '" + names_[i] + "' outside [0,1]");
}

float AttributeVector::value(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("unknown attribute '" + name + "'");
    return values_[static_cast<std::size_t>(it - names_.begin())];
}

void AttributeVector::set(const std::string& name, float value) {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("unknown attribute '" + name + "'");
    if (!(value >= 0.0f && value <= 1.0f))
        throw std::invalid_argument("value of '" + name + "' outside [0,1]");
    values_[static_cast<std::size_t>(it - names_.begin())] = value;
}

bool AttributeVector::is_binary() const {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + text + "'");
}

Split split_of(const std::string& id, std::uint64_t seed) {
    const auto bucket = mix_seed(fnv1a(id), seed) % 100;
    if (bucket < 80) return Split::Train;
    if (bucket < 90) return Split::Val;
    return Split::Test;
}

DatasetManifest DatasetManifest::restrict_to(Split which, std::uint64_t seed) const {
    DatasetManifest out;
    out.names = names;
    out.split = which;
    out.source = source;
    for (const auto& r : records)
        if (split_of(r.id, seed) == which) out.records.push_back(r);
    return out;
}

void DatasetManifest::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw std::invalid_argument("duplicate id '" + r.id + "' in manifest");
        if (r.labels.size() != names.size())
            throw std::invalid_argument("record '" + r.id + "' has wrong label count");
    }
}

AnnotationError::AnnotationError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
}

}  // namespace

DatasetManifest parse_attribute_annotations(std::istream& in, const std::vector<std::string>& selected_names) {
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line)) throw AnnotationError(1, "missing record count");
    ++lineno;
    auto count_tokens = split_ws(line);
    std::size_t expected = 0;
    if (count_tokens.size() != 1) throw AnnotationError(lineno, "malformed count line '" + line + "'");
    {
        const auto& t = count_tokens.front();
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), expected);
        if (ec != std::errc() || ptr != t.data() + t.size())
            throw AnnotationError(lineno, "malformed count line '" + line + "'");
    }

    if (!std::getline(in, line)) throw AnnotationError(2, "missing attribute header");
    ++lineno;
    const auto header = split_ws(line);
    if (header.empty()) throw AnnotationError(lineno, "empty attribute header");

    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);

    DatasetManifest manifest;
    manifest.names = selected_names.empty() ? header : selected_names;
    std::vector<std::size_t> pick;
    for (const auto& name : manifest.names) {
        auto it = column.find(name);
        if (it == column.end()) throw AnnotationError(2, "unknown selected attribute '" + name + "'");
        pick.push_back(it->second);
    }

    std::unordered_set<std::string> seen;
    std::vector<float> row(header.size());
    while (std::getline(in, line)) {
        ++lineno;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != header.size() + 1)
            throw AnnotationError(lineno, "expected " + std::to_string(header.size()) + " attribute tokens, got " +
                                              std::to_string(tokens.size() - 1));
        for (std::size_t i = 0; i < header.size(); ++i) {
            const auto& t = tokens[i + 1];
            if (t == "1")
                row[i] = 1.0f;
            else if (t == "-1")
                row[i] = 0.0f;
            else
                throw AnnotationError(lineno, "token '" + t + "' is not -1 or 1");
        }
        if (!seen.insert(tokens.front()).second)
            throw AnnotationError(lineno, "duplicate id '" + tokens.front() + "'");
        AttributeRecord rec{tokens.front(), {}};
        rec.labels.reserve(pick.size());
        for (auto c : pick) rec.labels.push_back(row[c]);
        manifest.records.push_back(std::move(rec));
    }
    if (manifest.records.size() != expected)
        throw AnnotationError(1, "count line says " + std::to_string(expected) + " records, found " +
                                     std::to_string(manifest.records.size()));
    return manifest;
}

std::string format_attribute_annotations(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << manifest.records.size() << '\n';
    for (std::size_t i = 0; i < manifest.names.size(); ++i) out << (i ? " " : "") << manifest.names[i];
    out << '\n';
    for (const auto& r : manifest.records) {
        out << r.id;
        for (float v : r.labels) out << (v >= 0.5f ? "  1" : " -1");
        out << '\n';
    }
    return out.str();
}

std::vector<std::int64_t> target_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::int64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

}  // namespace attgan
