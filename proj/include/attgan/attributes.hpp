#pragma once

#include <cstdint>
#include <istream>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace attgan {

/// Thirteen CelebA attributes used by the reference models, in model order.
const std::vector<std::string>& default_attribute_names();

/// Ordered attribute labels of one image. Dataset labels are exactly 0 or 1;
/// inference targets may take any value in [0,1].
class AttributeVector {
public:
    AttributeVector() = default;
    AttributeVector(std::vector<std::string> names, std::vector<float> values);

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<float>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    float operator[](std::size_t i) const { return values_[i]; }

    float value(const std::string& name) const;
    void set(const std::string& name, float value);
    bool is_binary() const;

    friend bool operator==(const AttributeVector&, const AttributeVector&) = default;

private:
    std::vector<std::string> names_;
    std::vector<float> values_;
};

enum class Split { Train, Val, Test };

const char* to_string(Split split);
Split split_from_string(const std::string& text);

/// Hash-of-id split assignment (80/10/10); stable across machines for a given seed.
Split split_of(const std::string& id, std::uint64_t seed = 0);

struct AttributeRecord {
    std::string id;
    std::vector<float> labels;

    friend bool operator==(const AttributeRecord&, const AttributeRecord&) = default;
};

struct DatasetManifest {
    std::vector<std::string> names;
    std::vector<AttributeRecord> records;
    Split split = Split::Train;
    std::string source;

    AttributeVector attributes(std::size_t row) const { return {names, records.at(row).labels}; }
    /// Records whose hash split equals `which`.
    DatasetManifest restrict_to(Split which, std::uint64_t seed = 0) const;
    void validate() const;
};

class AnnotationError : public std::runtime_error {
public:
    AnnotationError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parses the CelebA `list_attr_celeba.txt` layout: a record count, a header of
/// attribute names, then `<id> ±1 ±1 ...` rows. Returns the selected columns in
/// the requested order with -1 mapped to 0. An empty selection keeps every column.
DatasetManifest parse_attribute_annotations(std::istream& in,
                                            const std::vector<std::string>& selected_names = {});

/// Inverse of parse_attribute_annotations.
std::string format_attribute_annotations(const DatasetManifest& manifest);

/// A uniformly random permutation of [0, n), deterministic under seed.
std::vector<std::int64_t> target_permutation(std::size_t n, std::uint64_t seed);

/// Realises b ~ p_attr by permuting the real attribute vectors of a batch.
template <class T>
std::vector<T> sample_target_attributes(std::span<const T> batch, std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("sample_target_attributes: empty batch");
    for (const auto& v : batch)
        if (v.size() != batch.front().size())
            throw std::invalid_argument("sample_target_attributes: vectors differ in length");
    std::vector<T> out;
    out.reserve(batch.size());
    for (auto i : target_permutation(batch.size(), seed)) out.push_back(batch[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace attgan
