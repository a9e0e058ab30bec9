#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "attgan/model.hpp"

namespace attgan {

/// Single-file container: JSON metadata plus named tensors.
///
/// Layout (all integers little-endian):
///   char[8]  magic "ATGNCKPT"
///   u32      format version (1)
///   u64      metadata byte length, followed by UTF-8 JSON
///   u64      tensor count
///   per tensor:
///     u32    name byte length, followed by the name
///     u8     dtype (0 = f32, 1 = f64, 2 = i64, 3 = u8)
///     u32    rank, followed by rank x i64 dimensions
///     u64    data byte length, followed by row-major element data
struct Archive {
    nlohmann::json metadata = nlohmann::json::object();
    NamedTensors tensors;

    const torch::Tensor& tensor(const std::string& name) const;
    bool has(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string serialize_archive(const Archive& archive);
Archive parse_archive(std::string_view bytes);
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Hex FNV-1a of the archive bytes.
std::string checkpoint_id(std::string_view bytes);

/// Metadata stored for every model: kind, architecture, attribute names.
nlohmann::json model_metadata(const AttGAN& model);
Archive model_archive(const AttGAN& model, nlohmann::json extra = nlohmann::json::object());
/// Rebuilds a model (in eval mode) from an archive written by model_archive.
AttGAN model_from_archive(const Archive& archive);

void save_model(const std::filesystem::path& path, const AttGAN& model,
                nlohmann::json extra = nlohmann::json::object());
AttGAN load_model(const std::filesystem::path& path);

/// Copies archive tensors named `prefix + name` into the matching targets.
void load_tensors(const Archive& archive, const NamedTensors& targets, const std::string& prefix = {});

}  // namespace attgan
