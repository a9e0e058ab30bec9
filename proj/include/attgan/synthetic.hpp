#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/types.h>

#include "attgan/attributes.hpp"
#include "attgan/image.hpp"

namespace attgan {

/// Attribute names the procedural renderer knows how to draw:
/// Eyeglasses, Bangs, Pale_Skin, Mouth_Slightly_Open, Blond_Hair.
const std::vector<std::string>& synthetic_vocabulary();

/// Glasses palette for the style-bearing variant: dark, light, blue.
inline constexpr int kMaxGlassesStyles = 3;

struct SyntheticSpec {
    std::size_t count = 1000;
    int resolution = 32;
    std::vector<std::string> attributes = {"Eyeglasses", "Bangs", "Pale_Skin", "Mouth_Slightly_Open"};
    double marginal = 0.5;
    /// Number of unlabeled glasses colors drawn per image (1 = always dark).
    int glasses_styles = 1;

    void validate() const;
};

/// Nuisance factors of one rendered face; together with the labels they
/// determine the pixels exactly.
struct FaceParams {
    int dx = 0;
    int dy = 0;
    std::array<std::uint8_t, 3> background{};
    // Both variants of the label-driven colours are drawn so that a face can
    // be re-rendered with any label combination.
    std::array<std::uint8_t, 3> skin{};
    std::array<std::uint8_t, 3> pale_skin{};
    std::array<std::uint8_t, 3> hair{};
    std::array<std::uint8_t, 3> blond_hair{};
    int glasses_style = 0;
};

struct SyntheticDataset {
    SyntheticSpec spec;
    std::uint64_t seed = 0;
    DatasetManifest manifest;
    std::vector<FaceParams> params;
};

/// Draws labels independently per attribute with probability `spec.marginal`
/// and nuisance factors from `seed`. Bit-identical for equal (spec, seed).
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const SyntheticSpec& spec, std::uint64_t seed);
/// Inverse of to_json; returns the spec and stores the seed in `seed`.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t& seed);

/// Renders one face. `labels` follow `names` (a subset of the vocabulary).
RgbImage render_face(const FaceParams& params, const std::vector<std::string>& names,
                     const std::vector<float>& labels, int resolution);

/// Rule-based pixel probe that reads every synthetic attribute back from the
/// rendered image, robust to the renderer's position jitter.
class PixelProbe {
public:
    PixelProbe(std::vector<std::string> names, int resolution);

    std::vector<float> labels(const RgbImage& image) const;
    /// Batched version on [B,3,R,R] tensors in [-1,1]; returns [B,n] in {0,1}.
    torch::Tensor predict(const torch::Tensor& images) const;

    const std::vector<std::string>& names() const { return names_; }
    int resolution() const { return resolution_; }

private:
    struct Region {
        std::vector<std::pair<int, int>> pixels;
    };

    std::vector<std::string> names_;
    int resolution_;
    Region cheeks_, forehead_, eyes_, mouth_, hair_;
};

}  // namespace attgan
