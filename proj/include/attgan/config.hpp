#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace attgan {

/// Conv(d,k,s) / DeConv(d,k,s): output channels, kernel size, stride.
struct ConvLayer {
    int channels = 0;
    int kernel = 4;
    int stride = 2;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

enum class CriticNorm { Layer, Instance, None };

/// Spatial size and channel count of one tensor on the forward path.
struct LayerShape {
    std::string name;
    int height = 0;
    int width = 0;
    int channels = 0;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct ShapeLadder {
    std::vector<LayerShape> encoder;        // outputs of each encoder layer
    std::vector<LayerShape> decoder_inputs; // after skip / condition concatenation
    std::vector<LayerShape> decoder;        // outputs of each decoder layer
    std::vector<LayerShape> critic;         // outputs of each trunk layer
    int critic_flat = 0;                    // trunk features fed to the FC heads
};

struct ArchitectureConfig {
    int resolution = 128;
    std::vector<ConvLayer> encoder;
    std::vector<ConvLayer> decoder;
    std::vector<ConvLayer> critic;
    int fc_dim = 1024;
    int attribute_count = 13;
    /// Encoder->decoder concatenations, counted from the bottleneck outward.
    int skip_count = 1;
    /// Decoder layers (from the bottleneck) that receive the tiled condition planes.
    int inject_count = 1;
    /// Styles per attribute; empty disables the style extension.
    std::vector<int> style_counts;
    CriticNorm critic_norm = CriticNorm::Layer;

    /// Five Conv(*,4,2) stages ending in a 4x4x1024 bottleneck.
    static ArchitectureConfig table_128(int attribute_count = 13);
    /// Four Conv(*,5,2) stages ending in a 4x4x512 bottleneck.
    static ArchitectureConfig table_64(int attribute_count = 13);
    /// The 64x64 pattern with one stride-2 stage removed (32 and 48 pixel inputs).
    static ArchitectureConfig synthetic(int resolution, int attribute_count);
    static ArchitectureConfig for_resolution(int resolution, int attribute_count);

    /// Multiplies every hidden width (conv channels and FC size) by `factor`.
    ArchitectureConfig scaled(double factor) const;

    bool style_enabled() const { return !style_counts.empty(); }
    int style_channels() const;
    /// Width of the conditioning vector tiled into the decoder: n + sum(n_i).
    int condition_channels() const { return attribute_count + style_channels(); }

    /// Throws std::invalid_argument when the layer stack is inconsistent.
    void validate() const;
    ShapeLadder ladder() const;

    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

int conv_padding(const ConvLayer& layer);
int deconv_output_padding(const ConvLayer& layer);

void to_json(nlohmann::json& j, const ConvLayer& layer);
void from_json(const nlohmann::json& j, ConvLayer& layer);
void to_json(nlohmann::json& j, const ArchitectureConfig& config);
void from_json(const nlohmann::json& j, ArchitectureConfig& config);

std::string to_string(CriticNorm norm);
CriticNorm critic_norm_from_string(const std::string& text);

}  // namespace attgan
