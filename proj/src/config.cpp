#include "attgan/config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace attgan {

ArchitectureConfig ArchitectureConfig::table_128(int attribute_count) {
    ArchitectureConfig c;
    c.resolution = 128;
    c.attribute_count = attribute_count;
    c.encoder = {{64, 4, 2}, {128, 4, 2}, {256, 4, 2}, {512, 4, 2}, {1024, 4, 2}};
    c.decoder = {{1024, 4, 2}, {512, 4, 2}, {256, 4, 2}, {128, 4, 2}, {3, 4, 2}};
    c.critic = {{64, 4, 2}, {128, 4, 2}, {256, 4, 2}, {512, 4, 2}, {1024, 4, 2}};
    c.fc_dim = 1024;
    return c;
}

ArchitectureConfig ArchitectureConfig::table_64(int attribute_count) {
    ArchitectureConfig c;
    c.resolution = 64;
    c.attribute_count = attribute_count;
    c.encoder = {{64, 5, 2}, {128, 5, 2}, {256, 5, 2}, {512, 5, 2}};
    c.decoder = {{512, 5, 2}, {256, 5, 2}, {128, 5, 2}, {64, 5, 2}, {3, 5, 1}};
    c.critic = {{64, 3, 1}, {64, 5, 2}, {128, 5, 2}, {256, 5, 2}, {512, 5, 2}, {512, 3, 1}};
    c.fc_dim = 1024;
    return c;
}

ArchitectureConfig ArchitectureConfig::synthetic(int resolution, int attribute_count) {
    if (resolution != 32 && resolution != 48)
        throw std::invalid_argument("synthetic architecture supports 32 or 48 pixel inputs");
    ArchitectureConfig c;
    c.resolution = resolution;
    c.attribute_count = attribute_count;
    c.encoder = {{64, 5, 2}, {128, 5, 2}, {256, 5, 2}};
    c.decoder = {{256, 5, 2}, {128, 5, 2}, {64, 5, 2}, {3, 5, 1}};
    c.critic = {{64, 3, 1}, {64, 5, 2}, {128, 5, 2}, {256, 5, 2}, {256, 3, 1}};
    c.fc_dim = 1024;
    return c;
}

ArchitectureConfig ArchitectureConfig::for_resolution(int resolution, int attribute_count) {
    switch (resolution) {
        case 128: return table_128(attribute_count);
        case 64: return table_64(attribute_count);
        case 32:
        case 48: return synthetic(resolution, attribute_count);
        default: throw std::invalid_argument("unsupported resolution " + std::to_string(resolution));
    }
}

ArchitectureConfig ArchitectureConfig::scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("width factor must be positive");
    auto scale = [factor](int v) { return std::max(1, static_cast<int>(std::lround(v * factor))); };
    ArchitectureConfig c = *this;
    for (auto& l : c.encoder) l.channels = scale(l.channels);
    for (std::size_t i = 0; i + 1 < c.decoder.size(); ++i) c.decoder[i].channels = scale(c.decoder[i].channels);
    for (auto& l : c.critic) l.channels = scale(l.channels);
    c.fc_dim = scale(c.fc_dim);
    return c;
}

int ArchitectureConfig::style_channels() const { return std::accumulate(style_counts.begin(), style_counts.end(), 0); }

int conv_padding(const ConvLayer& layer) { return (layer.kernel - 1) / 2; }

int deconv_output_padding(const ConvLayer& layer) {
    return layer.stride - layer.kernel + 2 * conv_padding(layer);
}

namespace {

int conv_out(int size, const ConvLayer& l) { return (size + 2 * conv_padding(l) - l.kernel) / l.stride + 1; }

void check_layer(const ConvLayer& l, const char* where) {
    if (l.channels < 1 || l.kernel < 1 || l.stride < 1)
        throw std::invalid_argument(std::string(where) + ": channels, kernel and stride must be positive");
}

}  // namespace

void ArchitectureConfig::validate() const { (void)ladder(); }

ShapeLadder ArchitectureConfig::ladder() const {
    if (resolution < 4) throw std::invalid_argument("resolution too small");
    if (attribute_count < 1) throw std::invalid_argument("attribute_count must be >= 1");
    if (encoder.empty() || decoder.empty() || critic.empty())
        throw std::invalid_argument("encoder, decoder and critic need at least one layer");
    if (fc_dim < 1) throw std::invalid_argument("fc_dim must be positive");
    if (skip_count < 0 || skip_count >= static_cast<int>(encoder.size()))
        throw std::invalid_argument("skip_count must be in [0, encoder layers)");
    if (inject_count < 1 || inject_count > static_cast<int>(decoder.size()))
        throw std::invalid_argument("inject_count must be in [1, decoder layers]");
    for (int n : style_counts)
        if (n < 1) throw std::invalid_argument("every style count must be >= 1");
    if (!style_counts.empty() && static_cast<int>(style_counts.size()) != attribute_count)
        throw std::invalid_argument("style_counts must list one entry per attribute");
    if (decoder.back().channels != 3) throw std::invalid_argument("decoder must end with 3 channels");

    ShapeLadder ladder;
    int size = resolution, ch = 3;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        check_layer(encoder[i], "encoder");
        size = conv_out(size, encoder[i]);
        ch = encoder[i].channels;
        if (size < 1) throw std::invalid_argument("encoder collapses spatial size to zero");
        ladder.encoder.push_back({"enc" + std::to_string(i), size, size, ch});
    }

    const int cond = condition_channels();
    const int enc_layers = static_cast<int>(encoder.size());
    for (std::size_t i = 0; i < decoder.size(); ++i) {
        const auto& l = decoder[i];
        check_layer(l, "decoder");
        int in_ch = ch;
        const int idx = static_cast<int>(i);
        if (idx >= 1 && idx <= skip_count) {
            const auto& skip = ladder.encoder[static_cast<std::size_t>(enc_layers - 1 - idx)];
            if (skip.height != size)
                throw std::invalid_argument("skip connection " + std::to_string(idx) + " joins " +
                                            std::to_string(skip.height) + "px encoder features with " +
                                            std::to_string(size) + "px decoder features");
            in_ch += skip.channels;
        }
        if (idx < inject_count) in_ch += cond;
        ladder.decoder_inputs.push_back({"dec" + std::to_string(i) + "_in", size, size, in_ch});
        const int op = deconv_output_padding(l);
        if (op < 0 || op >= l.stride)
            throw std::invalid_argument("decoder layer " + std::to_string(i) + " has no exact output padding");
        size *= l.stride;
        ch = l.channels;
        ladder.decoder.push_back({"dec" + std::to_string(i), size, size, ch});
    }
    if (size != resolution)
        throw std::invalid_argument("decoder output is " + std::to_string(size) + "px, expected " +
                                    std::to_string(resolution));

    size = resolution;
    for (std::size_t i = 0; i < critic.size(); ++i) {
        check_layer(critic[i], "critic");
        size = conv_out(size, critic[i]);
        if (size < 1) throw std::invalid_argument("critic collapses spatial size to zero");
        ladder.critic.push_back({"critic" + std::to_string(i), size, size, critic[i].channels});
    }
    ladder.critic_flat = size * size * critic.back().channels;
    return ladder;
}

std::string to_string(CriticNorm norm) {
    switch (norm) {
        case CriticNorm::Layer: return "layer";
        case CriticNorm::Instance: return "instance";
        case CriticNorm::None: return "none";
    }
    return "layer";
}

CriticNorm critic_norm_from_string(const std::string& text) {
    if (text == "layer") return CriticNorm::Layer;
    if (text == "instance") return CriticNorm::Instance;
    if (text == "none") return CriticNorm::None;
    throw std::invalid_argument("unknown critic normalization '" + text + "'");
}

void to_json(nlohmann::json& j, const ConvLayer& layer) { j = {layer.channels, layer.kernel, layer.stride}; }

void from_json(const nlohmann::json& j, ConvLayer& layer) {
    layer.channels = j.at(0).get<int>();
    layer.kernel = j.at(1).get<int>();
    layer.stride = j.at(2).get<int>();
}

void to_json(nlohmann::json& j, const ArchitectureConfig& c) {
    j = {{"resolution", c.resolution},
         {"encoder", c.encoder},
         {"decoder", c.decoder},
         {"critic", c.critic},
         {"fc_dim", c.fc_dim},
         {"attribute_count", c.attribute_count},
         {"skip_count", c.skip_count},
         {"inject_count", c.inject_count},
         {"style_counts", c.style_counts},
         {"critic_norm", to_string(c.critic_norm)}};
}

void from_json(const nlohmann::json& j, ArchitectureConfig& c) {
    c.resolution = j.at("resolution").get<int>();
    c.encoder = j.at("encoder").get<std::vector<ConvLayer>>();
    c.decoder = j.at("decoder").get<std::vector<ConvLayer>>();
    c.critic = j.at("critic").get<std::vector<ConvLayer>>();
    c.fc_dim = j.at("fc_dim").get<int>();
    c.attribute_count = j.at("attribute_count").get<int>();
    c.skip_count = j.at("skip_count").get<int>();
    c.inject_count = j.at("inject_count").get<int>();
    c.style_counts = j.value("style_counts", std::vector<int>{});
    c.critic_norm = critic_norm_from_string(j.value("critic_norm", std::string("layer")));
}

}  // namespace attgan
