#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "attgan/config.hpp"

namespace attgan {

/// Encoder output: the bottleneck z plus the feature maps kept for skip
/// connections, ordered from the bottleneck outward.
struct LatentCode {
    torch::Tensor bottleneck;
    std::vector<torch::Tensor> skips;
};

/// Per-sample normalization over (C,H,W) with per-channel affine parameters.
class LayerNorm2dImpl : public torch::nn::Module {
public:
    explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-5);
    torch::Tensor forward(const torch::Tensor& x);

    torch::Tensor weight, bias;

private:
    double eps_;
};
TORCH_MODULE(LayerNorm2d);

/// Conv / transposed-conv stack with batch normalization whose running-stat
/// updates can be suspended while the module stays in training mode.
class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(const ArchitectureConfig& config);
    /// Outputs of every layer, input-side first.
    std::vector<torch::Tensor> forward(const torch::Tensor& x);

    bool update_stats = true;

private:
    std::vector<torch::nn::Conv2d> convs_;
    std::vector<torch::nn::BatchNorm2d> norms_;
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const ArchitectureConfig& config);
    /// `condition` is the [B,c] vector tiled into the first inject_count layers.
    torch::Tensor forward(const LatentCode& z, const torch::Tensor& condition);

    bool update_stats = true;

private:
    ArchitectureConfig config_;
    std::vector<torch::nn::ConvTranspose2d> deconvs_;
    std::vector<torch::nn::BatchNorm2d> norms_;
};
TORCH_MODULE(Decoder);

struct CriticOutputs {
    torch::Tensor score;        // [B] unbounded critic value
    torch::Tensor attributes;   // [B,n] probabilities
    torch::Tensor style_logits; // [B,sum n_i] (undefined without the style extension)
};

/// Shared convolutional trunk with a WGAN critic head (D), an attribute
/// classifier head (C), and optionally a style predictor head (Q).
class CriticImpl : public torch::nn::Module {
public:
    explicit CriticImpl(const ArchitectureConfig& config);

    torch::Tensor trunk(const torch::Tensor& x);
    torch::Tensor score_head(const torch::Tensor& features);
    torch::Tensor attribute_head(const torch::Tensor& features);
    torch::Tensor style_head(const torch::Tensor& features);
    CriticOutputs forward(const torch::Tensor& x);

    torch::nn::Linear attribute_out{nullptr};
    torch::nn::Linear style_out{nullptr};

private:
    struct Head {
        torch::nn::Linear fc{nullptr};
        torch::nn::LayerNorm norm{nullptr};
    };
    Head make_head(const std::string& prefix, int64_t in, int64_t hidden);
    torch::Tensor run_head(const Head& head, const torch::Tensor& features);

    std::vector<torch::nn::Conv2d> convs_;
    std::vector<torch::nn::AnyModule> norms_;
    Head score_, attribute_, style_;
    torch::nn::Linear score_out_{nullptr};
    bool has_style_ = false;
};
TORCH_MODULE(Critic);

/// Tiles a [B,c] conditioning vector to [B,c,h,w].
torch::Tensor tile_condition(const torch::Tensor& condition, int64_t height, int64_t width);

/// Rescales b to 2b-1, tiles it to the feature map size and concatenates along channels.
torch::Tensor inject_attributes(const torch::Tensor& features, const torch::Tensor& attributes);

/// Zero-mean Gaussian (std 0.02) conv/deconv/linear weights, zero biases, unit norm gains.
void initialize_weights(torch::nn::Module& module, std::uint64_t seed);

}  // namespace attgan
