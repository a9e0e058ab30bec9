#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "attgan/config.hpp"
#include "attgan/networks.hpp"

namespace attgan {

enum class ParamGroup { Generator, Critic, All };

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// The editing model: G_enc, G_dec and the shared D/C(/Q) critic, together
/// with the architecture and the attribute names it was built for.
/// Copies share the underlying modules; use clone() for an independent copy.
class AttGAN {
public:
    AttGAN(ArchitectureConfig config, std::vector<std::string> attribute_names, std::uint64_t seed = 0);

    const ArchitectureConfig& config() const { return config_; }
    const std::vector<std::string>& attribute_names() const { return names_; }

    LatentCode encode(const torch::Tensor& images) const;
    /// Decodes with no style choice: style blocks (if any) are uniform 1/n_i.
    torch::Tensor decode(const LatentCode& z, const torch::Tensor& attributes) const;
    torch::Tensor decode_with_style(const LatentCode& z, const torch::Tensor& style_one_hot,
                                    const torch::Tensor& attributes) const;
    /// decode(encode(x), b).
    torch::Tensor edit(const torch::Tensor& images, const torch::Tensor& attributes) const;

    torch::Tensor discriminate(const torch::Tensor& images) const;
    torch::Tensor classify_attributes(const torch::Tensor& images) const;
    /// Per-attribute softmax over the style predictor logits.
    std::vector<torch::Tensor> predict_style(const torch::Tensor& images) const;
    CriticOutputs critique(const torch::Tensor& images) const;

    Encoder& encoder() { return encoder_; }
    Decoder& decoder() { return decoder_; }
    Critic& critic() { return critic_; }
    const Critic& critic() const { return critic_; }

    void train(bool on = true);
    void eval() { train(false); }
    bool is_training() const { return encoder_->is_training(); }
    void to(torch::Dtype dtype);
    torch::Dtype dtype() const;
    /// Suspends batch-norm running-stat updates in the generator while training.
    void set_generator_stat_updates(bool on);

    std::vector<torch::Tensor> parameters(ParamGroup group) const;
    /// Parameters and buffers with stable prefixed names (enc., dec., critic.).
    NamedTensors named_tensors() const;
    /// FNV-1a over the raw bytes of every parameter in the group.
    std::uint64_t checksum(ParamGroup group) const;

    AttGAN clone() const;

private:
    void check_images(const torch::Tensor& images) const;
    torch::Tensor condition(const torch::Tensor& attributes, const torch::Tensor& style) const;

    ArchitectureConfig config_;
    std::vector<std::string> names_;
    Encoder encoder_{nullptr};
    Decoder decoder_{nullptr};
    Critic critic_{nullptr};
};

/// FNV-1a over the raw bytes of the given tensors.
std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace attgan
