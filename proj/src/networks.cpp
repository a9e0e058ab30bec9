#include "attgan/networks.hpp"

#include <stdexcept>

namespace attgan {

namespace nn = torch::nn;

namespace {

constexpr double kLeak = 0.2;

torch::Tensor batch_norm(const nn::BatchNorm2d& bn, const torch::Tensor& x, bool training, bool update_stats) {
    const auto& o = bn->options;
    if (training && !update_stats)
        return torch::batch_norm(x, bn->weight, bn->bias, {}, {}, true, 0.0, o.eps(), false);
    return torch::batch_norm(x, bn->weight, bn->bias, bn->running_mean, bn->running_var, training,
                             o.momentum().value_or(0.1), o.eps(), false);
}

}  // namespace

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : eps_(eps) {
    weight = register_parameter("weight", torch::ones({channels}));
    bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
    auto mean = x.mean({1, 2, 3}, /*keepdim=*/true);
    auto var = (x - mean).pow(2).mean({1, 2, 3}, /*keepdim=*/true);
    auto y = (x - mean) / torch::sqrt(var + eps_);
    return y * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
}

EncoderImpl::EncoderImpl(const ArchitectureConfig& config) {
    config.validate();
    int64_t in = 3;
    for (std::size_t i = 0; i < config.encoder.size(); ++i) {
        const auto& l = config.encoder[i];
        convs_.push_back(register_module(
            "conv" + std::to_string(i),
            nn::Conv2d(nn::Conv2dOptions(in, l.channels, l.kernel).stride(l.stride).padding(conv_padding(l)))));
        norms_.push_back(register_module("bn" + std::to_string(i), nn::BatchNorm2d(l.channels)));
        in = l.channels;
    }
}

std::vector<torch::Tensor> EncoderImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> features;
    features.reserve(convs_.size());
    auto h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        h = batch_norm(norms_[i], convs_[i]->forward(h), is_training(), update_stats);
        h = torch::leaky_relu(h, kLeak);
        features.push_back(h);
    }
    return features;
}

DecoderImpl::DecoderImpl(const ArchitectureConfig& config) : config_(config) {
    const auto ladder = config.ladder();
    for (std::size_t i = 0; i < config.decoder.size(); ++i) {
        const auto& l = config.decoder[i];
        const int64_t in = ladder.decoder_inputs[i].channels;
        deconvs_.push_back(register_module("deconv" + std::to_string(i),
                                           nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, l.channels, l.kernel)
                                                                   .stride(l.stride)
                                                                   .padding(conv_padding(l))
                                                                   .output_padding(deconv_output_padding(l)))));
        if (i + 1 < config.decoder.size())
            norms_.push_back(register_module("bn" + std::to_string(i), nn::BatchNorm2d(l.channels)));
    }
}

torch::Tensor DecoderImpl::forward(const LatentCode& z, const torch::Tensor& condition) {
    if (condition.dim() != 2 || condition.size(1) != config_.condition_channels())
        throw std::invalid_argument("decoder condition has width " +
                                    std::to_string(condition.dim() == 2 ? condition.size(1) : -1) + ", expected " +
                                    std::to_string(config_.condition_channels()));
    if (static_cast<int>(z.skips.size()) < config_.skip_count)
        throw std::invalid_argument("latent code carries fewer skip features than the decoder expects");
    if (z.bottleneck.size(1) != config_.encoder.back().channels)
        throw std::invalid_argument("latent code does not match the decoder configuration");

    auto h = z.bottleneck;
    const std::size_t last = deconvs_.size() - 1;
    for (std::size_t i = 0; i < deconvs_.size(); ++i) {
        const int idx = static_cast<int>(i);
        std::vector<torch::Tensor> parts{h};
        if (idx >= 1 && idx <= config_.skip_count) parts.push_back(z.skips[static_cast<std::size_t>(idx - 1)]);
        if (idx < config_.inject_count) parts.push_back(tile_condition(condition, h.size(2), h.size(3)));
        h = parts.size() == 1 ? h : torch::cat(parts, 1);
        h = deconvs_[i]->forward(h);
        if (i == last) return torch::tanh(h);
        h = torch::relu(batch_norm(norms_[i], h, is_training(), update_stats));
    }
    return h;
}

CriticImpl::CriticImpl(const ArchitectureConfig& config) : has_style_(config.style_enabled()) {
    const auto ladder = config.ladder();
    int64_t in = 3;
    for (std::size_t i = 0; i < config.critic.size(); ++i) {
        const auto& l = config.critic[i];
        convs_.push_back(register_module(
            "conv" + std::to_string(i),
            nn::Conv2d(nn::Conv2dOptions(in, l.channels, l.kernel).stride(l.stride).padding(conv_padding(l)))));
        nn::AnyModule norm;
        switch (config.critic_norm) {
            case CriticNorm::Layer: norm = nn::AnyModule(LayerNorm2d(l.channels)); break;
            case CriticNorm::Instance:
                norm = nn::AnyModule(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(l.channels).affine(true)));
                break;
            case CriticNorm::None: norm = nn::AnyModule(nn::Identity()); break;
        }
        register_module("norm" + std::to_string(i), norm.ptr());
        norms_.push_back(std::move(norm));
        in = l.channels;
    }
    const int64_t flat = ladder.critic_flat;
    const bool use_ln = config.critic_norm != CriticNorm::None;
    auto head = [&](const std::string& prefix) {
        Head h = make_head(prefix, flat, config.fc_dim);
        if (!use_ln) h.norm = nullptr;
        return h;
    };
    score_ = head("d");
    score_out_ = register_module("d_out", nn::Linear(config.fc_dim, 1));
    attribute_ = head("c");
    attribute_out = register_module("c_out", nn::Linear(config.fc_dim, config.attribute_count));
    if (has_style_) {
        style_ = head("q");
        style_out = register_module("q_out", nn::Linear(config.fc_dim, config.style_channels()));
    }
}

CriticImpl::Head CriticImpl::make_head(const std::string& prefix, int64_t in, int64_t hidden) {
    Head h;
    h.fc = register_module(prefix + "_fc", nn::Linear(in, hidden));
    h.norm = register_module(prefix + "_ln", nn::LayerNorm(nn::LayerNormOptions({hidden})));
    return h;
}

torch::Tensor CriticImpl::run_head(const Head& head, const torch::Tensor& features) {
    auto h = head.fc.ptr()->forward(features);
    if (head.norm) h = head.norm.ptr()->forward(h);
    return torch::leaky_relu(h, kLeak);
}

torch::Tensor CriticImpl::trunk(const torch::Tensor& x) {
    auto h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i)
        h = torch::leaky_relu(norms_[i].forward(convs_[i]->forward(h)), kLeak);
    return h.flatten(1);
}

torch::Tensor CriticImpl::score_head(const torch::Tensor& features) {
    return score_out_->forward(run_head(score_, features)).squeeze(1);
}

torch::Tensor CriticImpl::attribute_head(const torch::Tensor& features) {
    return torch::sigmoid(attribute_out->forward(run_head(attribute_, features)));
}

torch::Tensor CriticImpl::style_head(const torch::Tensor& features) {
    if (!has_style_) throw std::logic_error("style extension disabled");
    return style_out->forward(run_head(style_, features));
}

CriticOutputs CriticImpl::forward(const torch::Tensor& x) {
    auto f = trunk(x);
    CriticOutputs out{score_head(f), attribute_head(f), {}};
    if (has_style_) out.style_logits = style_head(f);
    return out;
}

torch::Tensor tile_condition(const torch::Tensor& condition, int64_t height, int64_t width) {
    return condition.view({condition.size(0), condition.size(1), 1, 1}).expand({-1, -1, height, width});
}

torch::Tensor inject_attributes(const torch::Tensor& features, const torch::Tensor& attributes) {
    if (attributes.dim() != 2 || attributes.size(0) != features.size(0))
        throw std::invalid_argument("inject_attributes: expected [B,n] attributes matching the feature batch");
    return torch::cat({features, tile_condition(attributes * 2.0 - 1.0, features.size(2), features.size(3))}, 1);
}

void initialize_weights(nn::Module& module, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto& m : module.modules(/*include_self=*/true)) {
        if (auto* conv = m->as<nn::Conv2d>()) {
            conv->weight.normal_(0.0, 0.02, gen);
            if (conv->bias.defined()) conv->bias.zero_();
        } else if (auto* deconv = m->as<nn::ConvTranspose2d>()) {
            deconv->weight.normal_(0.0, 0.02, gen);
            if (deconv->bias.defined()) deconv->bias.zero_();
        } else if (auto* linear = m->as<nn::Linear>()) {
            linear->weight.normal_(0.0, 0.02, gen);
            if (linear->bias.defined()) linear->bias.zero_();
        }
    }
}

}  // namespace attgan
