#include "attgan/model.hpp"

#include <stdexcept>

#include "attgan/seed.hpp"
#include "attgan/style.hpp"

namespace attgan {

AttGAN::AttGAN(ArchitectureConfig config, std::vector<std::string> attribute_names, std::uint64_t seed)
    : config_(std::move(config)), names_(std::move(attribute_names)) {
    if (static_cast<int>(names_.size()) != config_.attribute_count)
        throw std::invalid_argument("model has " + std::to_string(config_.attribute_count) + " attributes but " +
                                    std::to_string(names_.size()) + " names");
    config_.validate();
    encoder_ = Encoder(config_);
    decoder_ = Decoder(config_);
    critic_ = Critic(config_);
    initialize_weights(*encoder_, mix_seed(seed, 1));
    initialize_weights(*decoder_, mix_seed(seed, 2));
    initialize_weights(*critic_, mix_seed(seed, 3));
}

void AttGAN::check_images(const torch::Tensor& images) const {
    if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != config_.resolution ||
        images.size(3) != config_.resolution)
        throw std::invalid_argument("expected images of shape [B,3," + std::to_string(config_.resolution) + "," +
                                    std::to_string(config_.resolution) + "], got " + c10::str(images.sizes()));
}

torch::Tensor AttGAN::condition(const torch::Tensor& attributes, const torch::Tensor& style) const {
    if (attributes.dim() != 2 || attributes.size(1) != config_.attribute_count)
        throw std::invalid_argument("expected [B," + std::to_string(config_.attribute_count) +
                                    "] attributes, got " + c10::str(attributes.sizes()));
    auto planes = attributes * 2.0 - 1.0;
    if (!config_.style_enabled()) return planes;
    return torch::cat({planes, style.to(planes.dtype())}, 1);
}

LatentCode AttGAN::encode(const torch::Tensor& images) const {
    check_images(images);
    auto features = encoder_.ptr()->forward(images);
    LatentCode z;
    z.bottleneck = features.back();
    const int last = static_cast<int>(features.size()) - 1;
    for (int k = 0; k < config_.skip_count; ++k) z.skips.push_back(features[static_cast<std::size_t>(last - 1 - k)]);
    return z;
}

torch::Tensor AttGAN::decode(const LatentCode& z, const torch::Tensor& attributes) const {
    torch::Tensor style;
    if (config_.style_enabled())
        style = uniform_style(config_.style_counts, attributes.size(0)).to(attributes.dtype());
    return decoder_.ptr()->forward(z, condition(attributes, style));
}

torch::Tensor AttGAN::decode_with_style(const LatentCode& z, const torch::Tensor& style_one_hot,
                                        const torch::Tensor& attributes) const {
    if (!config_.style_enabled()) throw std::logic_error("decode_with_style: style extension disabled");
    if (style_one_hot.dim() != 2 || style_one_hot.size(1) != config_.style_channels() ||
        style_one_hot.size(0) != attributes.size(0))
        throw std::invalid_argument("style controllers do not match the model's style configuration");
    return decoder_.ptr()->forward(z, condition(attributes, style_one_hot));
}

torch::Tensor AttGAN::edit(const torch::Tensor& images, const torch::Tensor& attributes) const {
    return decode(encode(images), attributes);
}

torch::Tensor AttGAN::discriminate(const torch::Tensor& images) const {
    check_images(images);
    return critic_.ptr()->score_head(critic_.ptr()->trunk(images));
}

torch::Tensor AttGAN::classify_attributes(const torch::Tensor& images) const {
    check_images(images);
    return critic_.ptr()->attribute_head(critic_.ptr()->trunk(images));
}

std::vector<torch::Tensor> AttGAN::predict_style(const torch::Tensor& images) const {
    if (!config_.style_enabled()) throw std::logic_error("predict_style: style extension disabled");
    check_images(images);
    return style_probabilities(critic_.ptr()->style_head(critic_.ptr()->trunk(images)), config_.style_counts).probabilities;
}

CriticOutputs AttGAN::critique(const torch::Tensor& images) const {
    check_images(images);
    return critic_.ptr()->forward(images);
}

void AttGAN::train(bool on) {
    encoder_->train(on);
    decoder_->train(on);
    critic_->train(on);
}

void AttGAN::to(torch::Dtype dtype) {
    // Module::to would also turn the integer batch counters into floats.
    torch::NoGradGuard no_grad;
    for (const auto& [name, t] : named_tensors())
        if (t.is_floating_point()) t.set_data(t.to(dtype));
}

torch::Dtype AttGAN::dtype() const { return encoder_->parameters().front().scalar_type(); }

void AttGAN::set_generator_stat_updates(bool on) {
    encoder_->update_stats = on;
    decoder_->update_stats = on;
}

std::vector<torch::Tensor> AttGAN::parameters(ParamGroup group) const {
    std::vector<torch::Tensor> out;
    auto append = [&out](const std::vector<torch::Tensor>& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    if (group != ParamGroup::Critic) {
        append(encoder_->parameters());
        append(decoder_->parameters());
    }
    if (group != ParamGroup::Generator) append(critic_->parameters());
    return out;
}

NamedTensors AttGAN::named_tensors() const {
    NamedTensors out;
    auto add = [&out](const std::string& prefix, const torch::nn::Module& m) {
        for (const auto& p : m.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
        for (const auto& b : m.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
    };
    add("enc.", *encoder_);
    add("dec.", *decoder_);
    add("critic.", *critic_);
    return out;
}

std::uint64_t AttGAN::checksum(ParamGroup group) const { return tensor_checksum(parameters(group)); }

AttGAN AttGAN::clone() const {
    AttGAN copy(config_, names_);
    copy.to(dtype());
    torch::NoGradGuard no_grad;
    const auto src = named_tensors();
    auto dst = copy.named_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.copy_(src[i].second);
    copy.train(is_training());
    copy.encoder_->update_stats = encoder_->update_stats;
    copy.decoder_->update_stats = decoder_->update_stats;
    return copy;
}

std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors) {
    std::uint64_t h = fnv1a("");
    for (const auto& t : tensors) {
        auto c = t.detach().contiguous();
        h = fnv1a(std::string_view(static_cast<const char*>(c.data_ptr()), c.nbytes()), h);
    }
    return h;
}

}  // namespace attgan
