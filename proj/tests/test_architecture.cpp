#include <doctest.h>
#include <torch/torch.h>

#include "attgan/model.hpp"
#include "support.hpp"

using namespace attgan;

namespace {

struct Hwc {
    int h, w, c;
    friend bool operator==(const Hwc&, const Hwc&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Hwc& d) {
        return os << d.h << 'x' << d.w << 'x' << d.c;
    }
};

using Dims = std::vector<Hwc>;

Dims dims(const std::vector<LayerShape>& shapes) {
    Dims out;
    for (const auto& s : shapes) out.push_back({s.height, s.width, s.channels});
    return out;
}

}  // namespace

TEST_CASE("128 pixel ladder") {
    const auto c = ArchitectureConfig::table_128(13);
    const auto l = c.ladder();
    CHECK(dims(l.encoder) == Dims{{64, 64, 64}, {32, 32, 128}, {16, 16, 256}, {8, 8, 512}, {4, 4, 1024}});
    CHECK(dims(l.decoder_inputs) == Dims{{4, 4, 1037}, {8, 8, 1536}, {16, 16, 512}, {32, 32, 256}, {64, 64, 128}});
    CHECK(dims(l.decoder) == Dims{{8, 8, 1024}, {16, 16, 512}, {32, 32, 256}, {64, 64, 128}, {128, 128, 3}});
    CHECK(dims(l.critic) == Dims{{64, 64, 64}, {32, 32, 128}, {16, 16, 256}, {8, 8, 512}, {4, 4, 1024}});
    CHECK(l.critic_flat == 4 * 4 * 1024);
    CHECK(c.fc_dim == 1024);
    for (const auto& layer : c.encoder) CHECK((layer.kernel == 4 && layer.stride == 2));
}

TEST_CASE("64 pixel ladder") {
    const auto c = ArchitectureConfig::table_64(13);
    const auto l = c.ladder();
    CHECK(dims(l.encoder) == Dims{{32, 32, 64}, {16, 16, 128}, {8, 8, 256}, {4, 4, 512}});
    CHECK(dims(l.decoder_inputs) == Dims{{4, 4, 525}, {8, 8, 768}, {16, 16, 256}, {32, 32, 128}, {64, 64, 64}});
    CHECK(dims(l.decoder) == Dims{{8, 8, 512}, {16, 16, 256}, {32, 32, 128}, {64, 64, 64}, {64, 64, 3}});
    CHECK(dims(l.critic) == Dims{{64, 64, 64}, {32, 32, 64}, {16, 16, 128}, {8, 8, 256}, {4, 4, 512}, {4, 4, 512}});
    for (const auto& layer : c.encoder) CHECK((layer.kernel == 5 && layer.stride == 2));
}

TEST_CASE("padding arithmetic") {
    CHECK(conv_padding({64, 4, 2}) == 1);
    CHECK(conv_padding({64, 5, 2}) == 2);
    CHECK(conv_padding({64, 3, 1}) == 1);
    CHECK(deconv_output_padding({64, 4, 2}) == 0);
    CHECK(deconv_output_padding({64, 5, 2}) == 1);
    CHECK(deconv_output_padding({3, 5, 1}) == 0);
}

TEST_CASE("injection and skip arithmetic") {
    auto c = ArchitectureConfig::table_128(13);
    c.inject_count = 2;
    c.skip_count = 2;
    const auto l = c.ladder();
    CHECK(l.decoder_inputs[0].channels == 1024 + 13);
    CHECK(l.decoder_inputs[1].channels == 1024 + 512 + 13);
    CHECK(l.decoder_inputs[2].channels == 512 + 256);

    c = ArchitectureConfig::table_128(13);
    c.style_counts.assign(13, 1);
    c.style_counts[1] = 3;
    CHECK(c.style_channels() == 15);
    CHECK(c.ladder().decoder_inputs[0].channels == 1024 + 13 + 15);
}

TEST_CASE("inconsistent stacks are rejected") {
    auto c = ArchitectureConfig::table_128(13);
    c.skip_count = 5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ArchitectureConfig::table_128(13);
    c.inject_count = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ArchitectureConfig::table_128(13);
    c.decoder.back().channels = 4;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ArchitectureConfig::table_128(13);
    c.decoder.pop_back();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ArchitectureConfig::table_128(13);
    c.style_counts = {3};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ArchitectureConfig::table_128(13);
    c.style_counts.assign(13, 0);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("synthetic ladders and width scaling") {
    const auto c32 = ArchitectureConfig::synthetic(32, 4);
    CHECK(c32.ladder().encoder.back().height == 4);
    const auto c48 = ArchitectureConfig::synthetic(48, 4);
    CHECK(c48.ladder().encoder.back().height == 6);
    const auto s = c32.scaled(0.25);
    CHECK(s.encoder.front().channels == 16);
    CHECK(s.fc_dim == c32.fc_dim / 4);
    CHECK(s.decoder.back().channels == 3);
    CHECK_NOTHROW(s.validate());
    CHECK_THROWS_AS(ArchitectureConfig::synthetic(40, 4), std::invalid_argument);
}

TEST_CASE("config json round trip") {
    auto c = ArchitectureConfig::table_64(5);
    c.style_counts = {1, 3, 1, 1, 2};
    c.critic_norm = CriticNorm::Instance;
    nlohmann::json j = c;
    CHECK(j.get<ArchitectureConfig>() == c);
}

TEST_CASE("network forward shapes follow the ladder") {
    torch::NoGradGuard no_grad;
    for (auto config : {ArchitectureConfig::table_64(13), ArchitectureConfig::table_128(13)}) {
        CAPTURE(config.resolution);
        AttGAN model(config, default_attribute_names(), 1);
        model.eval();
        const auto ladder = config.ladder();
        auto x = torch::zeros({1, 3, config.resolution, config.resolution});
        auto features = model.encoder()->forward(x);
        REQUIRE(features.size() == ladder.encoder.size());
        for (std::size_t i = 0; i < features.size(); ++i) {
            const auto& s = ladder.encoder[i];
            CHECK(features[i].sizes() == torch::IntArrayRef{1, s.channels, s.height, s.width});
        }
        auto out = model.edit(x, torch::ones({1, 13}));
        CHECK(out.sizes() == torch::IntArrayRef{1, 3, config.resolution, config.resolution});
        auto trunk = model.critic()->trunk(x);
        CHECK(trunk.numel() == ladder.critic_flat);
        auto crit = model.critique(x);
        CHECK(crit.score.sizes() == torch::IntArrayRef{1});
        CHECK(crit.attributes.sizes() == torch::IntArrayRef{1, 13});
    }
}
