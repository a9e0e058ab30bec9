#include <cmath>

#include <doctest.h>
#include <torch/torch.h>

#include "attgan/checkpoint.hpp"
#include "attgan/model.hpp"
#include "attgan/style.hpp"
#include "attgan/trainer.hpp"
#include "support.hpp"

using namespace attgan;
using doctest::Approx;

TEST_CASE("style draws are uniform over the categories") {
    const auto theta = sample_style_controllers({3}, 30000, 17);
    for (int k = 0; k < 3; ++k) {
        const double freq = theta.indices.eq(k).sum().item<double>() / 30000.0;
        CAPTURE(k);
        CHECK(freq >= 0.32);
        CHECK(freq <= 0.35);
    }
    CHECK(torch::equal(theta.indices, sample_style_controllers({3}, 30000, 17).indices));
    CHECK(theta.one_hot().sizes() == torch::IntArrayRef{30000, 3});
    CHECK_THROWS_AS(sample_style_controllers({3, 0}, 4, 1), std::invalid_argument);
}

TEST_CASE("fixed and uniform style conditioning") {
    const auto theta = fixed_style_controllers({3, 1, 2}, 2, {2, 0, 1});
    CHECK(torch::equal(theta.one_hot()[1], torch::tensor({0.f, 0.f, 1.f, 1.f, 0.f, 1.f})));
    CHECK_THROWS_AS(fixed_style_controllers({3}, 1, {3}), std::invalid_argument);
    CHECK_THROWS_AS(fixed_style_controllers({3}, 1, {0, 0}), std::invalid_argument);
    const auto u = uniform_style({2, 4}, 1);
    CHECK(torch::allclose(u, torch::tensor({{0.5f, 0.5f, 0.25f, 0.25f, 0.25f, 0.25f}})));
}

TEST_CASE("mutual information loss matches hand values") {
    StylePrediction p;
    p.probabilities = {torch::tensor({{0.9, 0.05, 0.05}}, torch::kDouble), torch::tensor({{0.4, 0.6}}, torch::kDouble)};
    StyleControllers theta{{3, 2}, torch::tensor({{0L, 1L}})};
    CHECK(mutual_information_loss(p, theta).item<double>() == Approx(0.6161861394238171).epsilon(1e-9));

    StylePrediction uniform;
    uniform.probabilities = {torch::full({4, 3}, 1.0 / 3.0, torch::kDouble)};
    StyleControllers t3{{3}, torch::tensor({0L, 1L, 2L, 0L}).unsqueeze(1)};
    CHECK(mutual_information_loss(uniform, t3).item<double>() == Approx(1.0986122886681098).epsilon(1e-9));

    StylePrediction saturated;
    saturated.probabilities = {torch::tensor({{1.0, 0.0, 0.0}}, torch::kDouble)};
    StyleControllers t0{{3}, torch::tensor({{0L}})};
    CHECK(mutual_information_loss(saturated, t0).item<double>() == Approx(1.0000000494736474e-07).epsilon(1e-6));
    StyleControllers miss{{3}, torch::tensor({{1L}})};
    CHECK(mutual_information_loss(saturated, miss).item<double>() == Approx(16.11809565095832).epsilon(1e-9));
    CHECK(style_recovery_accuracy(saturated, t0) == 1.0);
    CHECK(style_recovery_accuracy(saturated, miss) == 0.0);
}

TEST_CASE("style logits split per attribute") {
    const auto logits = torch::zeros({2, 5});
    const auto p = style_probabilities(logits, {3, 2});
    REQUIRE(p.probabilities.size() == 2);
    CHECK(torch::allclose(p.probabilities[1], torch::full({2, 2}, 0.5)));
    CHECK_THROWS_AS(style_probabilities(logits, {3, 3}), std::invalid_argument);
}

TEST_CASE("zero style head weights give uniform predictions") {
    auto config = test::tiny_config(2);
    config.style_counts = {3, 1};
    AttGAN model(config, {"Eyeglasses", "Bangs"}, 4);
    {
        torch::NoGradGuard g;
        model.critic()->style_out->weight.zero_();
        model.critic()->style_out->bias.zero_();
    }
    model.eval();
    const auto probs = model.predict_style(torch::randn({5, 3, 8, 8}));
    REQUIRE(probs.size() == 2);
    CHECK(torch::allclose(probs[0], torch::full({5, 3}, 1.0 / 3.0)));
    CHECK(torch::allclose(probs[1], torch::ones({5, 1})));
}

TEST_CASE("style conditioning widens the decoder input") {
    auto config = test::tiny_config(2);
    config.style_counts = {3, 2};
    CHECK(config.condition_channels() == 7);
    AttGAN model(config, {"Eyeglasses", "Bangs"}, 1);
    model.eval();
    torch::NoGradGuard g;
    const auto x = torch::randn({2, 3, 8, 8});
    const auto z = model.encode(x);
    const auto a = torch::tensor({{1.f, 0.f}, {0.f, 1.f}});
    const auto uniform = model.decode(z, a);
    CHECK(torch::equal(uniform, model.decode_with_style(z, uniform_style({3, 2}, 2), a)));
    const auto styled = model.decode_with_style(z, fixed_style_controllers({3, 2}, 2, {2, 0}).one_hot(), a);
    CHECK_FALSE(torch::equal(uniform, styled));
}

TEST_CASE("the info weight is inert when the extension is disabled") {
    const auto data = test::synthetic_set(64, 5, 32);
    auto small = [&](double info) {
        auto arch = ArchitectureConfig::synthetic(32, 4).scaled(0.125);
        TrainConfig c;
        c.batch_size = 8;
        c.critic_steps = 2;
        c.max_steps = 6;
        c.seed = 3;
        c.weights.info = info;
        Trainer t(AttGAN(arch, data.names, 2), c);
        const auto log = t.run(data);
        return std::make_pair(t.model().checksum(ParamGroup::All), log);
    };
    const auto base = small(1.0);
    const auto other = small(50.0);
    CHECK(base.first == other.first);
    CHECK((base.second == other.second));
}

TEST_CASE("archive serialization round trip") {
    Archive a;
    a.metadata = {{"kind", "test"}, {"n", 3}};
    a.tensors = {{"f", torch::randn({2, 3})},
                 {"d", torch::randn({4}, torch::kDouble)},
                 {"i", torch::arange(5, torch::kLong)},
                 {"u", torch::full({2}, 7, torch::kUInt8)},
                 {"s", torch::tensor(1.5f)}};
    const auto bytes = serialize_archive(a);
    const auto b = parse_archive(bytes);
    CHECK(b.metadata == a.metadata);
    REQUIRE(b.tensors.size() == a.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        CHECK(b.tensors[i].first == a.tensors[i].first);
        CHECK(torch::equal(b.tensors[i].second, a.tensors[i].second));
    }
    CHECK(checkpoint_id(bytes) == checkpoint_id(serialize_archive(b)));
    CHECK_THROWS_AS(parse_archive("garbage"), CheckpointError);
    CHECK_THROWS_AS(parse_archive(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(parse_archive(bytes + "x"), CheckpointError);
    CHECK_THROWS_AS(b.tensor("missing"), CheckpointError);
}

TEST_CASE("model checkpoints restore identical outputs") {
    test::TempDir dir("ckpt");
    auto config = test::tiny_config(3);
    config.style_counts = {2, 1, 1};
    AttGAN model(config, {"A", "B", "C"}, 8);
    save_model(dir / "m.ckpt", model);
    const auto back = load_model(dir / "m.ckpt");
    CHECK(back.config() == model.config());
    CHECK(back.attribute_names() == model.attribute_names());
    CHECK(back.checksum(ParamGroup::All) == model.checksum(ParamGroup::All));
    model.eval();
    const auto x = torch::randn({2, 3, 8, 8});
    const auto b = torch::tensor({{1.f, 0.f, 1.f}, {0.f, 0.f, 1.f}});
    torch::NoGradGuard g;
    CHECK(torch::equal(model.edit(x, b), back.edit(x, b)));
    CHECK_THROWS_AS(load_model(dir / "nope.ckpt"), CheckpointError);
    Archive other;
    other.metadata = {{"kind", "judge"}};
    CHECK_THROWS_AS(model_from_archive(other), CheckpointError);
}

TEST_CASE("clone is independent of the original") {
    AttGAN model(test::tiny_config(2), {"A", "B"}, 1);
    auto copy = model.clone();
    CHECK(copy.checksum(ParamGroup::All) == model.checksum(ParamGroup::All));
    {
        torch::NoGradGuard g;
        copy.parameters(ParamGroup::Generator)[0].add_(1.0);
    }
    CHECK(copy.checksum(ParamGroup::Generator) != model.checksum(ParamGroup::Generator));
    CHECK(copy.checksum(ParamGroup::Critic) == model.checksum(ParamGroup::Critic));
}
