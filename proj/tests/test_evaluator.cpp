#include <set>

#include <doctest.h>
#include <torch/torch.h>

#include "attgan/evaluator.hpp"
#include "support.hpp"

using namespace attgan;
using doctest::Approx;

namespace {

const ImageDataset& test_faces() {
    static const auto data = test::synthetic_set(300, 41).split(Split::Test, 0);
    return data;
}

}  // namespace

TEST_CASE("identity editor never flips an attribute") {
    const auto& data = test_faces();
    REQUIRE(data.size() > 10);
    ProbeJudge judge(data.names, 32);
    IdentityEditor editor;
    for (int i = 0; i < 4; ++i) {
        const auto s = evaluate_attribute(editor, data, i, judge);
        CAPTURE(i);
        CHECK(s.accuracy <= 0.01);
        CHECK(s.preservation_error == 0.0);
    }
}

TEST_CASE("oracle editor scores perfectly") {
    const auto& data = test_faces();
    ProbeJudge judge(data.names, 32);
    OracleEditor editor;
    const auto report = evaluate(editor, data, judge);
    CHECK(report.samples == data.size());
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(report.accuracy[i] >= 0.99);
        CHECK(report.preservation_error[i] <= 0.01);
    }
    CHECK(report.mean_accuracy >= 0.99);
    const auto j = report.to_json();
    CHECK(j.contains("mean_accuracy"));
    CHECK(report.to_csv().starts_with("attribute,accuracy,preservation_error\n"));
    CHECK(report.to_table().find("Eyeglasses") != std::string::npos);
    CHECK(editing_accuracy(editor, data, 0, judge) == report.accuracy[0]);
    CHECK(preservation_error(editor, data, 0, judge) == report.preservation_error[0]);
}

TEST_CASE("oracle editor requires render parameters") {
    auto data = test_faces();
    data.synthetic.clear();
    ProbeJudge judge(data.names, 32);
    CHECK_THROWS(evaluate(OracleEditor{}, data, judge));
}

TEST_CASE("spearman with ties") {
    CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == Approx(0.8));
    CHECK(spearman({1, 2, 3, 4, 5}, {2, 2, 3, 3, 9}) == Approx(0.9486832980505138).epsilon(1e-12));
    CHECK(spearman({0, .25, .5, .75, 1}, {.1, .1, .2, .9, .9}) == Approx(0.9486832980505138).epsilon(1e-12));
    CHECK(spearman({1, 2, 3}, {3, 2, 1}) == Approx(-1.0));
    CHECK(spearman({1, 2, 3}, {5, 5, 5}) == 0.0);
    CHECK_THROWS_AS(spearman({1}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("a two point sweep reproduces the endpoint edits") {
    const auto& data = test_faces();
    AttGAN model(ArchitectureConfig::synthetic(32, 4).scaled(0.125), data.names, 3);
    model.eval();
    ProbeJudge judge(data.names, 32);
    const auto image = data.images[0];
    const auto labels = data.labels[0];
    const auto sweep = intensity_sweep(model, image, labels, 1, 2, judge);
    REQUIRE(sweep.size() == 2);
    torch::NoGradGuard g;
    for (int k = 0; k < 2; ++k) {
        auto b = labels.clone().unsqueeze(0);
        b[0][1] = static_cast<float>(k);
        CHECK(sweep[k].value == k);
        CHECK(torch::equal(sweep[k].image, model.edit(image.unsqueeze(0), b)[0]));
    }
    CHECK_THROWS_AS(intensity_sweep(model, image, labels, 1, 1, judge), std::invalid_argument);
    CHECK_THROWS_AS(intensity_scores(model, data.images.slice(0, 0, 2), data.labels.slice(0, 0, 2), 1, 0, judge),
                    std::invalid_argument);
    const auto scores = intensity_scores(model, data.images.slice(0, 0, 3), data.labels.slice(0, 0, 3), 1, 5, judge);
    CHECK(scores.sizes() == torch::IntArrayRef{3, 5});
    CHECK(scores[0][0].item<double>() == sweep[0].score);
}

TEST_CASE("independent judge learns synthetic attributes") {
    const auto data = test::synthetic_set(1200, 77);
    JudgeTrainConfig c;
    c.epochs = 4;
    c.seed = 1;
    const auto trained = train_independent_classifier(data.split(Split::Train), data.split(Split::Val), c);
    REQUIRE(trained.heldout_accuracy.size() == 4);
    for (double a : trained.heldout_accuracy) CHECK(a >= 0.9);

    test::TempDir dir("judge");
    trained.judge->save(dir / "judge.ckpt");
    const auto loaded = ClassifierJudge::load(dir / "judge.ckpt");
    const auto x = data.images.slice(0, 0, 8);
    CHECK(torch::equal(loaded.probabilities(x), trained.judge->probabilities(x)));
    CHECK(loaded.names() == data.names);
}

TEST_CASE("judge shares no tensors with the editing model") {
    AttGAN model(ArchitectureConfig::synthetic(32, 4), {"a", "b", "c", "d"}, 0);
    ClassifierJudge judge({"a", "b", "c", "d"}, 32, 0);
    std::set<const void*> storages;
    for (const auto& [name, t] : model.named_tensors()) storages.insert(t.storage().data());
    for (const auto& [name, t] : judge.named_tensors()) CHECK(storages.count(t.storage().data()) == 0);
}

TEST_CASE("single class attributes are rejected") {
    auto data = test::synthetic_set(100, 3);
    data.labels = data.labels.clone();
    data.labels.select(1, 2).fill_(1.0f);
    JudgeTrainConfig c;
    c.epochs = 1;
    CHECK_THROWS_AS(train_independent_classifier(data, data, c), DegenerateDataset);
}

TEST_CASE("judge accuracy of the probe is perfect on clean faces") {
    const auto& data = test_faces();
    ProbeJudge judge(data.names, 32);
    for (double a : judge_accuracy(judge, data)) CHECK(a == 1.0);
}
