#include "attgan/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <ATen/CPUGeneratorImpl.h>

#include "attgan/image.hpp"
#include "attgan/seed.hpp"

namespace attgan {

namespace nn = torch::nn;

torch::Tensor ProbeJudge::probabilities(const torch::Tensor& images) const {
    return probe_.predict(images.to(torch::kFloat)).to(torch::kDouble);
}

JudgeNetImpl::JudgeNetImpl(int64_t attributes, int64_t width) {
    auto conv = [](int64_t in, int64_t out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)); };
    features_ = register_module(
        "features", nn::Sequential(conv(3, width), nn::ReLU(), conv(width, width), nn::ReLU(), nn::MaxPool2d(2),
                                   conv(width, 2 * width), nn::ReLU(), nn::MaxPool2d(2), conv(2 * width, 2 * width),
                                   nn::ReLU(), nn::AdaptiveMaxPool2d(nn::AdaptiveMaxPool2dOptions(1))));
    head_ = register_module("head", nn::Linear(2 * width, attributes));
}

torch::Tensor JudgeNetImpl::forward(const torch::Tensor& x) { return head_->forward(features_->forward(x).flatten(1)); }

ClassifierJudge::ClassifierJudge(std::vector<std::string> names, int resolution, std::uint64_t seed)
    : names_(std::move(names)), resolution_(resolution) {
    if (names_.empty()) throw std::invalid_argument("judge needs at least one attribute");
    torch::manual_seed(mix_seed(seed, 0x1d6e));
    net_ = JudgeNet(static_cast<int64_t>(names_.size()));
    net_->eval();
}

torch::Tensor ClassifierJudge::probabilities(const torch::Tensor& images) const {
    torch::NoGradGuard no_grad;
    if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != resolution_ || images.size(3) != resolution_)
        throw std::invalid_argument("judge expects [B,3," + std::to_string(resolution_) + "," +
                                    std::to_string(resolution_) + "] images, got " + c10::str(images.sizes()));
    // Sigmoid in double so that confident predictions keep their order.
    return torch::sigmoid(net_.ptr()->forward(images.to(torch::kFloat)).to(torch::kDouble));
}

NamedTensors ClassifierJudge::named_tensors() const {
    NamedTensors out;
    for (const auto& item : net_->named_parameters()) out.emplace_back(item.key(), item.value());
    return out;
}

void ClassifierJudge::save(const std::filesystem::path& path) const {
    Archive a;
    a.metadata = {{"kind", "judge"}, {"attributes", names_}, {"resolution", resolution_}};
    a.tensors = named_tensors();
    write_archive(path, a);
}

ClassifierJudge ClassifierJudge::load(const std::filesystem::path& path) {
    const auto archive = read_archive(path);
    if (archive.metadata.value("kind", "") != "judge") throw CheckpointError(path.string() + " is not a judge checkpoint");
    ClassifierJudge judge(archive.metadata.at("attributes").get<std::vector<std::string>>(),
                          archive.metadata.at("resolution").get<int>());
    load_tensors(archive, judge.named_tensors());
    return judge;
}

std::vector<double> judge_accuracy(const Judge& judge, const ImageDataset& data, int batch) {
    if (data.size() == 0) throw std::invalid_argument("judge accuracy: empty dataset");
    auto correct = torch::zeros({static_cast<int64_t>(data.names.size())}, torch::kDouble);
    const auto n = static_cast<int64_t>(data.size());
    for (int64_t s = 0; s < n; s += batch) {
        const auto e = std::min(n, s + batch);
        auto pred = judge.predict(data.images.slice(0, s, e));
        correct += (pred == data.labels.slice(0, s, e)).to(torch::kDouble).sum(0);
    }
    correct /= static_cast<double>(n);
    return {correct.data_ptr<double>(), correct.data_ptr<double>() + correct.numel()};
}

JudgeTraining train_independent_classifier(const ImageDataset& train, const ImageDataset& heldout,
                                           const JudgeTrainConfig& config) {
    if (train.size() < 2) throw std::invalid_argument("judge training set needs at least two images");
    const auto positives = train.labels.sum(0);
    for (std::size_t i = 0; i < train.names.size(); ++i) {
        const auto p = positives[static_cast<int64_t>(i)].item<double>();
        if (p == 0 || p == static_cast<double>(train.size()))
            throw DegenerateDataset("attribute " + train.names[i] + " has a single class in the judge training set");
    }
    auto judge = std::make_shared<ClassifierJudge>(train.names, train.resolution(), config.seed);
    auto& net = judge->net();
    net->train();
    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(config.lr));
    auto gen = at::make_generator<at::CPUGeneratorImpl>(mix_seed(config.seed, 0x1d6f));
    const auto n = static_cast<int64_t>(train.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto order = torch::randperm(n, gen, torch::kLong);
        for (int64_t s = 0; s + 1 < n; s += config.batch_size) {
            auto rows = order.slice(0, s, std::min(n, s + config.batch_size));
            auto x = train.images.index_select(0, rows);
            if (config.noise > 0) x = x + config.noise * torch::randn(x.sizes(), gen);
            auto loss = torch::binary_cross_entropy_with_logits(net->forward(x), train.labels.index_select(0, rows));
            opt.zero_grad();
            loss.backward();
            opt.step();
        }
    }
    net->eval();
    JudgeTraining out;
    out.judge = judge;
    if (heldout.size() > 0) out.heldout_accuracy = judge_accuracy(*judge, heldout);
    return out;
}

namespace {

torch::Tensor gather_rows(const torch::Tensor& t, const std::vector<int64_t>& rows) {
    return t.index_select(0, torch::tensor(rows, torch::kLong));
}

}  // namespace

torch::Tensor ModelEditor::edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                                const torch::Tensor& targets) const {
    torch::NoGradGuard no_grad;
    const auto dtype = model_.dtype();
    return model_.edit(gather_rows(data.images, rows).to(dtype), targets.to(dtype)).to(torch::kFloat);
}

torch::Tensor IdentityEditor::edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                                   const torch::Tensor&) const {
    return gather_rows(data.images, rows);
}

torch::Tensor OracleEditor::edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                                 const torch::Tensor& targets) const {
    if (!data.is_synthetic()) throw std::invalid_argument("oracle editor needs a synthetic dataset");
    std::vector<torch::Tensor> out;
    const auto t = targets.to(torch::kFloat).contiguous();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto row = t[static_cast<int64_t>(k)];
        std::vector<float> labels(static_cast<std::size_t>(row.numel()));
        for (std::size_t j = 0; j < labels.size(); ++j)
            labels[j] = row[static_cast<int64_t>(j)].item<float>() > 0.5f ? 1.0f : 0.0f;
        const auto img = render_face(data.synthetic.at(static_cast<std::size_t>(rows[k])), data.names, labels,
                                     data.resolution());
        out.push_back(preprocess_image(img, data.resolution()));
    }
    return torch::stack(out);
}

AttributeEditScore evaluate_attribute(const Editor& editor, const ImageDataset& testset, int attribute,
                                      const Judge& judge, int batch) {
    const auto n = static_cast<int64_t>(testset.size());
    const auto n_attr = static_cast<int64_t>(testset.names.size());
    if (n == 0) throw std::invalid_argument("evaluation test set is empty");
    if (attribute < 0 || attribute >= n_attr) throw std::out_of_range("attribute index out of range");
    if (judge.names() != testset.names) throw std::invalid_argument("judge attributes differ from the test set's");
    double hits = 0, mismatches = 0;
    for (int64_t s = 0; s < n; s += batch) {
        const auto e = std::min(n, s + batch);
        std::vector<int64_t> rows(static_cast<std::size_t>(e - s));
        std::iota(rows.begin(), rows.end(), s);
        const auto a = testset.labels.slice(0, s, e);
        auto b = a.clone();
        b.select(1, attribute) = 1.0 - b.select(1, attribute);
        const auto pred = judge.predict(editor.edit(testset, rows, b));
        hits += (pred.select(1, attribute) == b.select(1, attribute)).sum().item<double>();
        auto wrong = (pred != a).to(torch::kDouble);
        wrong.select(1, attribute).zero_();
        mismatches += wrong.sum().item<double>();
    }
    AttributeEditScore score;
    score.accuracy = hits / static_cast<double>(n);
    score.preservation_error =
        n_attr > 1 ? mismatches / (static_cast<double>(n) * static_cast<double>(n_attr - 1)) : 0.0;
    return score;
}

double editing_accuracy(const Editor& editor, const ImageDataset& testset, int attribute, const Judge& judge) {
    return evaluate_attribute(editor, testset, attribute, judge).accuracy;
}

double preservation_error(const Editor& editor, const ImageDataset& testset, int attribute, const Judge& judge) {
    return evaluate_attribute(editor, testset, attribute, judge).preservation_error;
}

EvalReport evaluate(const Editor& editor, const ImageDataset& testset, const Judge& judge) {
    EvalReport r;
    r.names = testset.names;
    r.samples = testset.size();
    for (int i = 0; i < static_cast<int>(testset.names.size()); ++i) {
        const auto s = evaluate_attribute(editor, testset, i, judge);
        r.accuracy.push_back(s.accuracy);
        r.preservation_error.push_back(s.preservation_error);
    }
    const auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.mean_accuracy = mean(r.accuracy);
    r.mean_preservation_error = mean(r.preservation_error);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json attrs = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
        attrs.push_back({{"name", names[i]}, {"accuracy", accuracy[i]}, {"preservation_error", preservation_error[i]}});
    return {{"attributes", attrs},
            {"mean_accuracy", mean_accuracy},
            {"mean_preservation_error", mean_preservation_error},
            {"samples", samples}};
}

std::string EvalReport::to_table() const {
    std::size_t width = 9;
    for (const auto& n : names) width = std::max(width, n.size());
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << std::left << std::setw(static_cast<int>(width)) << "attribute" << "  accuracy  preservation_error\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        out << std::setw(static_cast<int>(width)) << names[i] << "  " << std::setw(8) << accuracy[i] << "  "
            << preservation_error[i] << '\n';
    out << std::setw(static_cast<int>(width)) << "mean" << "  " << std::setw(8) << mean_accuracy << "  "
        << mean_preservation_error << '\n';
    out << "samples: " << samples << '\n';
    return out.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "attribute,accuracy,preservation_error\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        out << names[i] << ',' << accuracy[i] << ',' << preservation_error[i] << '\n';
    return out.str();
}

namespace {

torch::Tensor sweep_values(int steps) {
    if (steps < 2) throw std::invalid_argument("intensity sweep needs at least 2 steps");
    return torch::linspace(0.0, 1.0, steps, torch::kDouble);
}

}  // namespace

torch::Tensor intensity_scores(const AttGAN& model, const torch::Tensor& images, const torch::Tensor& labels,
                               int attribute, int steps, const Judge& judge) {
    const auto values = sweep_values(steps);
    if (attribute < 0 || attribute >= labels.size(1)) throw std::out_of_range("attribute index out of range");
    torch::NoGradGuard no_grad;
    const auto dtype = model.dtype();
    const auto z = model.encode(images.to(dtype));
    std::vector<torch::Tensor> columns;
    for (int k = 0; k < steps; ++k) {
        auto b = labels.to(dtype).clone();
        b.select(1, attribute).fill_(values[k].item<double>());
        columns.push_back(judge.probabilities(model.decode(z, b).to(torch::kFloat)).select(1, attribute));
    }
    return torch::stack(columns, 1);
}

std::vector<SweepPoint> intensity_sweep(const AttGAN& model, const torch::Tensor& image, const torch::Tensor& labels,
                                        int attribute, int steps, const Judge& judge) {
    const auto values = sweep_values(steps);
    torch::NoGradGuard no_grad;
    const auto dtype = model.dtype();
    std::vector<SweepPoint> out;
    for (int k = 0; k < steps; ++k) {
        auto b = labels.to(dtype).reshape({1, -1}).clone();
        if (attribute < 0 || attribute >= b.size(1)) throw std::out_of_range("attribute index out of range");
        b.select(1, attribute).fill_(values[k].item<double>());
        // Same code path as a single edit request.
        auto edited = model.edit(image.to(dtype).unsqueeze(0), b).to(torch::kFloat);
        out.push_back({values[k].item<double>(), judge.probabilities(edited)[0][attribute].item<double>(), edited[0]});
    }
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs two equal-length series");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace attgan
