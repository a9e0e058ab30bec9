#include "attgan/style.hpp"

#include <stdexcept>

#include <torch/torch.h>

namespace attgan {

namespace {

constexpr double kClip = 1e-7;

void check_counts(const std::vector<int>& counts) {
    if (counts.empty()) throw std::invalid_argument("style counts are empty");
    for (int n : counts)
        if (n < 1) throw std::invalid_argument("every attribute needs at least one style (got n_i = " +
                                               std::to_string(n) + ")");
}

}  // namespace

torch::Tensor StyleControllers::one_hot() const {
    std::vector<torch::Tensor> blocks;
    blocks.reserve(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        blocks.push_back(torch::one_hot(indices.select(1, static_cast<long>(i)), counts[i]).to(torch::kFloat32));
    return torch::cat(blocks, 1);
}

StyleControllers sample_style_controllers(const std::vector<int>& counts, int64_t batch, std::uint64_t seed) {
    check_counts(counts);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    std::vector<torch::Tensor> cols;
    for (int n : counts) cols.push_back(torch::randint(n, {batch}, gen, torch::kLong));
    return {counts, torch::stack(cols, 1)};
}

StyleControllers fixed_style_controllers(const std::vector<int>& counts, int64_t batch,
                                         const std::vector<int>& indices) {
    check_counts(counts);
    if (indices.size() != counts.size()) throw std::invalid_argument("one style index per attribute required");
    std::vector<int64_t> row;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= counts[i])
            throw std::invalid_argument("style index " + std::to_string(indices[i]) + " out of range for attribute " +
                                        std::to_string(i));
        row.push_back(indices[i]);
    }
    return {counts, torch::tensor(row, torch::kLong).unsqueeze(0).repeat({batch, 1})};
}

torch::Tensor uniform_style(const std::vector<int>& counts, int64_t batch) {
    check_counts(counts);
    std::vector<torch::Tensor> blocks;
    for (int n : counts) blocks.push_back(torch::full({batch, n}, 1.0 / n));
    return torch::cat(blocks, 1);
}

StylePrediction style_probabilities(const torch::Tensor& logits, const std::vector<int>& counts) {
    check_counts(counts);
    int64_t width = 0;
    for (int n : counts) width += n;
    if (logits.dim() != 2 || logits.size(1) != width)
        throw std::invalid_argument("style logits width does not match style counts");
    StylePrediction out;
    int64_t offset = 0;
    for (int n : counts) {
        out.probabilities.push_back(torch::softmax(logits.narrow(1, offset, n), 1));
        offset += n;
    }
    return out;
}

torch::Tensor mutual_information_loss(const StylePrediction& prediction, const StyleControllers& theta) {
    if (prediction.probabilities.size() != theta.counts.size())
        throw std::invalid_argument("style prediction and controllers cover different attribute counts");
    torch::Tensor total;
    for (std::size_t i = 0; i < theta.counts.size(); ++i) {
        const auto& p = prediction.probabilities[i];
        if (p.size(1) != theta.counts[i] || p.size(0) != theta.batch())
            throw std::invalid_argument("style prediction shape mismatch for attribute " + std::to_string(i));
        auto target = theta.indices.select(1, static_cast<long>(i)).unsqueeze(1);
        auto nll = -torch::log(p.gather(1, target).squeeze(1).clamp(kClip, 1.0 - kClip));
        total = total.defined() ? total + nll : nll;
    }
    return total.mean();
}

double style_recovery_accuracy(const StylePrediction& prediction, const StyleControllers& theta) {
    int64_t hits = 0, count = 0;
    for (std::size_t i = 0; i < theta.counts.size(); ++i) {
        if (theta.counts[i] < 2) continue;
        auto pred = prediction.probabilities[i].argmax(1);
        hits += pred.eq(theta.indices.select(1, static_cast<long>(i))).sum().item<int64_t>();
        count += theta.batch();
    }
    return count ? static_cast<double>(hits) / static_cast<double>(count) : 1.0;
}

}  // namespace attgan
