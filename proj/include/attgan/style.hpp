#pragma once

#include <cstdint>
#include <vector>

#include <torch/types.h>

namespace attgan {

/// One categorical style index per attribute and sample.
struct StyleControllers {
    std::vector<int> counts;   // n_i per attribute
    torch::Tensor indices;     // [B,n] int64, indices[b][i] < counts[i]

    int64_t batch() const { return indices.size(0); }
    /// Concatenated one-hot blocks, [B, sum n_i] float.
    torch::Tensor one_hot() const;
};

/// Per-attribute categorical probabilities from the style predictor.
struct StylePrediction {
    std::vector<torch::Tensor> probabilities;  // attribute i -> [B,n_i]
};

/// theta_i ~ Cat(n_i, 1/n_i), independent across attributes and samples.
StyleControllers sample_style_controllers(const std::vector<int>& counts, int64_t batch, std::uint64_t seed);

/// Every sample gets the same explicit style indices.
StyleControllers fixed_style_controllers(const std::vector<int>& counts, int64_t batch,
                                         const std::vector<int>& indices);

/// Blocks of 1/n_i: the conditioning used when no style is requested.
torch::Tensor uniform_style(const std::vector<int>& counts, int64_t batch);

/// Splits [B, sum n_i] logits into per-attribute softmax distributions.
StylePrediction style_probabilities(const torch::Tensor& logits, const std::vector<int>& counts);

/// Negative log-likelihood sum_i -log Q_i(theta_i | x), batch mean, with
/// probabilities clipped to [1e-7, 1-1e-7]. Minimising it tightens and raises
/// the variational lower bound on I(theta; x) (entropy constant dropped).
torch::Tensor mutual_information_loss(const StylePrediction& prediction, const StyleControllers& theta);

/// Fraction of (sample, attribute with n_i > 1) pairs where argmax Q equals theta.
double style_recovery_accuracy(const StylePrediction& prediction, const StyleControllers& theta);

}  // namespace attgan
