#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/types.h>

namespace attgan {

/// Probability clip applied before every log.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossWeights {
    double rec = 100.0;   // lambda_1
    double cls_g = 10.0;  // lambda_2
    double cls_c = 1.0;   // lambda_3
    double gp = 10.0;     // gradient penalty coefficient
    double info = 1.0;    // style mutual-information term
    double indep = 1.0;   // attribute-independence confusion term (ablation only)

    void validate() const;
};

/// Per-step loss values. Components that a step does not evaluate stay 0.
struct LossReport {
    std::string phase;  // "dc", "g" or "indep"
    long long step = 0;
    double rec = 0, cls_g = 0, cls_c = 0, adv_g = 0, adv_d = 0, gp = 0;
    double mi = 0, indep = 0;
    double total_g = 0, total_dc = 0;

    nlohmann::json to_json() const;
    bool all_finite() const;
    friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Sum over attributes of binary cross entropy, averaged over the batch.
/// The single routine behind both attribute classification losses.
torch::Tensor attribute_cross_entropy(const torch::Tensor& probabilities, const torch::Tensor& targets);

/// l_cls_g: classifier output on x^b against the target attributes b.
torch::Tensor classification_loss_generated(const torch::Tensor& c_pred, const torch::Tensor& b);
/// l_cls_c: classifier output on x^a against the source labels a.
torch::Tensor classification_loss_real(const torch::Tensor& c_pred, const torch::Tensor& a);

/// Mean absolute elementwise difference.
torch::Tensor reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// mean_i (||grad D(x~_i)||_2 - 1)^2 with x~ = u*real + (1-u)*fake; `u` is [B].
/// The result keeps its graph so it can be differentiated w.r.t. D's parameters.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& u);
/// Draws u ~ Uniform(0,1) per sample from `seed`.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed);

struct AdversarialLosses {
    torch::Tensor adv_d;  // -mean(D(real)) + mean(D(fake))
    torch::Tensor adv_g;  // -mean(D(fake))
};
AdversarialLosses adversarial_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake);

/// lambda_1 rec + lambda_2 cls_g + adv_g. Works for doubles and tensors alike.
template <class T>
T generator_objective(const T& rec, const T& cls_g, const T& adv_g, const LossWeights& w) {
    return rec * w.rec + cls_g * w.cls_g + adv_g;
}

/// lambda_3 cls_c + adv_d + lambda_gp gp.
template <class T>
T critic_objective(const T& cls_c, const T& adv_d, const T& gp, const LossWeights& w) {
    return cls_c * w.cls_c + adv_d + gp * w.gp;
}

struct ComponentLosses {
    double rec = 0, cls_g = 0, adv_g = 0;
    double cls_c = 0, adv_d = 0, gp = 0;
};

/// Fills a LossReport with the components and both weighted totals; throws on
/// any non-finite component.
LossReport compose_objectives(const ComponentLosses& parts, const LossWeights& weights);

class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(const std::string& what, LossReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const LossReport& report() const { return report_; }

private:
    LossReport report_;
};

}  // namespace attgan
