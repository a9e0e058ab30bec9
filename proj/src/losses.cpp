#include "attgan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <torch/torch.h>

namespace attgan {

void LossWeights::validate() const {
    for (double v : {rec, cls_g, cls_c, gp, info, indep})
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
}

nlohmann::json LossReport::to_json() const {
    return {{"phase", phase}, {"step", step},   {"rec", rec}, {"cls_g", cls_g},     {"cls_c", cls_c},
            {"adv_g", adv_g}, {"adv_d", adv_d}, {"gp", gp},   {"mi", mi},           {"indep", indep},
            {"total_g", total_g}, {"total_dc", total_dc}};
}

bool LossReport::all_finite() const {
    for (double v : {rec, cls_g, cls_c, adv_g, adv_d, gp, mi, indep, total_g, total_dc})
        if (!std::isfinite(v)) return false;
    return true;
}

torch::Tensor attribute_cross_entropy(const torch::Tensor& probabilities, const torch::Tensor& targets) {
    if (probabilities.sizes() != targets.sizes())
        throw std::invalid_argument("attribute cross entropy: prediction " + c10::str(probabilities.sizes()) +
                                    " vs target " + c10::str(targets.sizes()));
    const auto p = probabilities.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    const auto t = targets.to(p.dtype());
    auto per_attribute = -(t * torch::log(p) + (1.0 - t) * torch::log(1.0 - p));
    if (per_attribute.dim() == 1) return per_attribute.sum();
    return per_attribute.sum(-1).mean();
}

torch::Tensor classification_loss_generated(const torch::Tensor& c_pred, const torch::Tensor& b) {
    return attribute_cross_entropy(c_pred, b);
}

torch::Tensor classification_loss_real(const torch::Tensor& c_pred, const torch::Tensor& a) {
    return attribute_cross_entropy(c_pred, a);
}

torch::Tensor reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
    if (x.sizes() != x_hat.sizes())
        throw std::invalid_argument("reconstruction loss: shapes " + c10::str(x.sizes()) + " and " +
                                    c10::str(x_hat.sizes()) + " differ");
    return (x - x_hat).abs().mean();
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& u) {
    if (real.sizes() != fake.sizes()) throw std::invalid_argument("gradient penalty: real/fake batch shapes differ");
    if (u.dim() != 1 || u.size(0) != real.size(0))
        throw std::invalid_argument("gradient penalty: need one interpolation coefficient per sample");
    std::vector<int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
    shape[0] = real.size(0);
    const auto w = u.to(real.dtype()).view(shape);
    auto mixed = (w * real.detach() + (1.0 - w) * fake.detach()).requires_grad_(true);
    auto scores = critic(mixed);
    torch::Tensor grads;
    if (scores.requires_grad())
        grads = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true, /*create_graph=*/true,
                                      /*allow_unused=*/true)[0];
    if (!grads.defined()) grads = torch::zeros_like(mixed);
    // Differentiable norm: the plain 2-norm has an undefined gradient at 0.
    auto norm = torch::sqrt(grads.flatten(1).pow(2).sum(1) + 1e-16);
    if (!torch::isfinite(norm).all().item<bool>()) throw std::runtime_error("gradient penalty: non-finite gradient norm");
    return (norm - 1.0).pow(2).mean();
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return gradient_penalty(critic, real, fake, torch::rand({real.size(0)}, gen));
}

AdversarialLosses adversarial_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    if (d_real.numel() == 0 || d_fake.numel() == 0) throw std::invalid_argument("adversarial losses: empty scores");
    return {-d_real.mean() + d_fake.mean(), -d_fake.mean()};
}

LossReport compose_objectives(const ComponentLosses& p, const LossWeights& w) {
    LossReport r;
    r.rec = p.rec;
    r.cls_g = p.cls_g;
    r.adv_g = p.adv_g;
    r.cls_c = p.cls_c;
    r.adv_d = p.adv_d;
    r.gp = p.gp;
    if (!r.all_finite()) throw NonFiniteLoss("compose_objectives: non-finite loss component", r);
    r.total_g = generator_objective(p.rec, p.cls_g, p.adv_g, w);
    r.total_dc = critic_objective(p.cls_c, p.adv_d, p.gp, w);
    return r;
}

}  // namespace attgan
