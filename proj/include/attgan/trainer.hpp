#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "attgan/checkpoint.hpp"
#include "attgan/dataset.hpp"
#include "attgan/losses.hpp"
#include "attgan/model.hpp"
#include "attgan/style.hpp"

namespace attgan {

struct AblationFlags {
    bool use_cls = true;
    bool use_rec = true;
    bool use_adv = true;
    bool use_attr_indep_constraint = false;

    friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct TrainConfig {
    LossWeights weights;
    double lr = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch_size = 32;
    /// Critic (D/C) updates per generator update.
    int critic_steps = 5;
    /// Total optimizer updates, critic and generator steps together.
    long long max_steps = 0;
    std::uint64_t seed = 0;
    AblationFlags ablation;
    bool flip = false;
    /// 0 writes only the final checkpoint.
    long long checkpoint_every = 0;
    std::filesystem::path checkpoint_dir;
    std::filesystem::path log_path;

    void validate() const;
    /// Whether update number `step` (0-based) is a critic step.
    bool is_critic_step(long long step) const { return step % (critic_steps + 1) < critic_steps; }
};

nlohmann::json to_json(const TrainConfig& config);

/// One training minibatch: real images, their labels a and the targets b.
struct TrainBatch {
    long long step = 0;
    torch::Tensor images;   // [B,3,R,R]
    torch::Tensor labels;   // [B,n]
    torch::Tensor targets;  // [B,n], a row permutation of labels
};

/// Predicts a from the flattened bottleneck; only used by the
/// attribute-independence ablation.
class LatentAdversaryImpl : public torch::nn::Module {
public:
    LatentAdversaryImpl(int64_t in_features, int64_t attributes, int64_t hidden = 256);
    torch::Tensor forward(const torch::Tensor& bottleneck);

private:
    torch::nn::Linear fc_{nullptr}, out_{nullptr};
};
TORCH_MODULE(LatentAdversary);

/// Owns the model and both optimizers. Every random draw of update `s` is
/// derived from (seed, s), so a run resumed from a checkpoint replays the
/// uninterrupted run exactly.
class Trainer {
public:
    Trainer(AttGAN model, TrainConfig config);

    const AttGAN& model() const { return model_; }
    AttGAN& model() { return model_; }
    const TrainConfig& config() const { return config_; }
    long long step() const { return step_; }

    TrainBatch make_batch(const ImageDataset& data, long long step) const;

    /// One D/C(/Q) update; generator tensors are left untouched.
    LossReport train_step_dc(const TrainBatch& batch);
    /// One G_enc/G_dec update; critic tensors are left untouched.
    LossReport train_step_g(const TrainBatch& batch);
    /// Updates the latent attribute predictor on (z, a). No-op returning an
    /// empty report when the ablation flag is off.
    LossReport attr_indep_adversary_step(const TrainBatch& batch);

    using StepCallback = std::function<void(const LossReport&)>;
    /// Runs updates until config().max_steps, writing periodic and final
    /// checkpoints. Returns the reports produced by this call.
    std::vector<LossReport> run(const ImageDataset& data, const StepCallback& on_step = {});

    Archive state_archive() const;
    void save(const std::filesystem::path& path) const;
    /// Restores model, optimizer moments and the step counter. The caller's
    /// config is used as is (so max_steps may be extended).
    static Trainer resume(const std::filesystem::path& path, TrainConfig config);
    static Trainer from_archive(const Archive& archive, TrainConfig config);

    /// The weighted critic / generator objectives of `batch` without any
    /// parameter update; `report` receives the component values.
    torch::Tensor dc_objective(const TrainBatch& batch, LossReport& report);
    torch::Tensor g_objective(const TrainBatch& batch, LossReport& report);

    /// Confusion term of the independence ablation: BCE(adv(z), 1-a).
    torch::Tensor independence_confusion(const torch::Tensor& bottleneck, const torch::Tensor& labels);

private:
    std::vector<torch::Tensor> critic_parameters() const;
    StyleControllers sample_theta(const TrainBatch& batch) const;
    torch::Tensor generate(const LatentCode& z, const TrainBatch& batch, const StyleControllers* theta) const;
    void checkpoint_to(const std::string& file) const;
    void fail(const std::string& what, const LossReport& report) const;

    AttGAN model_;
    TrainConfig config_;
    long long step_ = 0;
    std::unique_ptr<torch::optim::Adam> opt_g_, opt_dc_, opt_adv_;
    LatentAdversary adversary_{nullptr};
};

}  // namespace attgan
