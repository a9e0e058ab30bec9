#include "attgan/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <ATen/CPUGeneratorImpl.h>

#include "attgan/seed.hpp"

namespace attgan {

namespace {

// Stream tags for the per-step seeds.
enum : std::uint64_t { kBatchDraw = 1, kTargetDraw = 2, kPenaltyDraw = 3, kStyleDraw = 4, kFlipDraw = 5 };

at::Generator step_generator(std::uint64_t seed, long long step, std::uint64_t stream) {
    return at::make_generator<at::CPUGeneratorImpl>(mix_seed(seed, static_cast<std::uint64_t>(step), stream));
}

double scalar(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

class FrozenParameters {
public:
    explicit FrozenParameters(std::vector<torch::Tensor> params) : params_(std::move(params)) {
        for (auto& p : params_) p.requires_grad_(false);
    }
    ~FrozenParameters() {
        for (auto& p : params_) p.requires_grad_(true);
    }
    FrozenParameters(const FrozenParameters&) = delete;
    FrozenParameters& operator=(const FrozenParameters&) = delete;

private:
    std::vector<torch::Tensor> params_;
};

std::unique_ptr<torch::optim::Adam> make_adam(std::vector<torch::Tensor> params, const TrainConfig& c) {
    return std::make_unique<torch::optim::Adam>(
        std::move(params), torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2}));
}

NamedTensors optimizer_tensors(torch::optim::Adam& opt, const std::string& prefix) {
    NamedTensors out;
    auto& params = opt.param_groups().at(0).params();
    auto& state = opt.state();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto it = state.find(params[i].unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const auto base = prefix + std::to_string(i) + ".";
        out.emplace_back(base + "exp_avg", s.exp_avg());
        out.emplace_back(base + "exp_avg_sq", s.exp_avg_sq());
        out.emplace_back(base + "step", torch::tensor({s.step()}, torch::kInt64));
    }
    return out;
}

void restore_optimizer(torch::optim::Adam& opt, const Archive& archive, const std::string& prefix) {
    auto& params = opt.param_groups().at(0).params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto base = prefix + std::to_string(i) + ".";
        if (!archive.has(base + "step")) continue;
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(archive.tensor(base + "step").item<int64_t>());
        s->exp_avg(archive.tensor(base + "exp_avg").clone());
        s->exp_avg_sq(archive.tensor(base + "exp_avg_sq").clone());
        if (s->exp_avg().sizes() != params[i].sizes())
            throw CheckpointError("optimizer state '" + base + "' does not match parameter shape");
        opt.state()[params[i].unsafeGetTensorImpl()] = std::move(s);
    }
}

}  // namespace

void TrainConfig::validate() const {
    weights.validate();
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (the gradient penalty needs pairs)");
    if (critic_steps < 1) throw std::invalid_argument("critic_steps must be >= 1");
    if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
    if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
    if (!(lr > 0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
    for (double b : {beta1, beta2})
        if (!(b >= 0 && b < 1)) throw std::invalid_argument("Adam betas must lie in [0,1)");
}

nlohmann::json to_json(const TrainConfig& c) {
    const auto& w = c.weights;
    return {{"lambda_rec", w.rec},
            {"lambda_cls_g", w.cls_g},
            {"lambda_cls_c", w.cls_c},
            {"lambda_gp", w.gp},
            {"lambda_info", w.info},
            {"lambda_indep", w.indep},
            {"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"batch_size", c.batch_size},
            {"critic_steps", c.critic_steps},
            {"max_steps", c.max_steps},
            {"seed", c.seed},
            {"use_cls", c.ablation.use_cls},
            {"use_rec", c.ablation.use_rec},
            {"use_adv", c.ablation.use_adv},
            {"use_attr_indep_constraint", c.ablation.use_attr_indep_constraint},
            {"flip", c.flip}};
}

LatentAdversaryImpl::LatentAdversaryImpl(int64_t in_features, int64_t attributes, int64_t hidden) {
    fc_ = register_module("fc", torch::nn::Linear(in_features, hidden));
    out_ = register_module("out", torch::nn::Linear(hidden, attributes));
}

torch::Tensor LatentAdversaryImpl::forward(const torch::Tensor& bottleneck) {
    return torch::sigmoid(out_->forward(torch::leaky_relu(fc_->forward(bottleneck.flatten(1)), 0.2)));
}

Trainer::Trainer(AttGAN model, TrainConfig config) : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
    model_.train();
    opt_g_ = make_adam(model_.parameters(ParamGroup::Generator), config_);
    opt_dc_ = make_adam(model_.parameters(ParamGroup::Critic), config_);
    if (config_.ablation.use_attr_indep_constraint) {
        const auto& ladder = model_.config().ladder();
        const auto& bottom = ladder.encoder.back();
        adversary_ = LatentAdversary(static_cast<int64_t>(bottom.height) * bottom.width * bottom.channels,
                                     model_.config().attribute_count);
        initialize_weights(*adversary_, mix_seed(config_.seed, 0xad5e));
        adversary_->to(model_.dtype());
        opt_adv_ = make_adam(adversary_->parameters(), config_);
    }
}

std::vector<torch::Tensor> Trainer::critic_parameters() const { return model_.parameters(ParamGroup::Critic); }

TrainBatch Trainer::make_batch(const ImageDataset& data, long long step) const {
    if (data.size() == 0) throw std::invalid_argument("training set is empty");
    if (data.names.size() != static_cast<std::size_t>(model_.config().attribute_count))
        throw std::invalid_argument("dataset attribute count does not match the model");
    TrainBatch b;
    b.step = step;
    auto gen = step_generator(config_.seed, step, kBatchDraw);
    auto rows = torch::randint(static_cast<int64_t>(data.size()), {config_.batch_size}, gen, torch::kLong);
    b.images = data.images.index_select(0, rows).to(model_.dtype());
    b.labels = data.labels.index_select(0, rows).to(model_.dtype());
    if (config_.flip) {
        auto flip_gen = step_generator(config_.seed, step, kFlipDraw);
        auto mask = torch::rand({config_.batch_size, 1, 1, 1}, flip_gen) < 0.5;
        b.images = torch::where(mask, b.images.flip({3}), b.images);
    }
    const auto perm = target_permutation(static_cast<std::size_t>(config_.batch_size),
                                         mix_seed(config_.seed, static_cast<std::uint64_t>(step), kTargetDraw));
    b.targets = b.labels.index_select(0, torch::tensor(perm, torch::kLong));
    return b;
}

StyleControllers Trainer::sample_theta(const TrainBatch& batch) const {
    return sample_style_controllers(model_.config().style_counts, batch.images.size(0),
                                    mix_seed(config_.seed, static_cast<std::uint64_t>(batch.step), kStyleDraw));
}

torch::Tensor Trainer::generate(const LatentCode& z, const TrainBatch& batch, const StyleControllers* theta) const {
    if (theta) return model_.decode_with_style(z, theta->one_hot().to(model_.dtype()), batch.targets);
    return model_.decode(z, batch.targets);
}

void Trainer::checkpoint_to(const std::string& file) const {
    if (config_.checkpoint_dir.empty()) return;
    save(config_.checkpoint_dir / file);
}

void Trainer::fail(const std::string& what, const LossReport& report) const {
    checkpoint_to("abort.ckpt");
    throw NonFiniteLoss(what + " at step " + std::to_string(report.step) + ": " + report.to_json().dump(), report);
}

torch::Tensor Trainer::dc_objective(const TrainBatch& batch, LossReport& r) {
    const auto& flags = config_.ablation;
    const auto& w = config_.weights;
    const bool style = model_.config().style_enabled();
    model_.train();

    std::optional<StyleControllers> theta;
    if (style) theta = sample_theta(batch);
    torch::Tensor fake;
    {
        torch::NoGradGuard no_grad;
        model_.set_generator_stat_updates(false);
        auto z = model_.encode(batch.images);
        fake = generate(z, batch, theta ? &*theta : nullptr);
        model_.set_generator_stat_updates(true);
    }

    r = LossReport{};
    r.phase = "dc";
    r.step = batch.step;
    auto& critic = model_.critic();
    auto real_features = critic->trunk(batch.images);
    auto cls_c = classification_loss_real(critic->attribute_head(real_features), batch.labels);
    auto total = torch::zeros({}, batch.images.options());
    if (flags.use_cls) total = total + w.cls_c * cls_c;
    r.cls_c = scalar(cls_c);

    torch::Tensor fake_features;
    if (flags.use_adv || style) fake_features = critic->trunk(fake);
    if (flags.use_adv) {
        auto adv = adversarial_losses(critic->score_head(real_features), critic->score_head(fake_features));
        auto gen = step_generator(config_.seed, batch.step, kPenaltyDraw);
        auto u = torch::rand({batch.images.size(0)}, gen).to(batch.images.dtype());
        torch::Tensor gp;
        try {
            gp = gradient_penalty([&](const torch::Tensor& x) { return model_.discriminate(x); }, batch.images, fake,
                                  u);
        } catch (const std::runtime_error& e) {
            r.gp = std::numeric_limits<double>::quiet_NaN();
            fail(e.what(), r);
        }
        total = total + critic_objective(torch::zeros({}, total.options()), adv.adv_d, gp, w);
        r.adv_d = scalar(adv.adv_d);
        r.gp = scalar(gp);
    }
    if (style) {
        auto q = style_probabilities(critic->style_head(fake_features), model_.config().style_counts);
        auto mi = mutual_information_loss(q, *theta);
        total = total + w.info * mi;
        r.mi = scalar(mi);
    }
    r.total_dc = scalar(total);
    return total;
}

LossReport Trainer::train_step_dc(const TrainBatch& batch) {
    LossReport r;
    auto total = dc_objective(batch, r);
    if (!r.all_finite()) fail("non-finite critic loss", r);
    opt_dc_->zero_grad();
    if (total.requires_grad()) {
        total.backward();
        opt_dc_->step();
    }
    opt_dc_->zero_grad();
    return r;
}

torch::Tensor Trainer::independence_confusion(const torch::Tensor& bottleneck, const torch::Tensor& labels) {
    if (!adversary_) return torch::zeros({}, bottleneck.options());
    return attribute_cross_entropy(adversary_->forward(bottleneck), 1.0 - labels);
}

LossReport Trainer::attr_indep_adversary_step(const TrainBatch& batch) {
    LossReport r;
    r.phase = "indep";
    r.step = batch.step;
    if (!config_.ablation.use_attr_indep_constraint) return r;
    torch::Tensor bottleneck;
    {
        torch::NoGradGuard no_grad;
        model_.set_generator_stat_updates(false);
        bottleneck = model_.encode(batch.images).bottleneck;
        model_.set_generator_stat_updates(true);
    }
    auto loss = attribute_cross_entropy(adversary_->forward(bottleneck), batch.labels);
    r.indep = scalar(loss);
    if (!r.all_finite()) fail("non-finite adversary loss", r);
    opt_adv_->zero_grad();
    loss.backward();
    opt_adv_->step();
    opt_adv_->zero_grad();
    return r;
}

torch::Tensor Trainer::g_objective(const TrainBatch& batch, LossReport& r) {
    const auto& flags = config_.ablation;
    const auto& w = config_.weights;
    const bool style = model_.config().style_enabled();
    model_.train();
    FrozenParameters frozen(critic_parameters());
    std::optional<FrozenParameters> frozen_adv;
    if (adversary_) frozen_adv.emplace(adversary_->parameters());

    std::optional<StyleControllers> theta;
    if (style) theta = sample_theta(batch);
    auto z = model_.encode(batch.images);
    auto reconstruction = model_.decode(z, batch.labels);
    auto edited = generate(z, batch, theta ? &*theta : nullptr);
    auto& critic = model_.critic();
    auto features = critic->trunk(edited);

    auto rec = reconstruction_loss(batch.images, reconstruction);
    auto cls_g = classification_loss_generated(critic->attribute_head(features), batch.targets);
    auto adv_g = -critic->score_head(features).mean();

    LossWeights effective = w;
    if (!flags.use_rec) effective.rec = 0;
    if (!flags.use_cls) effective.cls_g = 0;
    auto total = generator_objective(rec, cls_g, flags.use_adv ? adv_g : torch::zeros_like(adv_g), effective);

    r = LossReport{};
    r.phase = "g";
    r.step = batch.step;
    r.rec = scalar(rec);
    r.cls_g = scalar(cls_g);
    r.adv_g = scalar(adv_g);
    if (style) {
        auto q = style_probabilities(critic->style_head(features), model_.config().style_counts);
        auto mi = mutual_information_loss(q, *theta);
        total = total + w.info * mi;
        r.mi = scalar(mi);
    }
    if (flags.use_attr_indep_constraint) {
        auto confusion = independence_confusion(z.bottleneck, batch.labels);
        total = total + w.indep * confusion;
        r.indep = scalar(confusion);
    }
    r.total_g = scalar(total);
    return total;
}

LossReport Trainer::train_step_g(const TrainBatch& batch) {
    LossReport r;
    auto total = g_objective(batch, r);
    if (!r.all_finite()) fail("non-finite generator loss", r);

    opt_g_->zero_grad();
    total.backward();
    opt_g_->step();
    opt_g_->zero_grad();
    return r;
}

std::vector<LossReport> Trainer::run(const ImageDataset& data, const StepCallback& on_step) {
    std::vector<LossReport> log;
    std::ofstream log_file;
    if (!config_.log_path.empty()) {
        if (config_.log_path.has_parent_path()) std::filesystem::create_directories(config_.log_path.parent_path());
        log_file.open(config_.log_path, step_ == 0 ? std::ios::trunc : std::ios::app);
        if (!log_file) throw std::runtime_error("cannot open loss log " + config_.log_path.string());
    }
    auto record = [&](const LossReport& r) {
        log.push_back(r);
        if (log_file) log_file << r.to_json().dump() << '\n';
        if (on_step) on_step(r);
    };
    while (step_ < config_.max_steps) {
        const auto batch = make_batch(data, step_);
        if (config_.is_critic_step(step_)) {
            if (config_.ablation.use_attr_indep_constraint) record(attr_indep_adversary_step(batch));
            record(train_step_dc(batch));
        } else {
            record(train_step_g(batch));
        }
        ++step_;
        if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0 && step_ < config_.max_steps) {
            char name[32];
            std::snprintf(name, sizeof name, "step-%08lld.ckpt", step_);
            checkpoint_to(name);
        }
    }
    log_file.flush();
    checkpoint_to("last.ckpt");
    return log;
}

Archive Trainer::state_archive() const {
    nlohmann::json extra = {{"train", to_json(config_)}, {"step", step_}};
    auto archive = model_archive(model_, extra);
    for (auto& t : optimizer_tensors(*opt_g_, "optim.g.")) archive.tensors.push_back(std::move(t));
    for (auto& t : optimizer_tensors(*opt_dc_, "optim.dc.")) archive.tensors.push_back(std::move(t));
    if (adversary_) {
        for (const auto& item : adversary_->named_parameters()) archive.tensors.emplace_back("adv." + item.key(), item.value());
        for (auto& t : optimizer_tensors(*opt_adv_, "optim.adv.")) archive.tensors.push_back(std::move(t));
    }
    return archive;
}

void Trainer::save(const std::filesystem::path& path) const { write_archive(path, state_archive()); }

Trainer Trainer::from_archive(const Archive& archive, TrainConfig config) {
    Trainer trainer(model_from_archive(archive), std::move(config));
    trainer.step_ = archive.metadata.value("step", 0LL);
    restore_optimizer(*trainer.opt_g_, archive, "optim.g.");
    restore_optimizer(*trainer.opt_dc_, archive, "optim.dc.");
    if (trainer.adversary_) {
        NamedTensors targets;
        for (const auto& item : trainer.adversary_->named_parameters()) targets.emplace_back(item.key(), item.value());
        if (archive.has("adv.fc.weight")) {
            load_tensors(archive, targets, "adv.");
            restore_optimizer(*trainer.opt_adv_, archive, "optim.adv.");
        }
    }
    trainer.model_.train();
    return trainer;
}

Trainer Trainer::resume(const std::filesystem::path& path, TrainConfig config) {
    return from_archive(read_archive(path), std::move(config));
}

}  // namespace attgan
