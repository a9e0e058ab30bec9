#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "attgan/checkpoint.hpp"
#include "attgan/dataset.hpp"
#include "attgan/model.hpp"
#include "attgan/synthetic.hpp"

namespace attgan {

/// Maps images to per-attribute probabilities; thresholded at 0.5 for decisions.
class Judge {
public:
    virtual ~Judge() = default;
    virtual const std::vector<std::string>& names() const = 0;
    /// [B,3,R,R] in [-1,1] -> [B,n] float64 probabilities.
    virtual torch::Tensor probabilities(const torch::Tensor& images) const = 0;
    torch::Tensor predict(const torch::Tensor& images) const { return (probabilities(images) > 0.5).to(torch::kFloat); }
};

/// The rule-based synthetic probe as a judge (probabilities are 0 or 1).
class ProbeJudge : public Judge {
public:
    ProbeJudge(std::vector<std::string> names, int resolution) : probe_(std::move(names), resolution) {}
    const std::vector<std::string>& names() const override { return probe_.names(); }
    torch::Tensor probabilities(const torch::Tensor& images) const override;

private:
    PixelProbe probe_;
};

/// Small plain CNN (conv/ReLU/max-pool, global max pool, linear head).
/// Deliberately unlike the editing model's networks.
class JudgeNetImpl : public torch::nn::Module {
public:
    JudgeNetImpl(int64_t attributes, int64_t width = 32);
    torch::Tensor forward(const torch::Tensor& x);  // logits

private:
    torch::nn::Sequential features_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(JudgeNet);

struct JudgeTrainConfig {
    int epochs = 8;
    int batch_size = 64;
    double lr = 1e-3;
    /// Std of Gaussian pixel noise added during training, for robustness to generated images.
    double noise = 0.05;
    std::uint64_t seed = 0;
};

class DegenerateDataset : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ClassifierJudge : public Judge {
public:
    ClassifierJudge(std::vector<std::string> names, int resolution, std::uint64_t seed = 0);

    const std::vector<std::string>& names() const override { return names_; }
    torch::Tensor probabilities(const torch::Tensor& images) const override;
    int resolution() const { return resolution_; }
    JudgeNet& net() { return net_; }
    NamedTensors named_tensors() const;

    void save(const std::filesystem::path& path) const;
    static ClassifierJudge load(const std::filesystem::path& path);

private:
    std::vector<std::string> names_;
    int resolution_;
    JudgeNet net_{nullptr};
};

struct JudgeTraining {
    std::shared_ptr<ClassifierJudge> judge;
    std::vector<double> heldout_accuracy;  // per attribute
};

/// Trains an independent classifier on `train`, reporting per-attribute
/// accuracy on `heldout`. Throws DegenerateDataset when an attribute has a
/// single class in `train`.
JudgeTraining train_independent_classifier(const ImageDataset& train, const ImageDataset& heldout,
                                           const JudgeTrainConfig& config);

/// Per-attribute accuracy of a judge against the labels of `data`.
std::vector<double> judge_accuracy(const Judge& judge, const ImageDataset& data, int batch = 256);

/// Anything that turns (test rows, target attributes) into edited images.
class Editor {
public:
    virtual ~Editor() = default;
    virtual torch::Tensor edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                               const torch::Tensor& targets) const = 0;
};

class ModelEditor : public Editor {
public:
    explicit ModelEditor(AttGAN model) : model_(std::move(model)) { model_.eval(); }
    torch::Tensor edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                       const torch::Tensor& targets) const override;

private:
    AttGAN model_;
};

/// Returns the inputs unchanged.
class IdentityEditor : public Editor {
public:
    torch::Tensor edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                       const torch::Tensor& targets) const override;
};

/// Re-renders synthetic faces with the target labels (thresholded at 0.5).
class OracleEditor : public Editor {
public:
    torch::Tensor edit(const ImageDataset& data, const std::vector<int64_t>& rows,
                       const torch::Tensor& targets) const override;
};

struct AttributeEditScore {
    double accuracy = 0;
    double preservation_error = 0;
};

/// Inverts attribute `i` of every test image, keeps the others at a, and
/// judges the result.
AttributeEditScore evaluate_attribute(const Editor& editor, const ImageDataset& testset, int attribute,
                                      const Judge& judge, int batch = 128);
double editing_accuracy(const Editor& editor, const ImageDataset& testset, int attribute, const Judge& judge);
double preservation_error(const Editor& editor, const ImageDataset& testset, int attribute, const Judge& judge);

struct EvalReport {
    std::vector<std::string> names;
    std::vector<double> accuracy;
    std::vector<double> preservation_error;
    double mean_accuracy = 0;
    double mean_preservation_error = 0;
    std::size_t samples = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
    /// attribute,accuracy,preservation_error rows for plotting.
    std::string to_csv() const;
};

EvalReport evaluate(const Editor& editor, const ImageDataset& testset, const Judge& judge);

struct SweepPoint {
    double value = 0;
    double score = 0;
    torch::Tensor image;  // [3,R,R]
};

/// Edits one image with attribute `i` at k evenly spaced values on [0,1],
/// other attributes held at `labels`.
std::vector<SweepPoint> intensity_sweep(const AttGAN& model, const torch::Tensor& image, const torch::Tensor& labels,
                                        int attribute, int steps, const Judge& judge);

/// Batched sweep scores: [N,k] judge probabilities for attribute `i`.
torch::Tensor intensity_scores(const AttGAN& model, const torch::Tensor& images, const torch::Tensor& labels,
                               int attribute, int steps, const Judge& judge);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace attgan
