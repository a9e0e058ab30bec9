#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "attgan/config.hpp"
#include "attgan/dataset.hpp"
#include "attgan/synthetic.hpp"
#include "attgan/trainer.hpp"

namespace attgan {

/// Where training images come from: a dataset directory or the procedural renderer.
struct DataConfig {
    std::filesystem::path dir;               // data.dir
    std::vector<std::string> attributes;     // data.attributes (empty = all in the file)
    int resolution = 0;                      // data.resolution (0 = synthetic resolution)
    std::uint64_t split_seed = 0;            // data.split_seed
    SyntheticSpec synthetic;                 // synthetic.*
    std::uint64_t synthetic_seed = 0;        // synthetic.seed
};

struct ModelConfig {
    double width = 1.0;                      // model.width
    int skip_count = 1;                      // model.skip_count
    int inject_count = 1;                    // model.inject_count
    std::vector<int> style_counts;           // model.style_counts
    CriticNorm critic_norm = CriticNorm::Layer;  // model.critic_norm
    std::uint64_t seed = 0;                  // model.seed
};

struct RunConfig {
    TrainConfig train;
    DataConfig data;
    ModelConfig model;

    bool uses_synthetic_data() const { return data.dir.empty(); }
    int resolution() const;
    /// Loads or renders the full dataset described by `data`.
    ImageDataset load_dataset() const;
    ArchitectureConfig architecture(int attribute_count) const;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& message)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Applies one `key = value` assignment. Throws ConfigError for unknown keys
/// or unparsable values.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value, int line = 0);

/// `key = value` lines; `#` starts a comment; blank lines are ignored.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Every recognised key, for documentation and error messages.
const std::vector<std::string>& run_config_keys();

}  // namespace attgan
