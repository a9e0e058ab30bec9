#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <torch/torch.h>
#include <unistd.h>

#include "attgan/config.hpp"
#include "attgan/dataset.hpp"
#include "attgan/synthetic.hpp"

namespace attgan::test {

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("attgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// 8x8 two-stage model, a few thousand parameters.
inline ArchitectureConfig tiny_config(int attributes, int fc = 8) {
    ArchitectureConfig c;
    c.resolution = 8;
    c.attribute_count = attributes;
    c.encoder = {{4, 4, 2}, {8, 4, 2}};
    c.decoder = {{4, 4, 2}, {3, 4, 2}};
    c.critic = {{4, 4, 2}, {8, 4, 2}};
    c.fc_dim = fc;
    return c;
}

inline ImageDataset synthetic_set(std::size_t count, std::uint64_t seed, int resolution = 32,
                                  int glasses_styles = 1) {
    SyntheticSpec spec;
    spec.count = count;
    spec.resolution = resolution;
    spec.glasses_styles = glasses_styles;
    return render_synthetic(generate_synthetic_dataset(spec, seed));
}

// Synthetic faces average-pooled to 8x8, for the tiny model.
inline ImageDataset tiny_set(std::size_t count, std::uint64_t seed) {
    auto data = synthetic_set(count, seed);
    data.images = torch::avg_pool2d(data.images, 4);
    data.synthetic.clear();
    return data;
}

}  // namespace attgan::test
