#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/types.h>

namespace attgan {

/// Interleaved 8-bit image, row-major, `channels` values per pixel.
struct RgbImage {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h, int c = 3) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0) {}

    std::uint8_t* at(int x, int y) { return data.data() + (std::size_t(y) * width + x) * channels; }
    const std::uint8_t* at(int x, int y) const { return data.data() + (std::size_t(y) * width + x) * channels; }
};

/// Decodes PNG/JPEG bytes into RGB (alpha dropped, grayscale kept as 1 channel).
RgbImage decode_image(const std::string& bytes);
RgbImage read_image(const std::filesystem::path& path);
std::string encode_png(const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Center-crop to a square, resize to `resolution`, and map v -> v/127.5 - 1.
/// Returns a float tensor of shape [3, resolution, resolution].
torch::Tensor preprocess_image(const RgbImage& image, int resolution);

/// Inverse affine map of a [3,H,W] tensor in [-1,1] back to 8-bit RGB.
RgbImage tensor_to_image(const torch::Tensor& chw);

}  // namespace attgan
