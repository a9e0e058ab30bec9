#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/types.h>

#include "attgan/attributes.hpp"
#include "attgan/synthetic.hpp"

namespace attgan {

struct ImageSample {
    torch::Tensor pixels;  // [3,H,W] in [-1,1]
    AttributeVector attributes;
    std::string id;
};

/// In-memory image set with contiguous tensors for batching.
struct ImageDataset {
    std::vector<std::string> names;
    std::vector<std::string> ids;
    torch::Tensor images;  // [N,3,R,R] float32 in [-1,1]
    torch::Tensor labels;  // [N,n] float32 in {0,1}
    /// Render parameters, present only for procedurally generated sets.
    std::vector<FaceParams> synthetic;

    std::size_t size() const { return ids.size(); }
    int resolution() const { return images.defined() ? static_cast<int>(images.size(-1)) : 0; }
    bool is_synthetic() const { return !synthetic.empty(); }

    ImageSample sample(std::size_t i) const;
    ImageDataset subset(const std::vector<std::size_t>& rows) const;
    ImageDataset split(Split which, std::uint64_t seed = 0) const;
};

ImageDataset render_synthetic(const SyntheticDataset& synthetic);

/// Loads `annotations` (CelebA layout) and the referenced images below `image_dir`.
ImageDataset load_annotated_images(const std::filesystem::path& annotations, const std::filesystem::path& image_dir,
                                   const std::vector<std::string>& selected_names, int resolution);

/// Writes `<dir>/images/<id>` PNGs, `<dir>/list_attr_celeba.txt` and the
/// generator settings in `<dir>/synthetic.json`.
void write_synthetic_dataset(const SyntheticDataset& synthetic, const std::filesystem::path& dir);

/// Loads a dataset directory laid out as above. When `synthetic.json` is
/// present the render parameters are regenerated and checked against the
/// annotations, which makes the oracle editor available.
ImageDataset load_dataset_dir(const std::filesystem::path& dir, const std::vector<std::string>& selected_names,
                              int resolution);

}  // namespace attgan
