#include "attgan/dataset.hpp"

#include <fstream>
#include <optional>
#include <stdexcept>

#include <torch/torch.h>

#include "attgan/image.hpp"

namespace attgan {

ImageSample ImageDataset::sample(std::size_t i) const {
    const auto row = static_cast<long>(i);
    auto l = labels[row].contiguous();
    std::vector<float> values(l.data_ptr<float>(), l.data_ptr<float>() + l.numel());
    return {images[row], AttributeVector(names, std::move(values)), ids.at(i)};
}

ImageDataset ImageDataset::subset(const std::vector<std::size_t>& rows) const {
    ImageDataset out;
    out.names = names;
    std::vector<std::int64_t> idx;
    idx.reserve(rows.size());
    for (auto r : rows) {
        idx.push_back(static_cast<std::int64_t>(r));
        out.ids.push_back(ids.at(r));
        if (!synthetic.empty()) out.synthetic.push_back(synthetic.at(r));
    }
    auto index = torch::tensor(idx, torch::kLong);
    out.images = images.index_select(0, index);
    out.labels = labels.index_select(0, index);
    return out;
}

ImageDataset ImageDataset::split(Split which, std::uint64_t seed) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (split_of(ids[i], seed) == which) rows.push_back(i);
    return subset(rows);
}

ImageDataset render_synthetic(const SyntheticDataset& synthetic) {
    const auto& m = synthetic.manifest;
    const int r = synthetic.spec.resolution;
    ImageDataset out;
    out.names = m.names;
    out.synthetic = synthetic.params;
    out.images = torch::empty({static_cast<long>(m.records.size()), 3, r, r});
    out.labels = torch::empty({static_cast<long>(m.records.size()), static_cast<long>(m.names.size())});
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& rec = m.records[i];
        out.ids.push_back(rec.id);
        out.images[static_cast<long>(i)] = preprocess_image(render_face(synthetic.params[i], m.names, rec.labels, r), r);
        out.labels[static_cast<long>(i)] = torch::tensor(rec.labels);
    }
    return out;
}

ImageDataset load_annotated_images(const std::filesystem::path& annotations, const std::filesystem::path& image_dir,
                                   const std::vector<std::string>& selected_names, int resolution) {
    std::ifstream in(annotations);
    if (!in) throw std::runtime_error("cannot open annotations " + annotations.string());
    const auto manifest = parse_attribute_annotations(in, selected_names);
    if (manifest.records.empty()) throw std::runtime_error("annotation file lists no images");

    ImageDataset out;
    out.names = manifest.names;
    out.images = torch::empty({static_cast<long>(manifest.records.size()), 3, resolution, resolution});
    out.labels = torch::empty({static_cast<long>(manifest.records.size()), static_cast<long>(manifest.names.size())});
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& rec = manifest.records[i];
        out.ids.push_back(rec.id);
        out.images[static_cast<long>(i)] = preprocess_image(read_image(image_dir / rec.id), resolution);
        out.labels[static_cast<long>(i)] = torch::tensor(rec.labels);
    }
    return out;
}

void write_synthetic_dataset(const SyntheticDataset& synthetic, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    const auto& m = synthetic.manifest;
    for (std::size_t i = 0; i < m.records.size(); ++i)
        write_png(dir / "images" / m.records[i].id,
                  render_face(synthetic.params[i], m.names, m.records[i].labels, synthetic.spec.resolution));
    std::ofstream out(dir / "list_attr_celeba.txt");
    if (!out) throw std::runtime_error("cannot write annotations in " + dir.string());
    out << format_attribute_annotations(m);
    std::ofstream meta(dir / "synthetic.json");
    meta << to_json(synthetic.spec, synthetic.seed).dump(2) << '\n';
}

ImageDataset load_dataset_dir(const std::filesystem::path& dir, const std::vector<std::string>& selected_names,
                              int resolution) {
    const auto meta_path = dir / "synthetic.json";
    std::optional<SyntheticSpec> spec;
    std::uint64_t seed = 0;
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        spec = synthetic_spec_from_json(nlohmann::json::parse(in), seed);
        if (resolution <= 0) resolution = spec->resolution;
    }
    if (resolution <= 0) throw std::invalid_argument("no resolution given for " + dir.string());
    auto data = load_annotated_images(dir / "list_attr_celeba.txt", dir / "images", selected_names, resolution);
    if (!spec || resolution != spec->resolution || data.names != spec->attributes) return data;

    const auto synthetic = generate_synthetic_dataset(*spec, seed);
    if (synthetic.manifest.records.size() != data.size())
        throw std::runtime_error(meta_path.string() + " does not describe the images in " + dir.string());
    for (std::size_t i = 0; i < data.size(); ++i)
        if (synthetic.manifest.records[i].id != data.ids[i] || synthetic.manifest.records[i].labels != data.sample(i).attributes.values())
            throw std::runtime_error("synthetic render parameters do not match " + data.ids[i]);
    data.synthetic = synthetic.params;
    return data;
}

}  // namespace attgan
