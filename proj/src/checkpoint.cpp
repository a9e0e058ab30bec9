#include "attgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attgan/seed.hpp"

namespace attgan {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'T', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint8_t dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return 0;
        case torch::kFloat64: return 1;
        case torch::kInt64: return 2;
        case torch::kUInt8: return 3;
        default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
    }
}

torch::ScalarType dtype_from_code(std::uint8_t code) {
    switch (code) {
        case 0: return torch::kFloat32;
        case 1: return torch::kFloat64;
        case 2: return torch::kInt64;
        case 3: return torch::kUInt8;
        default: throw CheckpointError("unknown dtype code " + std::to_string(code));
    }
}

template <class T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }
    std::string_view take(std::size_t n) {
        if (n > bytes_.size() - pos_) throw CheckpointError("truncated checkpoint");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const torch::Tensor& Archive::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

bool Archive::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

std::string serialize_archive(const Archive& archive) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    const auto meta = archive.metadata.dump();
    put<std::uint64_t>(out, meta.size());
    out += meta;
    put<std::uint64_t>(out, archive.tensors.size());
    for (const auto& [name, tensor] : archive.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        const auto t = tensor.detach().contiguous();
        put<std::uint8_t>(out, dtype_code(t.scalar_type()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
        for (auto d : t.sizes()) put<std::int64_t>(out, d);
        put<std::uint64_t>(out, t.nbytes());
        out.append(static_cast<const char*>(t.data_ptr()), t.nbytes());
    }
    return out;
}

Archive parse_archive(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw CheckpointError("not a checkpoint");
    if (auto v = r.get<std::uint32_t>(); v != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
    Archive archive;
    const auto meta_len = r.get<std::uint64_t>();
    try {
        archive.metadata = nlohmann::json::parse(r.take(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
    }
    const auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name(r.take(r.get<std::uint32_t>()));
        const auto dtype = dtype_from_code(r.get<std::uint8_t>());
        const auto rank = r.get<std::uint32_t>();
        std::vector<std::int64_t> dims(rank);
        for (auto& d : dims) d = r.get<std::int64_t>();
        auto t = torch::empty(dims, dtype);
        const auto nbytes = r.get<std::uint64_t>();
        if (nbytes != t.nbytes()) throw CheckpointError("tensor '" + name + "' byte length does not match its shape");
        std::memcpy(t.data_ptr(), r.take(nbytes).data(), nbytes);
        archive.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint tensors");
    return archive;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
    const auto bytes = serialize_archive(archive);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw CheckpointError("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_archive(ss.str());
}

std::string checkpoint_id(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

nlohmann::json model_metadata(const AttGAN& model) {
    return {{"kind", "attgan"}, {"architecture", model.config()}, {"attributes", model.attribute_names()}};
}

Archive model_archive(const AttGAN& model, nlohmann::json extra) {
    Archive a;
    a.metadata = std::move(extra);
    a.metadata.update(model_metadata(model));
    a.tensors = model.named_tensors();
    return a;
}

void load_tensors(const Archive& archive, const NamedTensors& targets, const std::string& prefix) {
    torch::NoGradGuard no_grad;
    for (const auto& [name, target] : targets) {
        const auto& src = archive.tensor(prefix + name);
        if (src.sizes() != target.sizes())
            throw CheckpointError("tensor '" + prefix + name + "' has shape " + c10::str(src.sizes()) +
                                  ", model expects " + c10::str(target.sizes()));
        target.copy_(src);
    }
}

AttGAN model_from_archive(const Archive& archive) {
    const auto& meta = archive.metadata;
    if (meta.value("kind", "") != "attgan") throw CheckpointError("checkpoint does not hold an AttGAN model");
    AttGAN model(meta.at("architecture").get<ArchitectureConfig>(),
                 meta.at("attributes").get<std::vector<std::string>>());
    if (archive.has("enc.conv0.weight")) model.to(archive.tensor("enc.conv0.weight").scalar_type());
    load_tensors(archive, model.named_tensors());
    model.eval();
    return model;
}

void save_model(const std::filesystem::path& path, const AttGAN& model, nlohmann::json extra) {
    write_archive(path, model_archive(model, std::move(extra)));
}

AttGAN load_model(const std::filesystem::path& path) { return model_from_archive(read_archive(path)); }

}  // namespace attgan
