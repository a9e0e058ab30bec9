#include "attgan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <torch/torch.h>

#include "attgan/seed.hpp"

namespace attgan {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr Color kGlassesPalette[kMaxGlassesStyles] = {{20, 20, 25}, {250, 250, 120}, {30, 60, 220}};
constexpr Color kDarkHair[] = {{40, 25, 15}, {90, 55, 30}, {60, 40, 25}, {110, 70, 40}};
constexpr Color kBlondHair[] = {{250, 225, 110}, {245, 215, 90}, {235, 205, 75}};
constexpr Color kOpenMouth = {70, 15, 25};
constexpr Color kLips = {190, 90, 95};

int jitter_radius(int resolution) { return std::max(1, resolution / 32); }

// Shape predicates in pixel-center coordinates for a face displaced by (dx, dy).
struct FaceGeometry {
    double r, cx, cy;

    FaceGeometry(int resolution, int dx, int dy)
        : r(resolution), cx(0.5 * resolution + dx), cy(0.54 * resolution + dy) {}

    static bool ellipse(double x, double y, double ex, double ey, double rx, double ry) {
        const double u = (x - ex) / rx, v = (y - ey) / ry;
        return u * u + v * v <= 1.0;
    }
    static bool rect(double x, double y, double x0, double y0, double x1, double y1) {
        return x >= x0 && x <= x1 && y >= y0 && y <= y1;
    }

    bool face(double x, double y) const { return ellipse(x, y, cx, cy, 0.30 * r, 0.36 * r); }
    bool cap(double x, double y) const { return ellipse(x, y, cx, cy - 0.14 * r, 0.34 * r, 0.32 * r); }
    bool bangs(double x, double y) const {
        return rect(x, y, cx - 0.26 * r, cy - 0.36 * r, cx + 0.26 * r, cy - 0.20 * r);
    }
    bool glasses(double x, double y) const {
        const double ey = cy - 0.12 * r;
        return rect(x, y, cx - 0.24 * r, ey - 0.06 * r, cx - 0.04 * r, ey + 0.06 * r) ||
               rect(x, y, cx + 0.04 * r, ey - 0.06 * r, cx + 0.24 * r, ey + 0.06 * r) ||
               rect(x, y, cx - 0.04 * r, ey - 0.015 * r, cx + 0.04 * r, ey + 0.015 * r);
    }
    bool mouth_open(double x, double y) const { return ellipse(x, y, cx, cy + 0.24 * r, 0.12 * r, 0.06 * r); }
    bool mouth_closed(double x, double y) const {
        return rect(x, y, cx - 0.10 * r, cy + 0.24 * r - 0.5, cx + 0.10 * r, cy + 0.24 * r + 0.5);
    }
    bool cheek(double x, double y) const {
        return rect(x, y, cx - 0.22 * r, cy + 0.04 * r, cx - 0.08 * r, cy + 0.14 * r) ||
               rect(x, y, cx + 0.08 * r, cy + 0.04 * r, cx + 0.22 * r, cy + 0.14 * r);
    }
};

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

bool label_on(const std::vector<std::string>& names, const std::vector<float>& labels, const std::string& name) {
    const auto i = index_of(names, name);
    return i < names.size() && labels[i] >= 0.5f;
}

template <class Rng>
std::uint8_t uniform_byte(Rng& rng, int lo, int hi) {
    return static_cast<std::uint8_t>(std::uniform_int_distribution<int>(lo, hi)(rng));
}

double luminance(const std::array<double, 3>& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

}  // namespace

const std::vector<std::string>& synthetic_vocabulary() {
    static const std::vector<std::string> names = {"Eyeglasses", "Bangs", "Pale_Skin", "Mouth_Slightly_Open",
                                                   "Blond_Hair"};
    return names;
}

void SyntheticSpec::validate() const {
    if (resolution != 32 && resolution != 48 && resolution != 64)
        throw std::invalid_argument("synthetic resolution must be 32, 48 or 64 (got " + std::to_string(resolution) +
                                    ")");
    if (attributes.empty()) throw std::invalid_argument("synthetic spec needs at least one attribute");
    const auto& vocab = synthetic_vocabulary();
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        if (std::find(vocab.begin(), vocab.end(), attributes[i]) == vocab.end())
            throw std::invalid_argument("unsupported synthetic attribute '" + attributes[i] + "'");
        if (std::find(attributes.begin(), attributes.begin() + static_cast<long>(i), attributes[i]) !=
            attributes.begin() + static_cast<long>(i))
            throw std::invalid_argument("duplicate synthetic attribute '" + attributes[i] + "'");
    }
    if (!(marginal >= 0.0 && marginal <= 1.0)) throw std::invalid_argument("synthetic marginal must lie in [0,1]");
    if (glasses_styles < 1 || glasses_styles > kMaxGlassesStyles)
        throw std::invalid_argument("glasses_styles must be in [1,3]");
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    SyntheticDataset out;
    out.spec = spec;
    out.seed = seed;
    out.manifest.names = spec.attributes;
    out.manifest.source = "synthetic";
    out.manifest.records.reserve(spec.count);
    out.params.reserve(spec.count);

    const int j = jitter_radius(spec.resolution);
    std::mt19937_64 rng(mix_seed(seed, 0x5eed));
    std::bernoulli_distribution coin(spec.marginal);
    std::uniform_int_distribution<int> jitter(-j, j);

    for (std::size_t i = 0; i < spec.count; ++i) {
        AttributeRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "%06zu.png", i + 1);
        rec.id = id;
        for (std::size_t a = 0; a < spec.attributes.size(); ++a) rec.labels.push_back(coin(rng) ? 1.0f : 0.0f);

        FaceParams p;
        p.dx = jitter(rng);
        p.dy = jitter(rng);
        for (auto& c : p.background) c = uniform_byte(rng, 30, 230);
        p.skin = {uniform_byte(rng, 175, 205), uniform_byte(rng, 120, 150), uniform_byte(rng, 95, 120)};
        p.pale_skin = {uniform_byte(rng, 238, 250), uniform_byte(rng, 222, 235), uniform_byte(rng, 210, 225)};
        p.hair = kDarkHair[std::uniform_int_distribution<int>(0, 3)(rng)];
        p.blond_hair = kBlondHair[std::uniform_int_distribution<int>(0, 2)(rng)];
        p.glasses_style = std::uniform_int_distribution<int>(0, spec.glasses_styles - 1)(rng);

        out.manifest.records.push_back(std::move(rec));
        out.params.push_back(p);
    }
    return out;
}

RgbImage render_face(const FaceParams& params, const std::vector<std::string>& names,
                     const std::vector<float>& labels, int resolution) {
    if (labels.size() != names.size()) throw std::invalid_argument("render_face: label/name count mismatch");
    const FaceGeometry g(resolution, params.dx, params.dy);
    const bool bangs = label_on(names, labels, "Bangs");
    const bool glasses = label_on(names, labels, "Eyeglasses");
    const bool mouth = label_on(names, labels, "Mouth_Slightly_Open");
    const Color glasses_color = kGlassesPalette[std::clamp(params.glasses_style, 0, kMaxGlassesStyles - 1)];
    const Color skin = label_on(names, labels, "Pale_Skin") ? params.pale_skin : params.skin;
    const Color hair = label_on(names, labels, "Blond_Hair") ? params.blond_hair : params.hair;

    RgbImage img(resolution, resolution);
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            Color c = params.background;
            if (g.cap(px, py)) c = hair;
            if (g.face(px, py)) {
                c = skin;
                if (bangs && g.bangs(px, py)) c = hair;
                if (glasses && g.glasses(px, py)) c = glasses_color;
                if (mouth ? g.mouth_open(px, py) : g.mouth_closed(px, py)) c = mouth ? kOpenMouth : kLips;
            }
            std::copy(c.begin(), c.end(), img.at(x, y));
        }
    }
    return img;
}

PixelProbe::PixelProbe(std::vector<std::string> names, int resolution)
    : names_(std::move(names)), resolution_(resolution) {
    const auto& vocab = synthetic_vocabulary();
    for (const auto& n : names_)
        if (std::find(vocab.begin(), vocab.end(), n) == vocab.end())
            throw std::invalid_argument("PixelProbe: unsupported attribute '" + n + "'");

    // A pixel belongs to a probe region when it is inside the target shape and
    // outside every other glyph for all admissible jitter offsets.
    const int j = jitter_radius(resolution);
    auto build = [&](auto&& include, auto&& exclude) {
        Region region;
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) {
                bool ok = true;
                for (int dy = -j; dy <= j && ok; ++dy)
                    for (int dx = -j; dx <= j && ok; ++dx) {
                        const FaceGeometry g(resolution, dx, dy);
                        const double px = x + 0.5, py = y + 0.5;
                        ok = include(g, px, py) && !exclude(g, px, py);
                    }
                if (ok) region.pixels.emplace_back(x, y);
            }
        if (region.pixels.empty()) throw std::logic_error("PixelProbe: empty probe region");
        return region;
    };
    auto any_glyph = [](const FaceGeometry& g, double x, double y) {
        return g.bangs(x, y) || g.glasses(x, y) || g.mouth_open(x, y) || g.mouth_closed(x, y);
    };
    cheeks_ = build([](const FaceGeometry& g, double x, double y) { return g.face(x, y) && g.cheek(x, y); },
                    any_glyph);
    forehead_ = build([](const FaceGeometry& g, double x, double y) { return g.face(x, y) && g.bangs(x, y); },
                      [](const FaceGeometry& g, double x, double y) {
                          return g.glasses(x, y) || g.mouth_open(x, y) || g.mouth_closed(x, y);
                      });
    eyes_ = build([](const FaceGeometry& g, double x, double y) { return g.face(x, y) && g.glasses(x, y); },
                  [](const FaceGeometry& g, double x, double y) {
                      return g.bangs(x, y) || g.mouth_open(x, y) || g.mouth_closed(x, y);
                  });
    mouth_ = build([](const FaceGeometry& g, double x, double y) { return g.face(x, y) && g.mouth_open(x, y); },
                   [](const FaceGeometry& g, double x, double y) { return g.bangs(x, y) || g.glasses(x, y); });
    hair_ = build([](const FaceGeometry& g, double x, double y) { return g.cap(x, y); },
                  [](const FaceGeometry& g, double x, double y) { return g.face(x, y); });
}

std::vector<float> PixelProbe::labels(const RgbImage& image) const {
    if (image.width != resolution_ || image.height != resolution_ || image.channels != 3)
        throw std::invalid_argument("PixelProbe: image does not match probe resolution");

    auto mean = [&](const Region& r) {
        std::array<double, 3> m{};
        for (auto [x, y] : r.pixels)
            for (int c = 0; c < 3; ++c) m[c] += image.at(x, y)[c];
        for (auto& v : m) v /= static_cast<double>(r.pixels.size());
        return m;
    };
    const auto skin = mean(cheeks_);
    // Fraction of region pixels whose L1 distance to the skin estimate exceeds 60.
    auto off_skin = [&](const Region& r) {
        std::size_t n = 0;
        for (auto [x, y] : r.pixels) {
            const auto* p = image.at(x, y);
            const double d = std::abs(p[0] - skin[0]) + std::abs(p[1] - skin[1]) + std::abs(p[2] - skin[2]);
            n += d > 60.0;
        }
        return static_cast<double>(n) / static_cast<double>(r.pixels.size());
    };
    auto dark = [&](const Region& r) {
        std::size_t n = 0;
        for (auto [x, y] : r.pixels) {
            const auto* p = image.at(x, y);
            n += luminance({double(p[0]), double(p[1]), double(p[2])}) < 90.0;
        }
        return static_cast<double>(n) / static_cast<double>(r.pixels.size());
    };

    std::vector<float> out;
    out.reserve(names_.size());
    for (const auto& n : names_) {
        bool on = false;
        if (n == "Eyeglasses")
            on = off_skin(eyes_) > 0.5;
        else if (n == "Bangs")
            on = off_skin(forehead_) > 0.5;
        else if (n == "Pale_Skin")
            on = luminance(skin) > 200.0;
        else if (n == "Mouth_Slightly_Open")
            on = dark(mouth_) > 0.5;
        else if (n == "Blond_Hair")
            on = luminance(mean(hair_)) > 130.0;
        out.push_back(on ? 1.0f : 0.0f);
    }
    return out;
}

torch::Tensor PixelProbe::predict(const torch::Tensor& images) const {
    const auto batch = images.size(0);
    auto out = torch::zeros({batch, static_cast<long>(names_.size())});
    for (long i = 0; i < batch; ++i) {
        const auto labels = this->labels(tensor_to_image(images[i]));
        for (std::size_t a = 0; a < labels.size(); ++a) out[i][static_cast<long>(a)] = labels[a];
    }
    return out;
}

nlohmann::json to_json(const SyntheticSpec& spec, std::uint64_t seed) {
    return {{"count", spec.count},         {"resolution", spec.resolution},
            {"attributes", spec.attributes}, {"marginal", spec.marginal},
            {"glasses_styles", spec.glasses_styles}, {"seed", seed}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t& seed) {
    SyntheticSpec spec;
    spec.count = j.at("count").get<std::size_t>();
    spec.resolution = j.at("resolution").get<int>();
    spec.attributes = j.at("attributes").get<std::vector<std::string>>();
    spec.marginal = j.at("marginal").get<double>();
    spec.glasses_styles = j.at("glasses_styles").get<int>();
    seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

}  // namespace attgan
