#include "attgan/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace attgan {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + text + "'");
    return value;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw std::invalid_argument("expected true/false, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto real = [&](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) { member(c) = parse_number<double>(v); };
        };
        auto integer = [&](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) {
                member(c) = parse_number<std::remove_reference_t<decltype(member(c))>>(v);
            };
        };
        auto flag = [&](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) { member(c) = parse_bool(v); };
        };
        real("lambda_rec", [](RunConfig& c) -> double& { return c.train.weights.rec; });
        real("lambda_cls_g", [](RunConfig& c) -> double& { return c.train.weights.cls_g; });
        real("lambda_cls_c", [](RunConfig& c) -> double& { return c.train.weights.cls_c; });
        real("lambda_gp", [](RunConfig& c) -> double& { return c.train.weights.gp; });
        real("lambda_info", [](RunConfig& c) -> double& { return c.train.weights.info; });
        real("lambda_indep", [](RunConfig& c) -> double& { return c.train.weights.indep; });
        real("lr", [](RunConfig& c) -> double& { return c.train.lr; });
        real("beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
        real("beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
        integer("batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; });
        integer("critic_steps", [](RunConfig& c) -> int& { return c.train.critic_steps; });
        integer("max_steps", [](RunConfig& c) -> long long& { return c.train.max_steps; });
        integer("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
        integer("checkpoint_every", [](RunConfig& c) -> long long& { return c.train.checkpoint_every; });
        flag("use_cls", [](RunConfig& c) -> bool& { return c.train.ablation.use_cls; });
        flag("use_rec", [](RunConfig& c) -> bool& { return c.train.ablation.use_rec; });
        flag("use_adv", [](RunConfig& c) -> bool& { return c.train.ablation.use_adv; });
        flag("use_attr_indep_constraint", [](RunConfig& c) -> bool& { return c.train.ablation.use_attr_indep_constraint; });
        flag("flip", [](RunConfig& c) -> bool& { return c.train.flip; });
        t["checkpoint_dir"] = [](RunConfig& c, const std::string& v) { c.train.checkpoint_dir = v; };
        t["log_path"] = [](RunConfig& c, const std::string& v) { c.train.log_path = v; };

        t["data.dir"] = [](RunConfig& c, const std::string& v) { c.data.dir = v; };
        t["data.attributes"] = [](RunConfig& c, const std::string& v) { c.data.attributes = parse_list(v); };
        integer("data.resolution", [](RunConfig& c) -> int& { return c.data.resolution; });
        integer("data.split_seed", [](RunConfig& c) -> std::uint64_t& { return c.data.split_seed; });
        integer("synthetic.count", [](RunConfig& c) -> std::size_t& { return c.data.synthetic.count; });
        integer("synthetic.resolution", [](RunConfig& c) -> int& { return c.data.synthetic.resolution; });
        t["synthetic.attributes"] = [](RunConfig& c, const std::string& v) { c.data.synthetic.attributes = parse_list(v); };
        real("synthetic.marginal", [](RunConfig& c) -> double& { return c.data.synthetic.marginal; });
        integer("synthetic.glasses_styles", [](RunConfig& c) -> int& { return c.data.synthetic.glasses_styles; });
        integer("synthetic.seed", [](RunConfig& c) -> std::uint64_t& { return c.data.synthetic_seed; });

        real("model.width", [](RunConfig& c) -> double& { return c.model.width; });
        integer("model.skip_count", [](RunConfig& c) -> int& { return c.model.skip_count; });
        integer("model.inject_count", [](RunConfig& c) -> int& { return c.model.inject_count; });
        t["model.style_counts"] = [](RunConfig& c, const std::string& v) {
            c.model.style_counts.clear();
            for (const auto& item : parse_list(v)) c.model.style_counts.push_back(parse_number<int>(item));
        };
        t["model.critic_norm"] = [](RunConfig& c, const std::string& v) { c.model.critic_norm = critic_norm_from_string(v); };
        integer("model.seed", [](RunConfig& c) -> std::uint64_t& { return c.model.seed; });
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, setter] : setters()) k.push_back(key);
        return k;
    }();
    return keys;
}

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value, int line) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(line, "unknown key '" + key + "'");
    try {
        it->second(config, value);
    } catch (const std::exception& e) {
        throw ConfigError(line, key + ": " + e.what());
    }
}

RunConfig parse_run_config(std::istream& in, RunConfig base) {
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const auto key = trim(std::string_view(text).substr(0, eq));
        const auto value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "missing key");
        apply_config_value(base, key, value, line_no);
    }
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file " + path.string());
    return parse_run_config(in, std::move(base));
}

int RunConfig::resolution() const {
    if (data.resolution > 0) return data.resolution;
    return uses_synthetic_data() ? data.synthetic.resolution : 128;
}

ImageDataset RunConfig::load_dataset() const {
    if (uses_synthetic_data()) {
        auto spec = data.synthetic;
        if (data.resolution > 0 && data.resolution != spec.resolution)
            throw ConfigError(0, "data.resolution differs from synthetic.resolution");
        return render_synthetic(generate_synthetic_dataset(spec, data.synthetic_seed));
    }
    return load_dataset_dir(data.dir, data.attributes, resolution());
}

ArchitectureConfig RunConfig::architecture(int attribute_count) const {
    auto arch = ArchitectureConfig::for_resolution(resolution(), attribute_count);
    if (model.width != 1.0) arch = arch.scaled(model.width);
    arch.skip_count = model.skip_count;
    arch.inject_count = model.inject_count;
    arch.style_counts = model.style_counts;
    arch.critic_norm = model.critic_norm;
    arch.validate();
    return arch;
}

}  // namespace attgan
