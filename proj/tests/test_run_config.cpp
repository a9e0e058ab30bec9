#include <sstream>

#include <doctest.h>

#include "attgan/run_config.hpp"

using namespace attgan;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_run_config(in);
}

int error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_CASE("defaults follow the reference settings") {
    const RunConfig c;
    CHECK(c.train.weights.rec == 100);
    CHECK(c.train.weights.cls_g == 10);
    CHECK(c.train.weights.cls_c == 1);
    CHECK(c.train.weights.gp == 10);
    CHECK(c.train.lr == 0.0002);
    CHECK(c.train.beta1 == 0.5);
    CHECK(c.train.beta2 == 0.999);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train.critic_steps == 5);
    CHECK(c.uses_synthetic_data());
}

TEST_CASE("key value files with comments") {
    const auto c = parse(
        "# desk run\n"
        "lambda_rec = 50\n"
        "\n"
        "max_steps=120   # short\n"
        "use_cls = false\n"
        "flip = true\n"
        "synthetic.count = 64\n"
        "synthetic.attributes = Eyeglasses,Bangs\n"
        "synthetic.glasses_styles = 3\n"
        "model.width = 0.25\n"
        "model.style_counts = 3,1\n"
        "model.critic_norm = instance\n"
        "data.split_seed = 4\n");
    CHECK(c.train.weights.rec == 50);
    CHECK(c.train.max_steps == 120);
    CHECK_FALSE(c.train.ablation.use_cls);
    CHECK(c.train.flip);
    CHECK(c.data.synthetic.count == 64);
    CHECK(c.data.synthetic.attributes == std::vector<std::string>{"Eyeglasses", "Bangs"});
    CHECK(c.model.style_counts == std::vector<int>{3, 1});
    CHECK(c.model.critic_norm == CriticNorm::Instance);
    CHECK(c.data.split_seed == 4);
    const auto arch = c.architecture(2);
    CHECK(arch.resolution == 32);
    CHECK(arch.style_counts == std::vector<int>{3, 1});
    CHECK(arch.encoder.front().channels == 16);
}

TEST_CASE("config errors report their line") {
    CHECK(error_line("max_steps = 3\nbogus_key = 1\n") == 2);
    CHECK(error_line("\n\nbatch_size = many\n") == 3);
    CHECK(error_line("use_rec = maybe\n") == 1);
    CHECK(error_line("lr 0.1\n") == 1);
    CHECK(error_line("model.critic_norm = batch\n") == 1);
    CHECK(error_line("max_steps = 10\n") == -1);
    CHECK_THROWS_AS(load_run_config("/nonexistent/attgan.cfg"), ConfigError);
}

TEST_CASE("every documented key is accepted") {
    RunConfig c;
    auto sample = [](const std::string& key) -> std::string {
        if (key == "data.dir") return "";
        if (key == "model.critic_norm") return "none";
        if (key.ends_with("attributes")) return "Bangs";
        return "1";
    };
    for (const auto& key : run_config_keys()) {
        CAPTURE(key);
        CHECK_NOTHROW(apply_config_value(c, key, sample(key)));
    }
    CHECK(run_config_keys().size() >= 30);
}

TEST_CASE("synthetic data loads from config") {
    const auto c = parse("synthetic.count = 20\nsynthetic.seed = 3\n");
    const auto data = c.load_dataset();
    CHECK(data.size() == 20);
    CHECK(data.is_synthetic());
    CHECK(c.resolution() == 32);
}
