#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <signal.h>
#include <sys/wait.h>

#include "attgan/cli.hpp"
#include "attgan/image.hpp"
#include "support.hpp"

using namespace attgan;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

// Small synthetic run shared by the CLI cases.
struct Workspace {
    test::TempDir dir{"cli"};
    std::string config = (dir / "run.cfg").string();
    std::string ckpt = (dir / "out" / "last.ckpt").string();

    Workspace() {
        std::ofstream(config) << "synthetic.count = 120\n"
                                 "synthetic.seed = 4\n"
                                 "model.width = 0.125\n"
                                 "batch_size = 4\n"
                                 "critic_steps = 2\n"
                                 "max_steps = 6\n"
                                 "seed = 2\n";
        const auto r = run({"train", "--config", config, "--out", (dir / "out").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const auto face = test::synthetic_set(2, 1);
        write_png(dir / "face.png", tensor_to_image(face.images[0]));
    }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

int exec_cli(const std::vector<std::string>& args) {
    std::string cmd = ATTGAN_CLI_PATH;
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("train writes a checkpoint and a loss log") {
    auto& w = workspace();
    CHECK(std::filesystem::exists(w.ckpt));
    std::ifstream log(w.dir / "out" / "loss.jsonl");
    int lines = 0;
    for (std::string line; std::getline(log, line);) {
        CHECK(nlohmann::json::parse(line).contains("phase"));
        ++lines;
    }
    CHECK(lines == 6);
}

TEST_CASE("train resumes and honours overrides") {
    auto& w = workspace();
    const auto out = (w.dir / "resumed").string();
    const auto r = run({"train", "--config", w.config, "--resume", w.ckpt, "-o", "max_steps=9", "--out", out});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("steps 6 -> 9") != std::string::npos);
}

TEST_CASE("edit writes the output image") {
    auto& w = workspace();
    const auto out = (w.dir / "edited.png").string();
    const auto r = run({"edit", "--checkpoint", w.ckpt, "--in", (w.dir / "face.png").string(), "--out", out, "--set",
                        "Eyeglasses=1", "--set", "Bangs=0.5"});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(read_image(out).width == 32);
    CHECK(r.out.find("Eyeglasses=1") != std::string::npos);
}

TEST_CASE("evaluate with each editor") {
    auto& w = workspace();
    const auto report = (w.dir / "report.json").string();
    const auto csv = (w.dir / "bars.csv").string();
    auto r = run({"evaluate", "--checkpoint", w.ckpt, "--config", w.config, "--judge", "probe", "--report", report,
                  "--csv", csv});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(nlohmann::json::parse(std::ifstream(report))["attributes"].size() == 4);
    CHECK(std::filesystem::file_size(csv) > 0);

    r = run({"evaluate", "--editor", "oracle", "--config", w.config, "--judge", "probe", "--report", report});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(nlohmann::json::parse(std::ifstream(report))["mean_accuracy"].get<double>() >= 0.99);

    const auto judge = (w.dir / "judge.ckpt").string();
    r = run({"evaluate", "--editor", "identity", "--config", w.config, "--judge-epochs", "1", "--judge-out", judge,
             "--limit", "5"});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("samples: 5") != std::string::npos);
    r = run({"evaluate", "--checkpoint", w.ckpt, "--config", w.config, "--judge-checkpoint", judge});
    CHECK_MESSAGE(r.code == 0, r.err);
}

TEST_CASE("synth-data writes a loadable directory") {
    test::TempDir dir("synth");
    const auto r = run({"synth-data", "--out", dir.path().string(), "--count", "12", "--attributes", "Eyeglasses,Bangs",
                        "--glasses-styles", "2", "--seed", "3"});
    CHECK_MESSAGE(r.code == 0, r.err);
    const auto data = load_dataset_dir(dir.path(), {}, 0);
    CHECK(data.size() == 12);
    CHECK(data.names == std::vector<std::string>{"Eyeglasses", "Bangs"});
    CHECK(data.is_synthetic());
    CHECK(run({"synth-data", "--out", dir.path().string(), "--resolution", "40"}).code == 2);
}

TEST_CASE("usage errors exit with 2") {
    auto& w = workspace();
    const auto face = (w.dir / "face.png").string();
    const auto out = (w.dir / "never.png").string();
    CHECK(run({"edit", "--checkpoint", w.ckpt, "--in", face, "--out", out, "--set", "Eyeglasses=1.5"}).code == 2);
    CHECK(run({"edit", "--checkpoint", w.ckpt, "--in", face, "--out", out, "--set", "Wings=1"}).code == 2);
    CHECK(run({"edit", "--checkpoint", w.ckpt, "--in", face, "--out", out, "--set", "Bangs"}).code == 2);
    CHECK(run({"edit", "--checkpoint", w.ckpt, "--in", face, "--out", out, "--style", "Eyeglasses=1"}).code == 2);
    CHECK_FALSE(std::filesystem::exists(out));
    CHECK(run({"paint"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"edit", "--in", face}).code == 2);
    CHECK(run({"evaluate", "--editor", "magic"}).code == 2);
    CHECK(run({"evaluate", "--config", w.config}).code == 2);

    const auto bad_cfg = (w.dir / "bad.cfg").string();
    std::ofstream(bad_cfg) << "max_steps = lots\n";
    const auto r = run({"train", "--config", bad_cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK(run({"train", "-o", "batch_size=1"}).code == 2);
    CHECK(run({"train", "-o", "no_equals_sign"}).code == 2);
}

TEST_CASE("runtime failures exit with 1") {
    auto& w = workspace();
    const auto out = (w.dir / "never.png").string();
    CHECK(run({"edit", "--checkpoint", (w.dir / "missing.ckpt").string(), "--in", (w.dir / "face.png").string(),
               "--out", out}).code == 1);
    CHECK(run({"edit", "--checkpoint", w.ckpt, "--in", (w.dir / "missing.png").string(), "--out", out}).code == 1);
    CHECK(run({"train", "--config", w.config, "--resume", (w.dir / "missing.ckpt").string()}).code == 1);
}

TEST_CASE("help exits with 0") {
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("synth-data") != std::string::npos);
    CHECK(run({"edit", "--help"}).code == 0);
}

TEST_CASE("installed binary exit codes") {
    auto& w = workspace();
    CHECK(exec_cli({"--help"}) == 0);
    CHECK(exec_cli({"paint"}) == 2);
    CHECK(exec_cli({"edit", "--checkpoint", w.ckpt, "--in", (w.dir / "face.png").string(), "--out",
                    (w.dir / "x.png").string(), "--set", "Eyeglasses=1.5"}) == 2);
    CHECK(exec_cli({"edit", "--checkpoint", (w.dir / "missing.ckpt").string(), "--in", "a.png", "--out", "b.png"}) == 1);
}

TEST_CASE("serve answers requests and stops on SIGTERM") {
    auto& w = workspace();
    const auto log = w.dir / "serve.log";
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        std::freopen(log.c_str(), "w", stdout);
        execl(ATTGAN_CLI_PATH, ATTGAN_CLI_PATH, "serve", "--checkpoint", w.ckpt.c_str(), "--port", "0", nullptr);
        _exit(127);
    }
    int port = 0;
    for (int i = 0; i < 400 && port == 0; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
        std::ifstream in(log);
        std::string line;
        if (std::getline(in, line)) {
            const auto colon = line.rfind(':');
            if (line.starts_with("listening on") && colon != std::string::npos) port = std::stoi(line.substr(colon + 1));
        }
    }
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}
