#include "attgan/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <pthread.h>

#include "attgan/checkpoint.hpp"
#include "attgan/evaluator.hpp"
#include "attgan/image.hpp"
#include "attgan/run_config.hpp"
#include "attgan/service.hpp"
#include "attgan/trainer.hpp"

namespace attgan {

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << bytes;
}

std::pair<std::string, std::string> split_assignment(const std::string& text, const char* flag) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError(std::string(flag) + " expects name=value, got '" + text + "'");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

double parse_unit_value(const std::string& name, const std::string& text) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty()) throw ValidationError(name, name + ": '" + text + "' is not a number");
    return v;
}

RunConfig run_config_from(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig config;
    if (!path.empty()) config = load_run_config(path);
    for (const auto& o : overrides) {
        const auto [key, value] = split_assignment(o, "--override");
        apply_config_value(config, key, value);
    }
    return config;
}

struct TrainArgs {
    std::string config, resume, out;
    std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    auto config = run_config_from(a.config, a.overrides);
    if (!a.out.empty()) {
        config.train.checkpoint_dir = a.out;
        if (config.train.log_path.empty()) config.train.log_path = std::filesystem::path(a.out) / "loss.jsonl";
    }
    try {
        config.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, e.what());
    }
    const auto all = config.load_dataset();
    const auto train_set = all.split(Split::Train, config.data.split_seed);
    if (train_set.size() == 0) throw std::runtime_error("training split is empty");

    std::optional<Trainer> trainer;
    if (!a.resume.empty()) {
        trainer.emplace(Trainer::resume(a.resume, config.train));
    } else {
        AttGAN model(config.architecture(static_cast<int>(all.names.size())), all.names, config.model.seed);
        trainer.emplace(std::move(model), config.train);
    }
    out << "training on " << train_set.size() << " images, steps " << trainer->step() << " -> "
        << config.train.max_steps << '\n';
    const auto log = trainer->run(train_set);
    LossReport last_g;
    for (const auto& r : log)
        if (r.phase == "g") last_g = r;
    out << "done at step " << trainer->step() << "; last rec " << last_g.rec << ", cls_g " << last_g.cls_g << '\n';
    if (!config.train.checkpoint_dir.empty())
        out << "checkpoint " << (config.train.checkpoint_dir / "last.ckpt").string() << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint, editor = "model", config, data, judge = "classifier", judge_checkpoint, judge_out;
    std::string report, csv;
    std::vector<std::string> overrides;
    int judge_epochs = 8;
    std::size_t limit = 0;
    std::uint64_t split_seed = 0;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
    std::optional<AttGAN> model;
    if (a.editor == "model") {
        if (a.checkpoint.empty()) throw UsageError("evaluate: --checkpoint is required for the model editor");
        model.emplace(load_model(a.checkpoint));
    }
    ImageDataset all;
    std::uint64_t split_seed = a.split_seed;
    if (!a.data.empty()) {
        const auto names = model ? model->attribute_names() : std::vector<std::string>{};
        all = load_dataset_dir(a.data, names, model ? model->config().resolution : 0);
    } else if (!a.config.empty() || !a.overrides.empty()) {
        const auto config = run_config_from(a.config, a.overrides);
        all = config.load_dataset();
        split_seed = config.data.split_seed;
    } else {
        throw UsageError("evaluate: give --data or --config");
    }
    if (model && (all.names != model->attribute_names() || all.resolution() != model->config().resolution))
        throw UsageError("evaluate: dataset attributes/resolution do not match the checkpoint");

    auto test = all.split(Split::Test, split_seed);
    if (a.limit > 0 && test.size() > a.limit) {
        std::vector<std::size_t> rows(a.limit);
        std::iota(rows.begin(), rows.end(), 0);
        test = test.subset(rows);
    }
    if (test.size() == 0) throw std::runtime_error("evaluation split is empty");

    std::shared_ptr<Judge> judge;
    if (a.judge == "probe") {
        judge = std::make_shared<ProbeJudge>(all.names, all.resolution());
    } else if (!a.judge_checkpoint.empty()) {
        judge = std::make_shared<ClassifierJudge>(ClassifierJudge::load(a.judge_checkpoint));
    } else {
        JudgeTrainConfig jc;
        jc.epochs = a.judge_epochs;
        auto trained = train_independent_classifier(all.split(Split::Train, split_seed),
                                                    all.split(Split::Val, split_seed), jc);
        out << "judge held-out accuracy:";
        for (double v : trained.heldout_accuracy) out << ' ' << v;
        out << '\n';
        if (!a.judge_out.empty()) trained.judge->save(a.judge_out);
        judge = trained.judge;
    }
    if (judge->names() != all.names) throw UsageError("evaluate: judge attributes do not match the dataset");

    std::unique_ptr<Editor> editor;
    if (a.editor == "model") editor = std::make_unique<ModelEditor>(*model);
    else if (a.editor == "identity") editor = std::make_unique<IdentityEditor>();
    else if (a.editor == "oracle") {
        if (!test.is_synthetic()) throw UsageError("evaluate: the oracle editor needs a synthetic dataset");
        editor = std::make_unique<OracleEditor>();
    }
    const auto report = evaluate(*editor, test, *judge);
    out << report.to_table();
    if (!a.report.empty()) write_file(a.report, report.to_json().dump(2) + "\n");
    if (!a.csv.empty()) write_file(a.csv, report.to_csv());
    return kExitOk;
}

struct EditArgs {
    std::string checkpoint, in, out;
    std::vector<std::string> sets, styles;
};

int cmd_edit(const EditArgs& a, std::ostream& out) {
    EditRequest request;
    for (const auto& s : a.sets) {
        const auto [name, value] = split_assignment(s, "--set");
        request.target[name] = parse_unit_value(name, value);
    }
    for (const auto& s : a.styles) {
        const auto [name, value] = split_assignment(s, "--style");
        const double v = parse_unit_value(name, value);
        if (v != static_cast<int>(v)) throw ValidationError(name, name + ": style index must be an integer");
        request.styles[name] = static_cast<int>(v);
    }
    const auto bytes = read_file(a.checkpoint);
    EditService service(model_from_archive(parse_archive(bytes)), checkpoint_id(bytes));
    request.image = read_file(a.in);
    service.validate(request);
    const auto response = service.serve_edit(request);
    write_file(a.out, response.png);
    out << "wrote " << a.out << " (";
    for (std::size_t i = 0; i < response.names.size(); ++i)
        out << (i ? ", " : "") << response.names[i] << '=' << response.attributes[i];
    out << ")\n";
    return kExitOk;
}

struct SynthArgs {
    std::string out, attributes;
    std::size_t count = 1000;
    int resolution = 32;
    double marginal = 0.5;
    int glasses_styles = 1;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SyntheticSpec spec;
    spec.count = a.count;
    spec.resolution = a.resolution;
    spec.marginal = a.marginal;
    spec.glasses_styles = a.glasses_styles;
    if (!a.attributes.empty()) {
        spec.attributes.clear();
        std::stringstream ss(a.attributes);
        for (std::string item; std::getline(ss, item, ',');) spec.attributes.push_back(item);
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    write_synthetic_dataset(generate_synthetic_dataset(spec, a.seed), a.out);
    out << "wrote " << spec.count << " images to " << a.out << '\n';
    return kExitOk;
}

struct ServeArgs {
    std::string checkpoint, host;
    int port = -1;
    std::size_t max_payload = 0;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    auto options = ServiceOptions::from_environment();
    if (!a.host.empty()) options.host = a.host;
    if (a.port >= 0) options.port = a.port;
    if (a.max_payload > 0) options.max_payload = a.max_payload;
    const auto bytes = read_file(a.checkpoint);
    EditService service(model_from_archive(parse_archive(bytes)), checkpoint_id(bytes));

    // SIGTERM/SIGINT are taken synchronously by a watcher thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGINT);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);
    std::atomic<bool> stop{false}, done{false};
    std::thread signal_thread([&] {
        const timespec tick{0, 50'000'000};
        while (!done.load()) {
            if (sigtimedwait(&signals, nullptr, &tick) > 0) stop = true;
        }
    });
    const bool ok = run_server(service, options, stop, [&](int port) {
        out << "listening on http://" << options.host << ':' << port << std::endl;
    });
    done = true;
    signal_thread.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    if (!ok) {
        err << "serve: cannot bind " << options.host << ':' << options.port << '\n';
        return kExitFailure;
    }
    out << "stopped" << std::endl;
    return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"AttGAN facial attribute editing"};
    app.name("attgan");
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train a model from a config file");
    t->add_option("--config", train.config, "key=value config file");
    t->add_option("--override,-o", train.overrides, "extra key=value config assignments");
    t->add_option("--resume", train.resume, "continue from a training checkpoint");
    t->add_option("--out", train.out, "checkpoint directory (also holds loss.jsonl)");

    EvalArgs eval;
    auto* e = app.add_subcommand("evaluate", "editing accuracy and preservation error on the test split");
    e->add_option("--checkpoint", eval.checkpoint, "model checkpoint");
    e->add_option("--editor", eval.editor, "model, identity or oracle")->check(CLI::IsMember({"model", "identity", "oracle"}));
    e->add_option("--config", eval.config, "config file describing the dataset");
    e->add_option("--override,-o", eval.overrides, "extra key=value config assignments");
    e->add_option("--data", eval.data, "dataset directory");
    e->add_option("--split-seed", eval.split_seed, "split seed when --data is used");
    e->add_option("--judge", eval.judge, "classifier or probe")->check(CLI::IsMember({"classifier", "probe"}));
    e->add_option("--judge-checkpoint", eval.judge_checkpoint, "trained judge to reuse");
    e->add_option("--judge-out", eval.judge_out, "save the freshly trained judge here");
    e->add_option("--judge-epochs", eval.judge_epochs, "judge training epochs")->check(CLI::PositiveNumber);
    e->add_option("--limit", eval.limit, "evaluate at most this many test images");
    e->add_option("--report", eval.report, "write the JSON report here");
    e->add_option("--csv", eval.csv, "write per-attribute bar data here");

    EditArgs edit;
    auto* d = app.add_subcommand("edit", "edit one image");
    d->add_option("--checkpoint", edit.checkpoint, "model checkpoint")->required();
    d->add_option("--in", edit.in, "input PNG/JPEG")->required();
    d->add_option("--out", edit.out, "output PNG")->required();
    d->add_option("--set", edit.sets, "attribute=value in [0,1]; others keep their judged values");
    d->add_option("--style", edit.styles, "attribute=style index");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth-data", "render a synthetic dataset");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--count", synth.count, "number of images");
    s->add_option("--resolution", synth.resolution, "32, 48 or 64");
    s->add_option("--attributes", synth.attributes, "comma-separated attribute names");
    s->add_option("--marginal", synth.marginal, "probability of each attribute");
    s->add_option("--glasses-styles", synth.glasses_styles, "glasses colours (1-3)");
    s->add_option("--seed", synth.seed, "generator seed");

    ServeArgs serve;
    auto* v = app.add_subcommand("serve", "HTTP editing service");
    v->add_option("--checkpoint", serve.checkpoint, "model checkpoint")->required();
    v->add_option("--host", serve.host, "bind address (default $ATTGAN_HOST or 127.0.0.1)");
    v->add_option("--port", serve.port, "port, 0 = any (default $ATTGAN_PORT or 8080)");
    v->add_option("--max-payload", serve.max_payload, "request size limit in bytes");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "attgan: " << ex.what() << "\n" << "run 'attgan --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (t->parsed()) return cmd_train(train, out);
        if (e->parsed()) return cmd_evaluate(eval, out);
        if (d->parsed()) return cmd_edit(edit, out);
        if (s->parsed()) return cmd_synth(synth, out);
        if (v->parsed()) return cmd_serve(serve, out, err);
    } catch (const ConfigError& ex) {
        err << "attgan: config: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& ex) {
        err << "attgan: invalid " << ex.field() << ": " << ex.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& ex) {
        err << "attgan: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "attgan: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace attgan
