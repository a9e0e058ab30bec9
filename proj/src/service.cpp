#include "attgan/service.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <thread>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <torch/torch.h>

#include "attgan/image.hpp"
#include "attgan/style.hpp"

namespace attgan {

namespace b64 = boost::beast::detail::base64;

std::string base64_encode(std::string_view bytes) {
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::string base64_decode(std::string_view text) {
    // Tolerate data URLs from browsers.
    if (text.starts_with("data:")) {
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) throw std::invalid_argument("malformed data URL");
        text.remove_prefix(comma + 1);
    }
    // The decoder stops at '=' so padding is checked here.
    std::size_t padding = 0;
    while (padding < 2 && text.size() > padding && text[text.size() - 1 - padding] == '=') ++padding;
    if (padding > 0 && text.size() % 4 != 0) throw std::invalid_argument("invalid base64 padding");
    text.remove_suffix(padding);
    std::string out(b64::decoded_size(text.size() + 3), '\0');  // room for an unpadded tail
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    if (read != text.size()) throw std::invalid_argument("invalid base64 at offset " + std::to_string(read));
    out.resize(written);
    return out;
}

nlohmann::json EditResponse::to_json() const {
    nlohmann::json attrs = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        nlohmann::json a = {{"name", names[i]}, {"value", attributes[i]}};
        if (!styles.empty() && styles[i] >= 0) a["style"] = styles[i];
        attrs.push_back(std::move(a));
    }
    return {{"image", base64_encode(png)}, {"attributes", attrs}, {"latency_ms", latency_ms}};
}

EditRequest parse_edit_request(const nlohmann::json& body) {
    if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
    EditRequest r;
    if (!body.contains("image") || !body["image"].is_string())
        throw ValidationError("image", "image must be a base64 string");
    try {
        r.image = base64_decode(body["image"].get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ValidationError("image", e.what());
    }
    if (body.contains("target")) {
        if (!body["target"].is_object()) throw ValidationError("target", "target must be an object");
        for (const auto& [name, v] : body["target"].items()) {
            if (!v.is_number()) throw ValidationError("target." + name, "value must be a number");
            r.target[name] = v.get<double>();
        }
    }
    if (body.contains("styles")) {
        if (!body["styles"].is_object()) throw ValidationError("styles", "styles must be an object");
        for (const auto& [name, v] : body["styles"].items()) {
            if (!v.is_number_integer()) throw ValidationError("styles." + name, "style index must be an integer");
            r.styles[name] = v.get<int>();
        }
    }
    for (const auto& [key, v] : body.items())
        if (key != "image" && key != "target" && key != "styles")
            throw ValidationError(key, "unknown field '" + key + "'");
    return r;
}

EditService::EditService(AttGAN model, std::string checkpoint_id)
    : model_(std::move(model)), checkpoint_id_(std::move(checkpoint_id)) {
    model_.eval();
}

namespace {

int index_in(const std::vector<std::string>& names, const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

}  // namespace

void EditService::validate(const EditRequest& request) const {
    const auto& names = model_.attribute_names();
    if (request.image.empty()) throw ValidationError("image", "image payload is empty");
    for (const auto& [name, v] : request.target) {
        if (index_in(names, name) < 0) throw ValidationError("target." + name, "unknown attribute '" + name + "'");
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError("target." + name, "value " + std::to_string(v) + " outside [0,1]");
    }
    const auto& counts = model_.config().style_counts;
    for (const auto& [name, s] : request.styles) {
        const int i = index_in(names, name);
        if (i < 0) throw ValidationError("styles." + name, "unknown attribute '" + name + "'");
        const int n = counts.empty() ? 1 : counts[static_cast<std::size_t>(i)];
        if (s < 0 || s >= n)
            throw ValidationError("styles." + name, "style index " + std::to_string(s) + " not in [0," +
                                                        std::to_string(n) + ")");
    }
}

EditResponse EditService::serve_edit(const EditRequest& request) const {
    const auto start = std::chrono::steady_clock::now();
    validate(request);
    RgbImage decoded;
    try {
        decoded = decode_image(request.image);
    } catch (const std::exception& e) {
        throw ValidationError("image", std::string("cannot decode image: ") + e.what());
    }
    if (decoded.channels != 3) throw ValidationError("image", "expected an RGB image");

    torch::NoGradGuard no_grad;
    const auto& names = model_.attribute_names();
    const auto& counts = model_.config().style_counts;
    const auto x = preprocess_image(decoded, model_.config().resolution).unsqueeze(0).to(model_.dtype());
    const auto z = model_.encode(x);

    auto b = (model_.classify_attributes(x) > 0.5).to(model_.dtype());
    for (const auto& [name, v] : request.target) b[0][index_in(names, name)] = v;

    EditResponse response;
    response.names = names;
    torch::Tensor out;
    if (model_.config().style_enabled() && !request.styles.empty()) {
        // Requested styles become one-hot blocks; the rest stay uniform.
        auto style = uniform_style(counts, 1).to(model_.dtype());
        response.styles.assign(names.size(), -1);
        int offset = 0;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto it = request.styles.find(names[i]);
            if (it != request.styles.end()) {
                style.slice(1, offset, offset + counts[i]).zero_();
                style[0][offset + it->second] = 1.0;
                response.styles[i] = it->second;
            }
            offset += counts[i];
        }
        out = model_.decode_with_style(z, style, b);
    } else {
        out = model_.decode(z, b);
    }
    response.png = encode_png(tensor_to_image(out[0].to(torch::kFloat)));
    const auto bf = b[0].to(torch::kDouble).contiguous();
    response.attributes.assign(bf.data_ptr<double>(), bf.data_ptr<double>() + bf.numel());
    response.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return response;
}

nlohmann::json EditService::health() const { return {{"status", "ok"}, {"checkpoint_id", checkpoint_id_}}; }

nlohmann::json EditService::attributes() const {
    const auto& names = model_.attribute_names();
    const auto& counts = model_.config().style_counts;
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
        list.push_back({{"name", names[i]}, {"styles", counts.empty() ? 1 : counts[i]}});
    return {{"attributes", list}, {"resolution", model_.config().resolution}};
}

ServiceOptions ServiceOptions::from_environment() {
    ServiceOptions o;
    if (const char* host = std::getenv("ATTGAN_HOST"); host && *host) o.host = host;
    if (const char* port = std::getenv("ATTGAN_PORT"); port && *port) {
        try {
            o.port = std::stoi(port);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("ATTGAN_PORT is not a port number: ") + port);
        }
    }
    return o;
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::string incident_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

EditRequest request_from_http(const httplib::Request& req) {
    if (req.is_multipart_form_data()) {
        EditRequest r;
        if (!req.has_file("image")) throw ValidationError("image", "multipart request lacks an 'image' part");
        r.image = req.get_file_value("image").content;
        auto object_part = [&](const char* key) {
            if (!req.has_file(key)) return nlohmann::json::object();
            try {
                return nlohmann::json::parse(req.get_file_value(key).content);
            } catch (const nlohmann::json::exception&) {
                throw ValidationError(key, std::string("part '") + key + "' is not valid JSON");
            }
        };
        nlohmann::json body = {{"image", base64_encode(r.image)}, {"target", object_part("target")},
                               {"styles", object_part("styles")}};
        return parse_edit_request(body);
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("body", "request body is not valid JSON");
    }
    return parse_edit_request(body);
}

}  // namespace

void install_routes(httplib::Server& server, const EditService& service, const ServiceOptions& options) {
    server.set_payload_max_length(options.max_payload);
    server.Get("/health", [&service](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, service.health());
    });
    server.Get("/attributes", [&service](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, service.attributes());
    });
    server.Post("/edit", [&service](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, 200, service.serve_edit(request_from_http(req)).to_json());
        } catch (const ValidationError& e) {
            send_json(res, 400, {{"error", e.what()}, {"field", e.field()}});
        }
    });
    server.set_exception_handler([](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
        const auto id = incident_id();
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            std::cerr << "error " << id << " on " << req.method << ' ' << req.path << ": " << e.what() << '\n';
        } catch (...) {
            std::cerr << "error " << id << " on " << req.method << ' ' << req.path << '\n';
        }
        send_json(res, 500, {{"error", "internal error"}, {"id", id}});
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_json(res, res.status, {{"error", httplib::status_message(res.status)}});
    });
}

bool run_server(const EditService& service, const ServiceOptions& options, const std::atomic<bool>& stop,
                const std::function<void(int)>& on_listening) {
    httplib::Server server;
    install_routes(server, service, options);
    int port = options.port;
    if (port == 0) {
        port = server.bind_to_any_port(options.host);
        if (port < 0) return false;
    } else if (!server.bind_to_port(options.host, port)) {
        return false;
    }
    std::atomic<bool> finished{false};
    std::thread watcher([&] {
        // stop() is a no-op before the accept loop runs, so wait for it first.
        while (!finished.load() && !server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
        while (!finished.load() && !stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        server.stop();
    });
    if (on_listening) on_listening(port);
    const bool ok = server.listen_after_bind();
    finished = true;
    watcher.join();
    return ok;
}

}  // namespace attgan
