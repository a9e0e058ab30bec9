#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attgan/model.hpp"

namespace httplib {
class Server;
}

namespace attgan {

/// b and optional styles for one inference call. Attributes left out of
/// `target` are filled in from the model's own classifier.
struct EditRequest {
    std::string image;  // encoded PNG or JPEG bytes
    std::map<std::string, double> target;
    std::map<std::string, int> styles;
};

struct EditResponse {
    std::string png;
    std::vector<std::string> names;
    std::vector<double> attributes;  // resolved full vector, model order
    std::vector<int> styles;         // -1 = no style requested
    double latency_ms = 0;

    nlohmann::json to_json() const;
};

/// Invalid request content; `field` names the offending part.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

std::string base64_encode(std::string_view bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

/// {"image": base64, "target": {name: value}, "styles": {name: index}}.
EditRequest parse_edit_request(const nlohmann::json& body);

/// Stateless editing over a frozen model snapshot.
class EditService {
public:
    EditService(AttGAN model, std::string checkpoint_id);

    /// Checks names, value ranges and style indices against the model.
    void validate(const EditRequest& request) const;
    EditResponse serve_edit(const EditRequest& request) const;

    nlohmann::json health() const;
    nlohmann::json attributes() const;
    const AttGAN& model() const { return model_; }

private:
    AttGAN model_;
    std::string checkpoint_id_;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::size_t max_payload = 8u << 20;
    /// Reads ATTGAN_HOST and ATTGAN_PORT over the defaults.
    static ServiceOptions from_environment();
};

/// Installs /health, /attributes and /edit on `server`.
void install_routes(httplib::Server& server, const EditService& service, const ServiceOptions& options);

/// Binds and serves until `stop` is set (polled) or the server is stopped.
/// `on_listening` receives the bound port. Returns false if binding failed.
bool run_server(const EditService& service, const ServiceOptions& options, const std::atomic<bool>& stop,
                const std::function<void(int)>& on_listening = {});

}  // namespace attgan
