#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <torch/torch.h>

#include "attgan/checkpoint.hpp"
#include "attgan/image.hpp"
#include "attgan/service.hpp"
#include "attgan/style.hpp"
#include "support.hpp"

using namespace attgan;
using nlohmann::json;

namespace {

const std::vector<std::string> kNames = {"Eyeglasses", "Bangs", "Pale_Skin", "Mouth_Slightly_Open"};

AttGAN small_model(std::vector<int> styles = {}) {
    auto arch = ArchitectureConfig::synthetic(32, 4).scaled(0.125);
    arch.style_counts = std::move(styles);
    return AttGAN(arch, kNames, 6);
}

std::string face_png(std::size_t row = 0) {
    static const auto data = test::synthetic_set(8, 2);
    return encode_png(tensor_to_image(data.images[static_cast<int64_t>(row)]));
}

// Runs the HTTP service on a free port for the lifetime of the object.
class LiveServer {
public:
    LiveServer(const EditService& service, ServiceOptions options) {
        options.port = 0;
        thread_ = std::thread([this, &service, options] {
            run_server(service, options, stop_, [this](int port) {
                std::lock_guard lock(mutex_);
                port_ = port;
                ready_.notify_all();
            });
        });
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [this] { return port_ > 0; });
    }
    ~LiveServer() {
        stop_ = true;
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30);
        return c;
    }

private:
    std::atomic<bool> stop_{false};
    std::mutex mutex_;
    std::condition_variable ready_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("base64 round trip and data urls") {
    const std::string bytes("\x00\x01\xfe\xffhello", 9);
    const auto text = base64_encode(bytes);
    CHECK(base64_decode(text) == bytes);
    CHECK(base64_decode("data:image/png;base64," + text) == bytes);
    CHECK(base64_encode("") == "");
    CHECK_THROWS_AS(base64_decode("@@@@"), std::invalid_argument);
    CHECK_THROWS_AS(base64_decode("data:nocomma"), std::invalid_argument);
}

TEST_CASE("base64 padding") {
    for (const std::string bytes : {"a", "ab", "abc", "abcd", "abcde"}) {
        const auto text = base64_encode(bytes);
        CHECK(text.size() % 4 == 0);
        CHECK(base64_decode(text) == bytes);
    }
    CHECK(base64_encode("a") == "YQ==");
    CHECK(base64_decode("YQ") == "a");
    CHECK_THROWS_AS(base64_decode("YQ="), std::invalid_argument);
    CHECK_THROWS_AS(base64_decode("Y=Q="), std::invalid_argument);
}

TEST_CASE("edit request parsing") {
    const auto r = parse_edit_request(
        {{"image", base64_encode("abc")}, {"target", {{"Bangs", 1}}}, {"styles", {{"Eyeglasses", 2}}}});
    CHECK(r.image == "abc");
    CHECK(r.target.at("Bangs") == 1.0);
    CHECK(r.styles.at("Eyeglasses") == 2);
    auto field_of = [](const json& body) {
        try {
            parse_edit_request(body);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string("none");
    };
    CHECK(field_of(json::array()) == "body");
    CHECK(field_of({{"target", json::object()}}) == "image");
    CHECK(field_of({{"image", "@@"}}) == "image");
    CHECK(field_of({{"image", "YWJj"}, {"target", {{"Bangs", "yes"}}}}) == "target.Bangs");
    CHECK(field_of({{"image", "YWJj"}, {"styles", {{"Bangs", 0.5}}}}) == "styles.Bangs");
    CHECK(field_of({{"image", "YWJj"}, {"extra", 1}}) == "extra");
}

TEST_CASE("identical requests give byte identical images") {
    EditService service(small_model(), "test");
    EditRequest r;
    r.image = face_png();
    r.target = {{"Eyeglasses", 1.0}, {"Bangs", 0.3}};
    const auto a = service.serve_edit(r);
    const auto b = service.serve_edit(r);
    CHECK(a.png == b.png);
    CHECK(a.attributes == b.attributes);
    CHECK(a.attributes[0] == 1.0);
    CHECK(a.attributes[1] == doctest::Approx(0.3));
    const auto img = decode_image(a.png);
    CHECK(img.width == 32);
    CHECK(img.height == 32);
}

TEST_CASE("empty target map gives the reconstruction") {
    auto model = small_model();
    EditService service(model, "test");
    EditRequest r;
    r.image = face_png(1);
    const auto response = service.serve_edit(r);
    torch::NoGradGuard g;
    model.eval();
    const auto x = preprocess_image(decode_image(r.image), 32).unsqueeze(0);
    const auto a = (model.classify_attributes(x) > 0.5).to(torch::kFloat);
    CHECK(response.png == encode_png(tensor_to_image(model.edit(x, a)[0])));
    for (int i = 0; i < 4; ++i) CHECK(response.attributes[i] == a[0][i].item<double>());
}

TEST_CASE("service validation") {
    EditService service(small_model({3, 1, 1, 1}), "test");
    auto field_of = [&](EditRequest r) {
        try {
            service.serve_edit(r);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string("none");
    };
    EditRequest ok;
    ok.image = face_png();
    CHECK(field_of(ok) == "none");
    auto r = ok;
    r.target["Wings"] = 1;
    CHECK(field_of(r) == "target.Wings");
    r = ok;
    r.target["Bangs"] = 1.5;
    CHECK(field_of(r) == "target.Bangs");
    r = ok;
    r.styles["Eyeglasses"] = 3;
    CHECK(field_of(r) == "styles.Eyeglasses");
    r = ok;
    r.styles["Bangs"] = 1;
    CHECK(field_of(r) == "styles.Bangs");
    r = ok;
    r.image = "not a png";
    CHECK(field_of(r) == "image");
    r.image.clear();
    CHECK(field_of(r) == "image");
}

TEST_CASE("style requests condition the decoder") {
    EditService service(small_model({3, 1, 1, 1}), "test");
    EditRequest r;
    r.image = face_png();
    r.target["Eyeglasses"] = 1;
    const auto plain = service.serve_edit(r);
    r.styles["Eyeglasses"] = 2;
    const auto styled = service.serve_edit(r);
    CHECK(styled.png != plain.png);
    const auto j = styled.to_json();
    CHECK(j["attributes"][0]["style"] == 2);
    CHECK_FALSE(j["attributes"][1].contains("style"));
    CHECK_FALSE(plain.to_json()["attributes"][0].contains("style"));
}

TEST_CASE("a 128 pixel checkpoint returns a 128 pixel image") {
    test::TempDir dir("svc128");
    save_model(dir / "m.ckpt", AttGAN(ArchitectureConfig::table_128(4).scaled(0.0625), kNames, 1));
    EditService service(load_model(dir / "m.ckpt"), "m");
    EditRequest r;
    r.image = face_png();
    r.target["Bangs"] = 1;
    const auto img = decode_image(service.serve_edit(r).png);
    CHECK(img.width == 128);
    CHECK(img.height == 128);
    CHECK(service.attributes()["resolution"] == 128);
}

TEST_CASE("http routes") {
    EditService service(small_model({3, 1, 1, 1}), "ckpt-1");
    ServiceOptions options;
    options.max_payload = 64 << 10;
    LiveServer server(service, options);
    auto client = server.client();

    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body) == json{{"status", "ok"}, {"checkpoint_id", "ckpt-1"}});

    auto attrs = client.Get("/attributes");
    REQUIRE(attrs);
    const auto aj = json::parse(attrs->body);
    CHECK(aj["attributes"].size() == 4);
    CHECK(aj["attributes"][0] == json{{"name", "Eyeglasses"}, {"styles", 3}});

    const json body = {{"image", base64_encode(face_png())}, {"target", {{"Bangs", 1}}}};
    auto e1 = client.Post("/edit", body.dump(), "application/json");
    auto e2 = client.Post("/edit", body.dump(), "application/json");
    REQUIRE(e1);
    REQUIRE(e2);
    CHECK(e1->status == 200);
    const auto j1 = json::parse(e1->body), j2 = json::parse(e2->body);
    CHECK(j1["image"] == j2["image"]);
    CHECK(j1["attributes"][1] == json{{"name", "Bangs"}, {"value", 1.0}});
    CHECK(j1["latency_ms"].get<double>() >= 0);
    CHECK(decode_image(base64_decode(j1["image"].get<std::string>())).width == 32);

    auto bad = client.Post("/edit", json{{"image", base64_encode(face_png())}, {"target", {{"Bangs", 2}}}}.dump(),
                           "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["field"] == "target.Bangs");

    auto not_json = client.Post("/edit", "{", "application/json");
    REQUIRE(not_json);
    CHECK(not_json->status == 400);

    auto huge = client.Post("/edit", std::string(200 << 10, 'a'), "application/json");
    REQUIRE(huge);
    CHECK(huge->status == 413);

    httplib::MultipartFormDataItems parts = {{"image", face_png(), "face.png", "image/png"},
                                             {"target", R"({"Bangs": 1})", "", "application/json"}};
    auto multipart = client.Post("/edit", parts);
    REQUIRE(multipart);
    CHECK(multipart->status == 200);
    CHECK(json::parse(multipart->body)["image"] == j1["image"]);

    httplib::MultipartFormDataItems no_image = {{"target", "{}", "", "application/json"}};
    auto missing = client.Post("/edit", no_image);
    REQUIRE(missing);
    CHECK(missing->status == 400);
    CHECK(json::parse(missing->body)["field"] == "image");

    auto nowhere = client.Get("/nowhere");
    REQUIRE(nowhere);
    CHECK(nowhere->status == 404);
    CHECK(json::parse(nowhere->body).contains("error"));
}

TEST_CASE("service options from the environment") {
    ::setenv("ATTGAN_HOST", "0.0.0.0", 1);
    ::setenv("ATTGAN_PORT", "9191", 1);
    auto o = ServiceOptions::from_environment();
    CHECK(o.host == "0.0.0.0");
    CHECK(o.port == 9191);
    ::setenv("ATTGAN_PORT", "http", 1);
    CHECK_THROWS_AS(ServiceOptions::from_environment(), std::invalid_argument);
    ::unsetenv("ATTGAN_HOST");
    ::unsetenv("ATTGAN_PORT");
    o = ServiceOptions::from_environment();
    CHECK(o.host == "127.0.0.1");
    CHECK(o.port == 8080);
}
