// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "imtriage/imtriage.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("imt_capi_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

std::string take(char* s) {
    REQUIRE(s != nullptr);
    std::string out(s);
    imt_string_free(s);
    return out;
}

// Two well separated clusters of 6 points each, dimension 4.
fs::path write_features(const fs::path& path) {
    std::ofstream out(path);
    out << "#dim=4\n";
    std::mt19937 rng(3);
    std::normal_distribution<double> n(0.0, 0.1);
    for (int i = 0; i < 12; ++i) {
        const double c = i < 6 ? 0.0 : 5.0;
        out << "p" << i;
        for (int d = 0; d < 4; ++d)
            out << ',' << c + n(rng);
        out << '\n';
    }
    return path;
}

} // namespace

TEST_CASE("version and error reporting") {
    CHECK(std::string(imt_version()).size() > 0);
    imt_model* m = nullptr;
    CHECK(imt_model_load("/nonexistent/model.bin", &m) == IMT_ERR_IO);
    CHECK(m == nullptr);
    CHECK(std::string(imt_last_error()).find("nonexistent") != std::string::npos);
    CHECK(imt_model_create("gray16", 8, 1, nullptr) == IMT_ERR_INVALID_INPUT);
    CHECK(imt_model_create("sift", 8, 1, &m) == IMT_ERR_INVALID_INPUT);
    CHECK(imt_model_feature_dim(nullptr) == 0);
    CHECK(imt_model_score(nullptr, nullptr, nullptr, 0) == -1.0);
    imt_model_free(nullptr);
    imt_session_free(nullptr);
    imt_server_free(nullptr);
    imt_string_free(nullptr);
}

TEST_CASE("models: create, score, save and load") {
    Scratch s;
    imt_model* m = nullptr;
    REQUIRE(imt_model_create(nullptr, 8, 7, &m) == IMT_OK);
    CHECK(imt_model_feature_dim(m) == 256);
    std::vector<double> a(256, 0.1), b(256, 0.4);
    const double p = imt_model_score(m, a.data(), b.data(), a.size());
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(imt_model_score(m, a.data(), b.data(), 5) == -1.0);

    const auto path = (s.dir / "m.bin").string();
    REQUIRE(imt_model_save(m, path.c_str()) == IMT_OK);
    imt_model* back = nullptr;
    REQUIRE(imt_model_load(path.c_str(), &back) == IMT_OK);
    CHECK(imt_model_score(back, a.data(), b.data(), a.size()) == p);
    imt_model_free(back);
    imt_model_free(m);

    imt_model* color = nullptr;
    REQUIRE(imt_model_create("rgbhist32+gray16", 8, 7, &color) == IMT_OK);
    CHECK(imt_model_feature_dim(color) == 352);
    imt_model_free(color);
}

TEST_CASE("embedding a feature file") {
    Scratch s;
    const auto feats = write_features(s.dir / "f.txt").string();
    char* csv = nullptr;
    const auto st = imt_embed_features_file(feats.c_str(), R"({"tsne":{"iterations":300}})", &csv);
    INFO(std::string(imt_last_error()));
    REQUIRE(st == IMT_OK);
    const auto text = take(csv);
    int lines = 0;
    for (char c : text)
        lines += c == '\n';
    CHECK(lines == 12);
    CHECK(text.rfind("p0,", 0) == 0);

    CHECK(imt_embed_features_file(feats.c_str(), "{not json", &csv) == IMT_ERR_PARSE);
    std::ofstream(s.dir / "bad.txt") << "#dim=2\nx,1\n";
    CHECK(imt_embed_features_file((s.dir / "bad.txt").string().c_str(), nullptr, &csv) == IMT_ERR_PARSE);
    CHECK(std::string(imt_last_error()).find("line 2") != std::string::npos);
}

TEST_CASE("headless session through the C API") {
    Scratch s;
    const auto feats = write_features(s.dir / "f.txt").string();
    imt_session* session = nullptr;
    REQUIRE(imt_session_create_from_features(feats.c_str(), R"({"tsne":{"iterations":300}})", &session) == IMT_OK);

    char* out = nullptr;
    REQUIRE(imt_session_state(session, &out) == IMT_OK);
    auto state = json::parse(take(out));
    CHECK(state.at("items").size() == 12);

    imt_model* m = nullptr;
    REQUIRE(imt_model_create_dim(4, 8, 1, &m) == IMT_OK);
    CHECK(imt_session_auto_group(session, m, &out) == IMT_ERR_PRECONDITION);
    CHECK(std::string(imt_last_error()) == "create a group first");
    imt_model_free(m);
    REQUIRE(imt_model_create(nullptr, 8, 1, &m) == IMT_OK);
    CHECK(imt_session_auto_position(session, &out) == IMT_ERR_PRECONDITION);

    REQUIRE(imt_session_apply_event(session, R"({"type":"create_group","label":"left"})", &out) == IMT_OK);
    imt_string_free(out);
    REQUIRE(imt_session_apply_event(session, R"({"type":"assign","image_id":"p0","group_id":"g1"})", &out) == IMT_OK);
    state = json::parse(take(out));
    CHECK(state.at("groups").at(0).at("members").size() == 1);
    // 256-dim model against 4-dim features
    CHECK(imt_session_auto_group(session, m, &out) == IMT_ERR_PRECONDITION);
    imt_model_free(m);
    CHECK(imt_model_create_dim(0, 8, 1, &m) == IMT_ERR_INVALID_INPUT);
    REQUIRE(imt_model_create_dim(4, 8, 1, &m) == IMT_OK);
    REQUIRE(imt_session_auto_group(session, m, &out) == IMT_OK);
    const auto groups = json::parse(take(out));
    CHECK(groups.at("assignments").is_array());
    imt_model_free(m);

    CHECK(imt_session_apply_event(session, R"({"type":"assign","image_id":"zz","group_id":"g1"})", &out) ==
          IMT_ERR_NOT_FOUND);
    CHECK(imt_session_apply_event(session, R"({"type":"fly"})", &out) == IMT_ERR_INVALID_INPUT);
    CHECK(imt_session_apply_event(session, "[", &out) == IMT_ERR_PARSE);
    REQUIRE(imt_session_apply_event(session, R"({"type":"move","image_id":"p3","x":10,"y":20})", &out) == IMT_OK);
    state = json::parse(take(out));
    std::size_t free_items = 0;
    for (const auto& item : state.at("items"))
        free_items += !item.at("pinned").get<bool>() && item.at("group_id").is_null();
    REQUIRE(imt_session_auto_position(session, &out) == IMT_OK);
    CHECK(json::parse(take(out)).at("moved").size() == free_items);
    REQUIRE(imt_session_apply_event(session, R"({"type":"undo"})", &out) == IMT_OK);
    imt_string_free(out);
    imt_session_free(session);
}

TEST_CASE("server lifecycle") {
    imt_server* server = nullptr;
    CHECK(imt_server_create("{\"port\": \"x\"}", &server) != IMT_OK);
    REQUIRE(imt_server_create(R"({"host":"127.0.0.1","port":0})", &server) == IMT_OK);
    int port = 0;
    REQUIRE(imt_server_bind(server, &port) == IMT_OK);
    CHECK(port > 0);
    imt_status run_status = IMT_ERR_INTERNAL;
    std::thread t([&] { run_status = imt_server_run(server); });
    httplib::Client c("127.0.0.1", port);
    httplib::Result res;
    for (int i = 0; i < 200 && !(res = c.Get("/health")); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    REQUIRE(res);
    CHECK(res->status == 200);
    imt_server_stop(server);
    t.join();
    CHECK(run_status == IMT_OK);
    imt_server_free(server);

    // Stopping before run makes run return immediately.
    REQUIRE(imt_server_create(R"({"port":0})", &server) == IMT_OK);
    imt_server_stop(server);
    CHECK(imt_server_run(server) == IMT_OK);
    imt_server_free(server);
}
