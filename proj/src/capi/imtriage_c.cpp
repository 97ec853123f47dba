#include "imtriage/imtriage.h"

#include "imtriage/dataset.hpp"
#include "imtriage/error.hpp"
#include "imtriage/server.hpp"
#include "imtriage/session_json.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>

struct imt_model {
    imtriage::RelationModel model;
};

struct imt_session {
    imtriage::Session session;
};

struct imt_server {
    std::unique_ptr<imtriage::Server> server;
    bool bound = false;
};

namespace {

thread_local std::string g_last_error;

imt_status to_status(imtriage::ErrorCode code) {
    using imtriage::ErrorCode;
    switch (code) {
    case ErrorCode::InvalidInput: return IMT_ERR_INVALID_INPUT;
    case ErrorCode::Parse: return IMT_ERR_PARSE;
    case ErrorCode::NotFound: return IMT_ERR_NOT_FOUND;
    case ErrorCode::Precondition: return IMT_ERR_PRECONDITION;
    case ErrorCode::Optimizer: return IMT_ERR_OPTIMIZER;
    case ErrorCode::Cancelled: return IMT_ERR_CANCELLED;
    case ErrorCode::Io: return IMT_ERR_IO;
    case ErrorCode::Conflict: return IMT_ERR_CONFLICT;
    }
    return IMT_ERR_INTERNAL;
}

template <class F>
imt_status guard(F&& f) {
    try {
        f();
        g_last_error.clear();
        return IMT_OK;
    } catch (const imtriage::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::parse_error& e) {
        g_last_error = e.what();
        return IMT_ERR_PARSE;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return IMT_ERR_INVALID_INPUT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return IMT_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IMT_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr)
        imtriage::throw_invalid(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

imtriage::ExtractorSpec extractor_or_default(const char* id) {
    return id == nullptr ? imtriage::ExtractorSpec{} : imtriage::ExtractorSpec::from_id(id);
}

imtriage::SessionConfig config_from_cstr(const char* config_json) {
    if (config_json == nullptr || *config_json == '\0')
        return {};
    return imtriage::config_from_json(imtriage::json::parse(config_json));
}

imtriage::Session session_from_features(const char* path, const char* config_json) {
    const auto config = config_from_cstr(config_json);
    const auto table = imtriage::load_feature_table(path);
    return imtriage::Session(imtriage::build_snapshot("local", {table.ids, table.rows}, config));
}

} // namespace

extern "C" {

const char* imt_last_error(void) { return g_last_error.c_str(); }

const char* imt_version(void) { return IMTRIAGE_VERSION; }

void imt_string_free(char* s) { std::free(s); }

imt_status imt_model_create(const char* extractor, size_t hidden, uint64_t seed, imt_model** out) {
    return guard([&] {
        require(out, "out");
        const auto spec = extractor_or_default(extractor);
        if (hidden == 0)
            imtriage::throw_invalid("hidden width must be positive");
        auto m = std::make_unique<imt_model>(imt_model{imtriage::RelationModel(spec.dim(), hidden, seed)});
        m->model.extractor_id = spec.id();
        *out = m.release();
    });
}

imt_status imt_model_create_dim(size_t feature_dim, size_t hidden, uint64_t seed, imt_model** out) {
    return guard([&] {
        require(out, "out");
        if (feature_dim == 0 || hidden == 0)
            imtriage::throw_invalid("feature dimension and hidden width must be positive");
        auto m = std::make_unique<imt_model>(imt_model{imtriage::RelationModel(feature_dim, hidden, seed)});
        m->model.extractor_id = "precomputed";
        *out = m.release();
    });
}

imt_status imt_model_load(const char* path, imt_model** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new imt_model{imtriage::load_model(path)};
    });
}

imt_status imt_model_save(const imt_model* model, const char* path) {
    return guard([&] {
        require(model, "model");
        require(path, "path");
        imtriage::save_model(model->model, path);
    });
}

size_t imt_model_feature_dim(const imt_model* model) { return model == nullptr ? 0 : model->model.feature_dim(); }

double imt_model_score(const imt_model* model, const double* a, const double* b, size_t dim) {
    if (model == nullptr || a == nullptr || b == nullptr || dim != model->model.feature_dim()) {
        g_last_error = "imt_model_score: bad arguments";
        return -1.0;
    }
    return model->model.forward({a, dim}, {b, dim});
}

void imt_model_free(imt_model* model) { delete model; }

void imt_train_options_default(imt_train_options* opts) {
    if (opts == nullptr)
        return;
    const imtriage::TrainConfig d;
    opts->steps = d.steps;
    opts->batch_size = d.batch_size;
    opts->learning_rate = d.learning_rate;
    opts->seed = d.seed;
    opts->hidden = 64;
    opts->extractor = nullptr;
}

imt_status imt_train_dataset(const char* dataset_dir, const imt_train_options* opts, imt_model** out,
                             double* final_loss) {
    return guard([&] {
        require(dataset_dir, "dataset_dir");
        require(out, "out");
        imt_train_options o;
        imt_train_options_default(&o);
        if (opts != nullptr)
            o = *opts;
        imtriage::TrainConfig cfg;
        cfg.steps = o.steps;
        cfg.batch_size = o.batch_size;
        cfg.learning_rate = o.learning_rate;
        cfg.seed = o.seed;
        const auto spec = extractor_or_default(o.extractor);
        const auto report = imtriage::ingest_dataset(dataset_dir, spec);
        imtriage::RelationModel init(spec.dim(), o.hidden, o.seed);
        init.extractor_id = spec.id();
        auto result = imtriage::train(init, report.data, cfg);
        if (final_loss != nullptr)
            *final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
        *out = new imt_model{std::move(result.model)};
    });
}

imt_status imt_benchmark(const imt_model* model, const char* dataset_dir, int ways, int shots, int episodes,
                         uint64_t seed, double* accuracy) {
    return guard([&] {
        require(model, "model");
        require(dataset_dir, "dataset_dir");
        require(accuracy, "accuracy");
        const auto report =
            imtriage::ingest_dataset(dataset_dir, imtriage::ExtractorSpec::from_id(model->model.extractor_id));
        imtriage::EpisodeEvalConfig cfg;
        cfg.ways = ways;
        cfg.shots = shots;
        cfg.episodes = episodes;
        cfg.seed = seed;
        *accuracy = imtriage::episodic_accuracy(model->model, report.data, cfg);
    });
}

imt_status imt_embed_features_file(const char* features_path, const char* config_json, char** out_csv) {
    return guard([&] {
        require(features_path, "features_path");
        require(out_csv, "out_csv");
        const auto config = config_from_cstr(config_json);
        const auto table = imtriage::load_feature_table(features_path);
        const auto snap = imtriage::build_snapshot("embed", {table.ids, table.rows}, config);
        std::string csv;
        char buf[64];
        for (std::size_t i = 0; i < snap.image_ids.size(); ++i) {
            csv += snap.image_ids[i];
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", snap.initial_positions[i].x,
                          snap.initial_positions[i].y);
            csv += buf;
        }
        *out_csv = dup_string(csv);
    });
}

imt_status imt_session_create_from_features(const char* features_path, const char* config_json, imt_session** out) {
    return guard([&] {
        require(features_path, "features_path");
        require(out, "out");
        *out = new imt_session{session_from_features(features_path, config_json)};
    });
}

imt_status imt_session_apply_event(imt_session* session, const char* event_json, char** out_state_json) {
    return guard([&] {
        require(session, "session");
        require(event_json, "event_json");
        auto result = imtriage::apply_user_request(session->session, imtriage::json::parse(event_json));
        if (out_state_json != nullptr) {
            auto state = imtriage::session_state_to_json(session->session);
            state["result"] = std::move(result);
            *out_state_json = dup_string(state.dump());
        }
    });
}

imt_status imt_session_auto_group(imt_session* session, const imt_model* model, char** out_json) {
    return guard([&] {
        require(session, "session");
        require(model, "model");
        if (session->session.learning_groups().empty())
            imtriage::throw_precondition("create a group first");
        const auto& feats = session->session.snapshot().features;
        if (!feats.empty() && feats.front().size() != model->model.feature_dim())
            imtriage::throw_precondition("relation model feature dimension does not match the session");
        imtriage::json arr = imtriage::json::array();
        for (const auto& a : session->session.run_auto_group(model->model))
            arr.push_back(imtriage::assignment_to_json(a));
        if (out_json != nullptr)
            *out_json = dup_string(imtriage::json{{"schema_version", imtriage::kSchemaVersion}, {"assignments", arr}}.dump());
    });
}

imt_status imt_session_auto_position(imt_session* session, char** out_json) {
    return guard([&] {
        require(session, "session");
        imtriage::json arr = imtriage::json::array();
        for (const auto& [id, p] : session->session.run_auto_position())
            arr.push_back({{"image_id", id}, {"x", p.x}, {"y", p.y}});
        if (out_json != nullptr)
            *out_json = dup_string(imtriage::json{{"schema_version", imtriage::kSchemaVersion}, {"moved", arr}}.dump());
    });
}

imt_status imt_session_state(const imt_session* session, char** out_json) {
    return guard([&] {
        require(session, "session");
        require(out_json, "out_json");
        *out_json = dup_string(imtriage::session_state_to_json(session->session).dump());
    });
}

void imt_session_free(imt_session* session) { delete session; }

imt_status imt_server_create(const char* options_json, imt_server** out) {
    return guard([&] {
        require(out, "out");
        imtriage::ServerOptions opts;
        if (options_json != nullptr && *options_json != '\0') {
            const auto j = imtriage::json::parse(options_json);
            opts.host = j.value("host", opts.host);
            opts.port = j.value("port", opts.port);
            opts.data_dir = j.value("data_dir", std::string());
            opts.model_path = j.value("model", std::string());
            opts.hidden = j.value("hidden", opts.hidden);
            if (j.contains("config"))
                opts.session_defaults = imtriage::config_from_json(j.at("config"), opts.session_defaults);
            opts.session_defaults.threshold = j.value("threshold", opts.session_defaults.threshold);
            opts.session_defaults.seed = j.value("seed", opts.session_defaults.seed);
            if (j.contains("extractor"))
                opts.session_defaults.extractor = imtriage::ExtractorSpec::from_id(j.at("extractor").get<std::string>());
        }
        *out = new imt_server{std::make_unique<imtriage::Server>(std::move(opts))};
    });
}

imt_status imt_server_bind(imt_server* server, int* port) {
    return guard([&] {
        require(server, "server");
        const int p = server->server->bind();
        if (p < 0)
            throw imtriage::Error(imtriage::ErrorCode::Io, "cannot bind a port");
        server->bound = true;
        if (port != nullptr)
            *port = p;
    });
}

imt_status imt_server_run(imt_server* server) {
    return guard([&] {
        require(server, "server");
        if (!server->bound) {
            server->server->bind();
            server->bound = true;
        }
        server->server->serve();
    });
}

void imt_server_stop(imt_server* server) {
    if (server != nullptr)
        server->server->stop();
}

void imt_server_free(imt_server* server) { delete server; }

} // extern "C"
