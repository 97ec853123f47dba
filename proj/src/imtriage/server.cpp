#include "imtriage/server.hpp"

#include "imtriage/dataset.hpp"
#include "imtriage/error.hpp"
#include "imtriage/heatmap.hpp"
#include "imtriage/session_json.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <set>

namespace imtriage {

namespace fs = std::filesystem;

namespace {

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::Parse: return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Precondition:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::Cancelled: return 409;
    case ErrorCode::Optimizer:
    case ErrorCode::Io: return 500;
    }
    return 500;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    reply(res, status, {{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", message}}}});
}

template <class F>
auto guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const json::exception& e) {
            reply_error(res, 400, "invalid_input", e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, "internal", e.what());
        }
    };
}

int int_param(const httplib::Request& req, const char* name, int fallback) {
    if (!req.has_param(name))
        return fallback;
    const std::string v = req.get_param_value(name);
    int out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size())
        throw_invalid(std::string("query parameter '") + name + "' must be an integer");
    return out;
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty())
        return json::object();
    json j = json::parse(req.body);
    if (!j.is_object())
        throw_invalid("request body must be a JSON object");
    return j;
}

json job_json(const JobStatus& s) {
    return {{"schema_version", kSchemaVersion},
            {"job_id", s.job_id},
            {"kind", to_string(s.kind)},
            {"state", to_string(s.state)},
            {"progress", s.progress},
            {"message", s.message}};
}

Session& live_session(SessionEntry& entry) {
    if (!entry.session) {
        if (!entry.embed_error.empty())
            throw Error(ErrorCode::Conflict, "session embedding failed: " + entry.embed_error);
        throw Error(ErrorCode::Conflict, "session is still embedding");
    }
    return *entry.session;
}

std::shared_ptr<const RelationModel> usable_model(const SessionEntry& entry, const Session& session) {
    if (!entry.model)
        throw_precondition("no relation model loaded");
    if (session.snapshot().features.empty() || entry.model->feature_dim() != session.snapshot().features.front().size())
        throw_precondition("relation model feature dimension does not match this session's extractor");
    return entry.model;
}

SessionInput images_to_input(const std::vector<ImageRecord>& images, const ExtractorSpec& extractor) {
    return features_from_images(images, extractor);
}

} // namespace

LabeledFeatures group_training_set(const Session& session) {
    LabeledFeatures data;
    for (const auto& g : session.learning_groups()) {
        data.class_names.push_back(g.id);
        data.classes.push_back(g.members);
    }
    return data;
}

Server::Server(ServerOptions options) : options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
    std::shared_ptr<const RelationModel> model;
    if (!options_.model_path.empty()) {
        model = std::make_shared<const RelationModel>(load_model(options_.model_path));
        spdlog::info("loaded relation model {} (D={}, H={})", options_.model_path.string(), model->feature_dim(),
                     model->hidden());
    } else {
        auto fresh = RelationModel(options_.session_defaults.extractor.dim(), static_cast<std::size_t>(options_.hidden),
                                   options_.session_defaults.seed);
        fresh.extractor_id = options_.session_defaults.extractor.id();
        model = std::make_shared<const RelationModel>(std::move(fresh));
        spdlog::warn("no model given; using an untrained relation model");
    }
    store_ = std::make_unique<SessionStore>(options_.data_dir, model);
    jobs_ = std::make_unique<JobManager>();
    register_routes();
}

Server::~Server() {
    stop();
    jobs_.reset();
}

int Server::bind() {
    if (options_.port == 0)
        return http_->bind_to_any_port(options_.host);
    if (!http_->bind_to_port(options_.host, options_.port))
        throw Error(ErrorCode::Io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    return options_.port;
}

void Server::serve() {
    {
        std::lock_guard lock(run_mutex_);
        if (stopped_)
            return;
        serving_ = true;
    }
    http_->listen_after_bind();
}

void Server::wait_until_ready() { http_->wait_until_ready(); }

// Safe to call before serve() starts: a later serve() then returns at once.
void Server::stop() {
    bool serving = false;
    {
        std::lock_guard lock(run_mutex_);
        stopped_ = true;
        serving = serving_;
    }
    if (serving) {
        http_->wait_until_ready();
        http_->stop();
    }
}

void Server::register_routes() {
    auto& http = *http_;

    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"schema_version", kSchemaVersion}, {"status", "ok"}});
    });

    http.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"schema_version", kSchemaVersion}, {"sessions", store_->ids()}});
    }));

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        SessionConfig config = options_.session_defaults;
        std::vector<ImageRecord> images;
        std::optional<SessionInput> precomputed;
        bool wait = false;

        if (req.is_multipart_form_data()) {
            if (req.has_file("config"))
                config = config_from_json(json::parse(req.get_file_value("config").content), config);
            std::set<std::string> seen;
            for (const auto& f : req.get_file_values("images")) {
                const std::string id = f.filename.empty() ? "image" + std::to_string(images.size()) : f.filename;
                if (!seen.insert(id).second)
                    throw_invalid("duplicate image name '" + id + "'");
                images.push_back(decode_image(std::vector<std::uint8_t>(f.content.begin(), f.content.end()), id));
            }
        } else {
            const json body = parse_body(req);
            if (body.contains("config"))
                config = config_from_json(body.at("config"), config);
            wait = body.value("wait", false);
            if (body.contains("dataset")) {
                const fs::path root = body.at("dataset").get<std::string>();
                std::vector<fs::path> files;
                for (const auto& e : fs::recursive_directory_iterator(root))
                    if (e.is_regular_file() && is_image_file(e.path()))
                        files.push_back(e.path());
                std::sort(files.begin(), files.end());
                for (const auto& f : files)
                    images.push_back(load_image(f, fs::relative(f, root).generic_string()));
            } else if (body.contains("features")) {
                const auto table = load_feature_table(body.at("features").get<std::string>());
                precomputed = SessionInput{table.ids, table.rows};
            } else {
                throw_invalid("POST /sessions needs multipart images, 'dataset' or 'features'");
            }
        }
        if (images.empty() && (!precomputed || precomputed->ids.empty()))
            throw_invalid("no images supplied");

        SessionInput input = precomputed ? std::move(*precomputed) : images_to_input(images, config.extractor);
        const std::string id = store_->allocate_id();
        auto entry = store_->reserve(id, std::move(images));
        auto shared_input = std::make_shared<SessionInput>(std::move(input));
        const std::string job = jobs_->submit(
            JobKind::Embed, id, [this, entry, id, config, shared_input](JobContext& ctx) -> std::string {
                try {
                    auto snapshot = build_snapshot(id, std::move(*shared_input), config, ctx.stop_token(),
                                                   [&ctx](int done, int total) {
                                                       ctx.report(static_cast<double>(done) / total);
                                                   });
                    std::lock_guard lock(entry->mutex);
                    store_->publish(entry, Session(std::move(snapshot)));
                } catch (const std::exception& e) {
                    std::lock_guard lock(entry->mutex);
                    entry->embed_error = e.what();
                    throw;
                }
                return "embedded";
            });
        {
            std::lock_guard lock(entry->mutex);
            entry->embed_job = job;
        }
        if (wait)
            jobs_->wait(job);
        reply(res, 202, {{"schema_version", kSchemaVersion}, {"session_id", id}, {"job_id", job}});
    }));

    http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto entry = store_->find(req.matches[1]);
        std::lock_guard lock(entry->mutex);
        if (!entry->session) {
            std::string status = entry->embed_error.empty() ? "embedding" : "failed";
            if (!entry->embed_job.empty())
                status = to_string(jobs_->status(entry->embed_job).state);
            reply(res, 202, {{"schema_version", kSchemaVersion},
                             {"session_id", std::string(req.matches[1])},
                             {"status", status},
                             {"job_id", entry->embed_job},
                             {"error", entry->embed_error}});
            return;
        }
        reply(res, 200, session_state_to_json(*entry->session));
    }));

    http.Get(R"(/sessions/([^/]+)/grid)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto entry = store_->find(req.matches[1]);
        std::lock_guard lock(entry->mutex);
        reply(res, 200, {{"schema_version", kSchemaVersion}, {"grid", grid_to_json(live_session(*entry).grid_view())}});
    }));

    http.Post(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto entry = store_->find(req.matches[1]);
        const json body = parse_body(req);
        std::lock_guard lock(entry->mutex);
        Session& s = live_session(*entry);
        json result = apply_user_request(s, body);
        json state = session_state_to_json(s);
        state["result"] = std::move(result);
        reply(res, 200, state);
    }));

    http.Post(R"(/sessions/([^/]+)/auto-group)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto entry = store_->find(req.matches[1]);
        std::lock_guard lock(entry->mutex);
        Session& s = live_session(*entry);
        if (s.learning_groups().empty())
            throw_precondition("create a group first");
        const auto model = usable_model(*entry, s);
        json out = json::array();
        for (const auto& a : s.run_auto_group(*model))
            out.push_back(assignment_to_json(a));
        reply(res, 200, {{"schema_version", kSchemaVersion}, {"assignments", std::move(out)}});
    }));

    http.Post(R"(/sessions/([^/]+)/auto-position)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto entry = store_->find(req.matches[1]);
                  std::lock_guard lock(entry->mutex);
                  json out = json::array();
                  for (const auto& [id, p] : live_session(*entry).run_auto_position())
                      out.push_back({{"image_id", id}, {"x", p.x}, {"y", p.y}});
                  reply(res, 200, {{"schema_version", kSchemaVersion}, {"moved", std::move(out)}});
              }));

    http.Post(R"(/sessions/([^/]+)/finetune)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        auto entry = store_->find(sid);
        const json body = parse_body(req);
        FinetuneOptions opts;
        opts.steps = body.value("steps", opts.steps);
        opts.learning_rate = body.value("learning_rate", opts.learning_rate);
        opts.batch_size = body.value("batch_size", opts.batch_size);
        opts.seed = body.value("seed", opts.seed);

        std::shared_ptr<const RelationModel> base;
        auto data = std::make_shared<LabeledFeatures>();
        {
            std::lock_guard lock(entry->mutex);
            Session& s = live_session(*entry);
            base = usable_model(*entry, s);
            *data = group_training_set(s);
        }
        validate_for_episodes(*data);
        const bool wait = body.value("wait", false);
        const std::string job = jobs_->submit(
            JobKind::Finetune, sid, [this, entry, base, data, opts](JobContext& ctx) -> std::string {
                TrainConfig cfg;
                cfg.steps = opts.steps;
                cfg.learning_rate = opts.learning_rate;
                cfg.batch_size = opts.batch_size;
                cfg.seed = opts.seed;
                auto result = train(*base, *data, cfg, ctx.stop_token(), [&ctx](int done, int total, double) {
                    ctx.report(static_cast<double>(done) / std::max(total, 1));
                });
                std::lock_guard lock(entry->mutex);
                if (ctx.stop_token().stop_requested())
                    throw Error(ErrorCode::Cancelled, "fine-tuning cancelled");
                store_->set_model(*entry, std::make_shared<const RelationModel>(std::move(result.model)));
                const double last = result.loss_history.empty() ? 0.0 : result.loss_history.back();
                return "fine-tuned; final loss " + std::to_string(last);
            });
        if (wait)
            jobs_->wait(job);
        reply(res, 202, {{"schema_version", kSchemaVersion}, {"job_id", job}});
    }));

    http.Get(R"(/sessions/([^/]+)/images/([^/]+)/heatmap)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto entry = store_->find(req.matches[1]);
                 const std::string image_id = req.matches[2];
                 if (!req.has_param("group"))
                     throw_invalid("heatmap needs a 'group' query parameter");
                 const std::string group_id = req.get_param_value("group");
                 const int patch = int_param(req, "patch", 16);
                 const int stride = int_param(req, "stride", 8);

                 std::lock_guard lock(entry->mutex);
                 Session& s = live_session(*entry);
                 const auto model = usable_model(*entry, s);
                 const std::size_t index = s.snapshot().index_of(image_id);
                 if (entry->images.empty())
                     throw_precondition("this session was built from precomputed features; no pixels for a heatmap");
                 const Group& g = s.group(group_id);
                 std::vector<FeatureVector> members;
                 for (const auto& m : g.members)
                     if (g.is_confirmed(m) && m != image_id)
                         members.push_back(s.snapshot().features[s.snapshot().index_of(m)]);
                 if (members.empty())
                     throw_precondition("group has no confirmed members to compare against");
                 const Heatmap h = occlusion_heatmap(*model, entry->images[index], members, patch, stride,
                                                     s.snapshot().config.extractor);
                 json out = heatmap_to_json(h);
                 out["schema_version"] = kSchemaVersion;
                 out["image_id"] = image_id;
                 out["group_id"] = group_id;
                 reply(res, 200, out);
             }));

    http.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, job_json(jobs_->status(req.matches[1])));
    }));

    http.Delete(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, job_json(jobs_->cancel(req.matches[1])));
    }));

    http.Post("/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const fs::path dataset = body.at("dataset").get<std::string>();
        TrainConfig cfg;
        cfg.steps = body.value("steps", cfg.steps);
        cfg.batch_size = body.value("batch_size", cfg.batch_size);
        cfg.learning_rate = body.value("learning_rate", cfg.learning_rate);
        cfg.seed = body.value("seed", cfg.seed);
        cfg.validate();
        const int hidden = body.value("hidden", options_.hidden);
        const fs::path out = body.value("out", std::string());
        const bool activate = body.value("activate", true);
        const bool wait = body.value("wait", false);
        const ExtractorSpec extractor =
            ExtractorSpec::from_id(body.value("extractor", options_.session_defaults.extractor.id()));

        const std::string job = jobs_->submit_global(
            JobKind::Train, [this, dataset, cfg, hidden, out, activate, extractor](JobContext& ctx) -> std::string {
                ctx.report(0.0, "ingesting dataset");
                const auto report = ingest_dataset(dataset, extractor);
                RelationModel init(extractor.dim(), static_cast<std::size_t>(hidden), cfg.seed);
                init.extractor_id = extractor.id();
                auto result = train(init, report.data, cfg, ctx.stop_token(), [&ctx](int done, int total, double) {
                    ctx.report(static_cast<double>(done) / std::max(total, 1));
                });
                if (ctx.stop_token().stop_requested())
                    throw Error(ErrorCode::Cancelled, "training cancelled");
                if (!out.empty())
                    save_model(result.model, out);
                if (activate)
                    store_->set_default_model(std::make_shared<const RelationModel>(result.model));
                return "trained on " + std::to_string(report.data.total()) + " images";
            });
        if (wait)
            jobs_->wait(job);
        reply(res, 202, {{"schema_version", kSchemaVersion}, {"job_id", job}});
    }));
}

} // namespace imtriage
