#include "imtriage/session_json.hpp"

#include "imtriage/error.hpp"

namespace imtriage {

namespace {

json point_json(Point p) { return json::array({p.x, p.y}); }

Point point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

template <class T>
T field_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

json scores_json(const ScoreTable& scores) {
    json out = json::object();
    for (const auto& [image, probs] : scores) {
        json row = json::array();
        for (const auto& [gid, p] : probs)
            row.push_back({{"group_id", gid}, {"probability", p}});
        out[image] = std::move(row);
    }
    return out;
}

ScoreTable scores_from(const json& j) {
    ScoreTable out;
    for (const auto& [image, row] : j.items()) {
        auto& probs = out[image];
        for (const auto& e : row)
            probs.emplace_back(e.at("group_id").get<std::string>(), e.at("probability").get<double>());
    }
    return out;
}

} // namespace

json config_to_json(const SessionConfig& c) {
    return {
        {"canvas_width", c.canvas.width},
        {"canvas_height", c.canvas.height},
        {"margin", c.margin},
        {"threshold", c.threshold},
        {"seed", c.seed},
        {"extractor", c.extractor.id()},
        {"pca_components", c.pca_components},
        {"ridge", c.ridge},
        {"min_separation", c.min_separation},
        {"min_group_radius", c.min_group_radius},
        {"tsne",
         {{"perplexity", c.tsne.perplexity},
          {"iterations", c.tsne.iterations},
          {"learning_rate", c.tsne.learning_rate},
          {"early_exaggeration", c.tsne.early_exaggeration},
          {"early_exaggeration_iters", c.tsne.early_exaggeration_iters},
          {"initial_momentum", c.tsne.initial_momentum},
          {"final_momentum", c.tsne.final_momentum},
          {"momentum_switch_iter", c.tsne.momentum_switch_iter},
          {"seed", c.tsne.seed}}},
    };
}

SessionConfig config_from_json(const json& j, SessionConfig c) {
    c.canvas.width = field_or(j, "canvas_width", c.canvas.width);
    c.canvas.height = field_or(j, "canvas_height", c.canvas.height);
    c.margin = field_or(j, "margin", c.margin);
    c.threshold = field_or(j, "threshold", c.threshold);
    c.seed = field_or(j, "seed", c.seed);
    c.extractor = ExtractorSpec::from_id(field_or<std::string>(j, "extractor", c.extractor.id()));
    c.pca_components = field_or(j, "pca_components", c.pca_components);
    c.ridge = field_or(j, "ridge", c.ridge);
    c.min_separation = field_or(j, "min_separation", c.min_separation);
    c.min_group_radius = field_or(j, "min_group_radius", c.min_group_radius);
    if (const auto it = j.find("tsne"); it != j.end()) {
        const json& t = *it;
        c.tsne.perplexity = field_or(t, "perplexity", c.tsne.perplexity);
        c.tsne.iterations = field_or(t, "iterations", c.tsne.iterations);
        c.tsne.learning_rate = field_or(t, "learning_rate", c.tsne.learning_rate);
        c.tsne.early_exaggeration = field_or(t, "early_exaggeration", c.tsne.early_exaggeration);
        c.tsne.early_exaggeration_iters = field_or(t, "early_exaggeration_iters", c.tsne.early_exaggeration_iters);
        c.tsne.initial_momentum = field_or(t, "initial_momentum", c.tsne.initial_momentum);
        c.tsne.final_momentum = field_or(t, "final_momentum", c.tsne.final_momentum);
        c.tsne.momentum_switch_iter = field_or(t, "momentum_switch_iter", c.tsne.momentum_switch_iter);
        c.tsne.seed = field_or(t, "seed", c.tsne.seed);
    }
    if (!(c.threshold > 0 && c.threshold < 1))
        throw_invalid("threshold must lie in (0, 1)");
    if (c.pca_components < 1)
        throw_invalid("pca_components must be positive");
    return c;
}

json snapshot_to_json(const SessionSnapshot& s) {
    json reduced = json::array();
    for (const auto& r : s.reduced)
        reduced.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    json embedding = json::array();
    for (const auto& p : s.embedding)
        embedding.push_back(point_json(p));
    json initial = json::array();
    for (const auto& p : s.initial_positions)
        initial.push_back(point_json(p));
    json kl = json::array();
    for (const auto& c : s.kl_trace)
        kl.push_back({c.iteration, c.kl});
    return {
        {"schema_version", kSchemaVersion},
        {"session_id", s.session_id},
        {"config", config_to_json(s.config)},
        {"image_ids", s.image_ids},
        {"features", s.features},
        {"reduced", std::move(reduced)},
        {"embedding", std::move(embedding)},
        {"initial_positions", std::move(initial)},
        {"kl_trace", std::move(kl)},
        {"embedded", s.embedded},
    };
}

SessionSnapshot snapshot_from_json(const json& j) {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw Error(ErrorCode::Parse, "unsupported snapshot schema version");
    SessionSnapshot s;
    s.session_id = j.at("session_id").get<std::string>();
    s.config = config_from_json(j.at("config"));
    s.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    s.features = j.at("features").get<std::vector<FeatureVector>>();
    for (const auto& r : j.at("reduced")) {
        const auto v = r.get<std::vector<double>>();
        s.reduced.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    for (const auto& p : j.at("embedding"))
        s.embedding.push_back(point_from(p));
    for (const auto& p : j.at("initial_positions"))
        s.initial_positions.push_back(point_from(p));
    for (const auto& c : j.at("kl_trace"))
        s.kl_trace.push_back({c.at(0).get<int>(), c.at(1).get<double>()});
    s.embedded = j.at("embedded").get<bool>();
    const std::size_t n = s.image_ids.size();
    if (s.features.size() != n || s.reduced.size() != n || s.embedding.size() != n || s.initial_positions.size() != n)
        throw Error(ErrorCode::Parse, "snapshot arrays disagree in length");
    return s;
}

namespace {

struct EventEncoder {
    json& out;
    void operator()(const MoveEvent& e) {
        out["type"] = "move";
        out["image_id"] = e.image_id;
        out["x"] = e.position.x;
        out["y"] = e.position.y;
        out["by"] = to_string(e.by);
    }
    void operator()(const CreateGroupEvent& e) {
        out["type"] = "create_group";
        out["group_id"] = e.group_id;
        out["label"] = e.label;
    }
    void operator()(const RenameGroupEvent& e) {
        out["type"] = "rename_group";
        out["group_id"] = e.group_id;
        out["label"] = e.label;
    }
    void operator()(const DeleteGroupEvent& e) {
        out["type"] = "delete_group";
        out["group_id"] = e.group_id;
    }
    void operator()(const AssignEvent& e) {
        out["type"] = "assign";
        out["image_id"] = e.image_id;
        out["group_id"] = e.group_id;
        out["by"] = to_string(e.by);
        out["probability"] = e.probability;
    }
    void operator()(const UnassignEvent& e) {
        out["type"] = "unassign";
        out["image_id"] = e.image_id;
    }
    void operator()(const ScoresEvent& e) {
        out["type"] = "scores";
        out["scores"] = scores_json(e.scores);
    }
    void operator()(const ThresholdEvent& e) {
        out["type"] = "set_threshold";
        out["threshold"] = e.threshold;
    }
};

} // namespace

json event_to_json(const Event& event) {
    json out = {{"batch", event.batch}};
    std::visit(EventEncoder{out}, event.body);
    return out;
}

Event event_from_json(const json& j) {
    Event e;
    e.batch = j.at("batch").get<std::uint64_t>();
    const auto type = j.at("type").get<std::string>();
    if (type == "move")
        e.body = MoveEvent{j.at("image_id").get<std::string>(), {j.at("x").get<double>(), j.at("y").get<double>()},
                           actor_from_string(j.at("by").get<std::string>())};
    else if (type == "create_group")
        e.body = CreateGroupEvent{j.at("group_id").get<std::string>(), j.at("label").get<std::string>()};
    else if (type == "rename_group")
        e.body = RenameGroupEvent{j.at("group_id").get<std::string>(), j.at("label").get<std::string>()};
    else if (type == "delete_group")
        e.body = DeleteGroupEvent{j.at("group_id").get<std::string>()};
    else if (type == "assign")
        e.body = AssignEvent{j.at("image_id").get<std::string>(), j.at("group_id").get<std::string>(),
                             actor_from_string(j.at("by").get<std::string>()), j.at("probability").get<double>()};
    else if (type == "unassign")
        e.body = UnassignEvent{j.at("image_id").get<std::string>()};
    else if (type == "scores")
        e.body = ScoresEvent{scores_from(j.at("scores"))};
    else if (type == "set_threshold")
        e.body = ThresholdEvent{j.at("threshold").get<double>()};
    else
        throw Error(ErrorCode::Parse, "unknown event type '" + type + "'");
    return e;
}

json log_record_to_json(const LogRecord& record) {
    if (record.undo)
        return {{"type", "undo"}};
    return event_to_json(record.event);
}

LogRecord log_record_from_json(const json& j) {
    if (j.at("type").get<std::string>() == "undo")
        return {true, {}};
    return {false, event_from_json(j)};
}

json assignment_to_json(const Assignment& a) {
    json probs = json::array();
    for (const auto& [gid, p] : a.probabilities)
        probs.push_back({{"group_id", gid}, {"probability", p}});
    return {{"image_id", a.image_id},
            {"chosen_group", a.chosen_group ? json(*a.chosen_group) : json(nullptr)},
            {"probabilities", std::move(probs)}};
}

json suggestion_to_json(const ProximitySuggestion& s) {
    return {{"image_id", s.image_id}, {"group_id", s.group_id}, {"distance", s.distance}};
}

json heatmap_to_json(const Heatmap& h) {
    json rows = json::array();
    for (int r = 0; r < h.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < h.cols; ++c)
            row.push_back(h.at(r, c));
        rows.push_back(std::move(row));
    }
    return {{"rows", h.rows}, {"cols", h.cols}, {"baseline", h.baseline}, {"values", std::move(rows)}};
}

json grid_to_json(const std::vector<GridEntry>& grid) {
    json out = json::array();
    for (const auto& g : grid)
        out.push_back({{"image_id", g.image_id},
                       {"group_id", g.group_id ? json(*g.group_id) : json(nullptr)},
                       {"probability", g.probability}});
    return out;
}

json session_state_to_json(const Session& session) {
    const auto& st = session.state();
    json items = json::array();
    for (const auto& it : st.items) {
        bool badge = false;
        if (it.group_id)
            badge = session.group(*it.group_id).auto_members.contains(it.image_id);
        items.push_back({{"image_id", it.image_id},
                         {"x", it.position.x},
                         {"y", it.position.y},
                         {"pinned", it.pinned},
                         {"group_id", it.group_id ? json(*it.group_id) : json(nullptr)},
                         {"provenance", to_string(it.provenance)},
                         {"auto_badge", badge}});
    }
    json groups = json::array();
    for (const auto& g : st.groups) {
        groups.push_back({{"id", g.id},
                          {"label", g.label},
                          {"creation_index", g.creation_index},
                          {"members", g.members},
                          {"auto_members", std::vector<std::string>(g.auto_members.begin(), g.auto_members.end())},
                          {"auto_probability", g.auto_probability}});
    }
    json suggestions = json::array();
    for (const auto& s : session.proximity_suggestions())
        suggestions.push_back(suggestion_to_json(s));
    const auto& cfg = session.snapshot().config;
    return {
        {"schema_version", kSchemaVersion},
        {"session_id", session.id()},
        {"embedded", session.snapshot().embedded},
        {"canvas", {{"width", cfg.canvas.width}, {"height", cfg.canvas.height}}},
        {"threshold", st.threshold},
        {"next_creation_index", st.next_creation_index},
        {"items", std::move(items)},
        {"groups", std::move(groups)},
        {"scores", scores_json(st.scores)},
        {"suggestions", std::move(suggestions)},
        {"event_count", session.events().size()},
    };
}

json apply_user_request(Session& s, const json& body) {
    if (!body.is_object() || !body.contains("type"))
        throw_invalid("event needs a 'type'");
    const auto type = body.at("type").get<std::string>();
    json result = json::object();
    if (type == "move") {
        const auto suggestions =
            s.move_image(body.at("image_id").get<std::string>(), {body.at("x").get<double>(), body.at("y").get<double>()});
        json arr = json::array();
        for (const auto& sg : suggestions)
            arr.push_back(suggestion_to_json(sg));
        result["suggestions"] = std::move(arr);
    } else if (type == "create_group") {
        result["group_id"] = s.create_group(body.value("label", std::string()));
    } else if (type == "rename_group") {
        s.rename_group(body.at("group_id").get<std::string>(), body.at("label").get<std::string>());
    } else if (type == "delete_group") {
        s.delete_group(body.at("group_id").get<std::string>());
    } else if (type == "assign") {
        s.assign_to_group(body.at("image_id").get<std::string>(), body.at("group_id").get<std::string>(), Actor::User);
    } else if (type == "unassign") {
        s.unassign(body.at("image_id").get<std::string>());
    } else if (type == "undo") {
        const bool undone = s.undo();
        result["undone"] = undone;
        if (!undone)
            result["notice"] = "nothing to undo";
    } else if (type == "set_threshold") {
        s.set_threshold(body.at("threshold").get<double>());
    } else {
        throw_invalid("unknown event type '" + type + "'");
    }
    return result;
}

} // namespace imtriage
