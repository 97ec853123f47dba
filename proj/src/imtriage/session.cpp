#include "imtriage/session.hpp"

#include "imtriage/error.hpp"
#include "imtriage/pca.hpp"
#include "imtriage/relation_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace imtriage {

const char* to_string(Provenance p) noexcept {
    switch (p) {
    case Provenance::Initial: return "initial";
    case Provenance::User: return "user";
    case Provenance::Auto: return "auto";
    }
    return "initial";
}

const char* to_string(Actor a) noexcept { return a == Actor::User ? "user" : "auto"; }

Provenance provenance_from_string(const std::string& s) {
    if (s == "initial")
        return Provenance::Initial;
    if (s == "user")
        return Provenance::User;
    if (s == "auto")
        return Provenance::Auto;
    throw_invalid("unknown provenance '" + s + "'");
}

Actor actor_from_string(const std::string& s) {
    if (s == "user")
        return Actor::User;
    if (s == "auto")
        return Actor::Auto;
    throw_invalid("unknown actor '" + s + "'");
}

bool Group::is_confirmed(const std::string& image_id) const {
    return !auto_members.contains(image_id) &&
           std::find(members.begin(), members.end(), image_id) != members.end();
}

std::size_t SessionSnapshot::index_of(const std::string& image_id) const {
    const auto it = std::find(image_ids.begin(), image_ids.end(), image_id);
    if (it == image_ids.end())
        throw_not_found("unknown image '" + image_id + "'");
    return static_cast<std::size_t>(it - image_ids.begin());
}

namespace {

CanvasItem& find_item(SessionState& state, const std::string& image_id) {
    for (auto& item : state.items)
        if (item.image_id == image_id)
            return item;
    throw_not_found("unknown image '" + image_id + "'");
}

std::vector<Group>::iterator find_group(SessionState& state, const std::string& group_id) {
    auto it = std::find_if(state.groups.begin(), state.groups.end(),
                           [&](const Group& g) { return g.id == group_id; });
    if (it == state.groups.end())
        throw_not_found("unknown group '" + group_id + "'");
    return it;
}

void detach(SessionState& state, CanvasItem& item) {
    if (!item.group_id)
        return;
    auto g = find_group(state, *item.group_id);
    g->members.erase(std::remove(g->members.begin(), g->members.end(), item.image_id), g->members.end());
    g->auto_members.erase(item.image_id);
    g->auto_probability.erase(item.image_id);
    item.group_id.reset();
}

struct Applier {
    SessionState& state;

    void operator()(const MoveEvent& e) {
        auto& item = find_item(state, e.image_id);
        item.position = e.position;
        if (e.by == Actor::User) {
            item.pinned = true;
            item.provenance = Provenance::User;
        } else {
            item.provenance = Provenance::Auto;
        }
    }
    void operator()(const CreateGroupEvent& e) {
        Group g;
        g.id = e.group_id;
        g.label = e.label;
        g.creation_index = state.next_creation_index++;
        state.groups.push_back(std::move(g));
    }
    void operator()(const RenameGroupEvent& e) { find_group(state, e.group_id)->label = e.label; }
    void operator()(const DeleteGroupEvent& e) {
        auto g = find_group(state, e.group_id);
        for (const auto& member : g->members)
            find_item(state, member).group_id.reset();
        state.groups.erase(g);
    }
    void operator()(const AssignEvent& e) {
        auto& item = find_item(state, e.image_id);
        find_group(state, e.group_id);
        if (item.group_id && *item.group_id != e.group_id)
            detach(state, item);
        auto g = find_group(state, e.group_id);
        if (std::find(g->members.begin(), g->members.end(), e.image_id) == g->members.end())
            g->members.push_back(e.image_id);
        if (e.by == Actor::User) {
            g->auto_members.erase(e.image_id);
            g->auto_probability.erase(e.image_id);
        } else {
            g->auto_members.insert(e.image_id);
            g->auto_probability[e.image_id] = e.probability;
        }
        item.group_id = e.group_id;
    }
    void operator()(const UnassignEvent& e) { detach(state, find_item(state, e.image_id)); }
    void operator()(const ScoresEvent& e) {
        for (const auto& [image, probs] : e.scores)
            state.scores[image] = probs;
    }
    void operator()(const ThresholdEvent& e) { state.threshold = e.threshold; }
};

} // namespace

SessionState initial_state(const SessionSnapshot& snapshot) {
    SessionState state;
    state.threshold = snapshot.config.threshold;
    state.items.reserve(snapshot.size());
    for (std::size_t i = 0; i < snapshot.size(); ++i)
        state.items.push_back({snapshot.image_ids[i], snapshot.initial_positions[i], false, std::nullopt,
                               Provenance::Initial});
    return state;
}

void apply_event(SessionState& state, const EventBody& event) { std::visit(Applier{state}, event); }

SessionState replay(const SessionSnapshot& snapshot, const std::vector<Event>& events) {
    SessionState state = initial_state(snapshot);
    for (const auto& e : events)
        apply_event(state, e.body);
    return state;
}

std::vector<Event> resolve_log(const std::vector<LogRecord>& records) {
    std::vector<Event> out;
    for (const auto& r : records) {
        if (!r.undo) {
            out.push_back(r.event);
            continue;
        }
        if (out.empty())
            continue;
        const auto batch = out.back().batch;
        while (!out.empty() && out.back().batch == batch)
            out.pop_back();
    }
    return out;
}

Session::Session(SessionSnapshot snapshot, std::vector<Event> events)
    : snapshot_(std::move(snapshot)), events_(std::move(events)) {
    state_ = replay(snapshot_, events_);
    for (const auto& e : events_)
        next_batch_ = std::max(next_batch_, e.batch + 1);
}

const CanvasItem& Session::item(const std::string& image_id) const {
    for (const auto& it : state_.items)
        if (it.image_id == image_id)
            return it;
    throw_not_found("unknown image '" + image_id + "'");
}

const Group& Session::group(const std::string& group_id) const {
    for (const auto& g : state_.groups)
        if (g.id == group_id)
            return g;
    throw_not_found("unknown group '" + group_id + "'");
}

void Session::commit(std::vector<EventBody> bodies) {
    if (bodies.empty())
        return;
    const auto batch = next_batch_++;
    for (auto& body : bodies) {
        apply_event(state_, body);
        events_.push_back({batch, std::move(body)});
        if (sink_)
            sink_({false, events_.back()});
    }
}

std::vector<ProximitySuggestion> Session::move_image(const std::string& image_id, Point position) {
    item(image_id);
    if (!std::isfinite(position.x) || !std::isfinite(position.y))
        throw_invalid("position must be finite");
    commit({MoveEvent{image_id, snapshot_.config.canvas.clamp(position), Actor::User}});
    return proximity_suggestions();
}

std::string Session::create_group(const std::string& label) {
    const std::string id = "g" + std::to_string(state_.next_creation_index);
    commit({CreateGroupEvent{id, label}});
    return id;
}

void Session::rename_group(const std::string& group_id, const std::string& label) {
    group(group_id);
    commit({RenameGroupEvent{group_id, label}});
}

void Session::delete_group(const std::string& group_id) {
    group(group_id);
    commit({DeleteGroupEvent{group_id}});
}

void Session::assign_to_group(const std::string& image_id, const std::string& group_id, Actor by,
                              double probability) {
    item(image_id);
    group(group_id);
    if (!(probability >= 0.0 && probability <= 1.0))
        throw_invalid("assignment probability must lie in [0, 1]");
    commit({AssignEvent{image_id, group_id, by, by == Actor::User ? 1.0 : probability}});
}

void Session::unassign(const std::string& image_id) {
    if (!item(image_id).group_id)
        return;
    commit({UnassignEvent{image_id}});
}

void Session::set_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw_invalid("threshold must lie in (0, 1)");
    commit({ThresholdEvent{threshold}});
}

std::vector<GroupExamples> Session::learning_groups() const {
    std::vector<GroupExamples> out;
    for (const auto& g : state_.groups) {
        GroupExamples ex{g.id, {}, {}};
        for (const auto& m : g.members) {
            if (g.auto_members.contains(m))
                continue;
            ex.member_ids.push_back(m);
            ex.members.push_back(snapshot_.features[snapshot_.index_of(m)]);
        }
        if (!ex.members.empty())
            out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Assignment> Session::run_auto_group(const PairScorer& score) {
    const auto groups = learning_groups();
    if (groups.empty())
        throw_precondition("create a group first");

    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < state_.items.size(); ++i)
        if (!state_.items[i].group_id)
            candidates.push_back({state_.items[i].image_id, snapshot_.features[i]});

    auto assignments = auto_group(score, candidates, groups, state_.threshold);
    if (assignments.empty())
        return assignments;

    std::vector<EventBody> bodies;
    ScoresEvent scores;
    for (const auto& a : assignments)
        scores.scores[a.image_id] = a.probabilities;
    bodies.emplace_back(std::move(scores));
    for (const auto& a : assignments) {
        if (!a.chosen_group)
            continue;
        double p = 0.0;
        for (const auto& [gid, prob] : a.probabilities)
            if (gid == *a.chosen_group)
                p = prob;
        bodies.emplace_back(AssignEvent{a.image_id, *a.chosen_group, Actor::Auto, p});
    }
    commit(std::move(bodies));
    return assignments;
}

std::vector<Assignment> Session::run_auto_group(const RelationModel& model) {
    return run_auto_group(scorer_for(model));
}

std::vector<std::pair<std::string, Point>> Session::run_auto_position() {
    std::vector<Exemplar> exemplars;
    std::vector<PlacementQuery> targets;
    for (std::size_t i = 0; i < state_.items.size(); ++i) {
        const auto& it = state_.items[i];
        const bool confirmed_member = it.group_id && group(*it.group_id).is_confirmed(it.image_id);
        if (it.pinned || confirmed_member)
            exemplars.push_back({snapshot_.reduced[i], it.position});
        if (!it.pinned && !it.group_id)
            targets.push_back({it.image_id, snapshot_.reduced[i]});
    }
    if (exemplars.empty())
        throw_precondition("arrange a few images first");
    if (targets.empty())
        return {};

    const auto reg = fit_position_regressor(exemplars, snapshot_.config.ridge);
    const auto positions = predict_positions(reg, targets, snapshot_.config.canvas, snapshot_.config.min_separation);

    std::vector<std::pair<std::string, Point>> moved;
    std::vector<EventBody> bodies;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        moved.emplace_back(targets[k].image_id, positions[k]);
        bodies.emplace_back(MoveEvent{targets[k].image_id, positions[k], Actor::Auto});
    }
    commit(std::move(bodies));
    return moved;
}

bool Session::undo() {
    if (events_.empty())
        return false;
    const auto batch = events_.back().batch;
    while (!events_.empty() && events_.back().batch == batch)
        events_.pop_back();
    state_ = replay(snapshot_, events_);
    if (sink_)
        sink_({true, {}});
    return true;
}

std::vector<GridEntry> Session::grid_view() const {
    std::vector<GridEntry> out;
    std::vector<const Group*> groups;
    for (const auto& g : state_.groups)
        groups.push_back(&g);
    std::stable_sort(groups.begin(), groups.end(),
                     [](const Group* a, const Group* b) { return a->creation_index < b->creation_index; });
    for (const Group* g : groups) {
        std::vector<GridEntry> members;
        for (const auto& m : g->members) {
            const auto it = g->auto_probability.find(m);
            const double p = g->auto_members.contains(m) && it != g->auto_probability.end() ? it->second : 1.0;
            members.push_back({m, g->id, p});
        }
        std::stable_sort(members.begin(), members.end(),
                         [](const GridEntry& a, const GridEntry& b) { return a.probability > b.probability; });
        out.insert(out.end(), members.begin(), members.end());
    }

    std::vector<std::size_t> loose;
    for (std::size_t i = 0; i < state_.items.size(); ++i)
        if (!state_.items[i].group_id)
            loose.push_back(i);
    std::sort(loose.begin(), loose.end(), [&](std::size_t a, std::size_t b) {
        const Point pa = snapshot_.embedding[a];
        const Point pb = snapshot_.embedding[b];
        if (pa.x != pb.x)
            return pa.x < pb.x;
        if (pa.y != pb.y)
            return pa.y < pb.y;
        return snapshot_.image_ids[a] < snapshot_.image_ids[b];
    });
    for (std::size_t i : loose)
        out.push_back({state_.items[i].image_id, std::nullopt, 0.0});
    return out;
}

std::vector<ProximitySuggestion> Session::proximity_suggestions() const {
    std::vector<GroupFootprint> footprints;
    for (const auto& g : state_.groups) {
        GroupFootprint f{g.id, {}};
        for (const auto& m : g.members)
            f.member_positions.push_back(item(m).position);
        footprints.push_back(std::move(f));
    }
    std::vector<LocatedImage> loose;
    for (const auto& it : state_.items)
        if (!it.group_id)
            loose.push_back({it.image_id, it.position});
    return imtriage::proximity_suggestions(footprints, loose, snapshot_.config.min_group_radius);
}

SessionInput features_from_images(const std::vector<ImageRecord>& images, const ExtractorSpec& extractor) {
    SessionInput input;
    for (const auto& img : images) {
        input.ids.push_back(img.id);
        input.features.push_back(extract_features(img, extractor));
    }
    return input;
}

SessionSnapshot build_snapshot(std::string session_id, SessionInput input, const SessionConfig& config,
                               std::stop_token stop, const ProgressFn& progress) {
    const std::size_t n = input.ids.size();
    if (n == 0)
        throw_invalid("a session needs at least one image");
    if (input.features.size() != n)
        throw_invalid("ids and features differ in length");
    if (std::set<std::string>(input.ids.begin(), input.ids.end()).size() != n)
        throw_invalid("image ids must be unique");
    const std::size_t d = input.features.front().size();
    for (const auto& f : input.features) {
        if (f.size() != d || d == 0)
            throw_invalid("feature vectors have mismatched lengths");
        for (double v : f)
            if (!std::isfinite(v))
                throw_invalid("feature vectors must be finite");
    }

    SessionSnapshot snap;
    snap.session_id = std::move(session_id);
    snap.config = config;
    snap.image_ids = std::move(input.ids);
    snap.features = std::move(input.features);

    if (n < 2) {
        snap.reduced = {Eigen::VectorXd::Zero(1)};
        snap.embedding = {Point{0.0, 0.0}};
        snap.initial_positions = {config.canvas.center()};
        return snap;
    }

    const auto standardized = standardize_collection(snap.features).standardized;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(standardized[i].data(),
                                                                                   static_cast<Eigen::Index>(d));
    const PCAModel pca = pca_fit(x, config.pca_components);
    const Eigen::MatrixXd reduced = pca_transform_rows(pca, x);
    for (Eigen::Index i = 0; i < reduced.rows(); ++i)
        snap.reduced.push_back(reduced.row(i).transpose());

    TsneParams params = config.tsne;
    params.seed = config.seed;
    const TsneResult tsne = tsne_embed(reduced, params, stop, progress);
    snap.kl_trace = tsne.kl_trace;
    for (Eigen::Index i = 0; i < tsne.coords.rows(); ++i)
        snap.embedding.push_back({tsne.coords(i, 0), tsne.coords(i, 1)});
    snap.initial_positions = scale_to_canvas(tsne.coords, config.canvas.width, config.canvas.height, config.margin);
    snap.embedded = true;
    return snap;
}

Session create_session(std::string session_id, const std::vector<ImageRecord>& images, const SessionConfig& config,
                       std::stop_token stop, const ProgressFn& progress) {
    return Session(build_snapshot(std::move(session_id), features_from_images(images, config.extractor), config,
                                  stop, progress));
}

} // namespace imtriage
