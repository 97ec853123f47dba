#pragma once

#include "imtriage/canvas.hpp"
#include "imtriage/features.hpp"
#include "imtriage/grouping.hpp"
#include "imtriage/image.hpp"
#include "imtriage/layout.hpp"
#include "imtriage/tsne.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

namespace imtriage {

class RelationModel;

enum class Provenance { Initial, User, Auto };
enum class Actor { User, Auto };

const char* to_string(Provenance p) noexcept;
const char* to_string(Actor a) noexcept;
Provenance provenance_from_string(const std::string& s);
Actor actor_from_string(const std::string& s);

struct CanvasItem {
    std::string image_id;
    Point position;
    bool pinned = false;
    std::optional<std::string> group_id;
    Provenance provenance = Provenance::Initial;

    bool operator==(const CanvasItem&) const = default;
};

struct Group {
    std::string id;
    std::string label;
    int creation_index = 0;
    std::vector<std::string> members;        // insertion order
    std::set<std::string> auto_members;      // badge set, subset of members
    std::map<std::string, double> auto_probability; // probability recorded when auto-assigned

    bool is_confirmed(const std::string& image_id) const;
    bool operator==(const Group&) const = default;
};

struct SessionConfig {
    CanvasBounds canvas{1000.0, 1000.0};
    double margin = 40.0;
    double threshold = kDefaultThreshold;
    std::uint64_t seed = 42;
    ExtractorSpec extractor;
    int pca_components = 8;
    TsneParams tsne;
    double ridge = kDefaultRidge;
    double min_separation = kDefaultMinSeparation;
    double min_group_radius = kDefaultMinGroupRadius;

    bool operator==(const SessionConfig&) const = default;
};

/// Everything fixed at session creation; the event log is replayed on top.
struct SessionSnapshot {
    std::string session_id;
    SessionConfig config;
    std::vector<std::string> image_ids;
    std::vector<FeatureVector> features;     // raw extractor output
    std::vector<Eigen::VectorXd> reduced;    // PCA coordinates
    std::vector<Point> embedding;            // raw t-SNE coordinates
    std::vector<Point> initial_positions;    // canvas placement
    std::vector<KlCheckpoint> kl_trace;
    bool embedded = false;

    std::size_t size() const noexcept { return image_ids.size(); }
    std::size_t index_of(const std::string& image_id) const; // throws NotFound
};

using ScoreTable = std::map<std::string, std::vector<std::pair<std::string, double>>>;

struct SessionState {
    std::vector<CanvasItem> items; // snapshot image order
    std::vector<Group> groups;     // creation order
    int next_creation_index = 1;
    double threshold = kDefaultThreshold;
    ScoreTable scores; // last auto-group probabilities per image

    bool operator==(const SessionState&) const = default;
};

struct MoveEvent {
    std::string image_id;
    Point position;
    Actor by = Actor::User;
    bool operator==(const MoveEvent&) const = default;
};
struct CreateGroupEvent {
    std::string group_id;
    std::string label;
    bool operator==(const CreateGroupEvent&) const = default;
};
struct RenameGroupEvent {
    std::string group_id;
    std::string label;
    bool operator==(const RenameGroupEvent&) const = default;
};
struct DeleteGroupEvent {
    std::string group_id;
    bool operator==(const DeleteGroupEvent&) const = default;
};
struct AssignEvent {
    std::string image_id;
    std::string group_id;
    Actor by = Actor::User;
    double probability = 1.0;
    bool operator==(const AssignEvent&) const = default;
};
struct UnassignEvent {
    std::string image_id;
    bool operator==(const UnassignEvent&) const = default;
};
struct ScoresEvent {
    ScoreTable scores;
    bool operator==(const ScoresEvent&) const = default;
};
struct ThresholdEvent {
    double threshold = kDefaultThreshold;
    bool operator==(const ThresholdEvent&) const = default;
};

using EventBody = std::variant<MoveEvent, CreateGroupEvent, RenameGroupEvent, DeleteGroupEvent, AssignEvent,
                               UnassignEvent, ScoresEvent, ThresholdEvent>;

struct Event {
    std::uint64_t batch = 0;
    EventBody body;
    bool operator==(const Event&) const = default;
};

/// What the persistence layer sees: committed events and undo markers.
struct LogRecord {
    bool undo = false;
    Event event; // unused when undo
};

struct GridEntry {
    std::string image_id;
    std::optional<std::string> group_id;
    double probability = 1.0; // 1.0 sentinel for user-confirmed members
};

SessionState initial_state(const SessionSnapshot& snapshot);
void apply_event(SessionState& state, const EventBody& event);
SessionState replay(const SessionSnapshot& snapshot, const std::vector<Event>& events);

/// Replays a persisted log, resolving undo markers.
std::vector<Event> resolve_log(const std::vector<LogRecord>& records);

/// Canvas state machine for one user session. Every mutation is validated,
/// recorded as one batch of events, and applied; undo drops the last batch
/// and replays from the snapshot.
class Session {
public:
    explicit Session(SessionSnapshot snapshot, std::vector<Event> events = {});

    const SessionSnapshot& snapshot() const noexcept { return snapshot_; }
    const SessionState& state() const noexcept { return state_; }
    const std::vector<Event>& events() const noexcept { return events_; }
    const std::string& id() const noexcept { return snapshot_.session_id; }

    using Sink = std::function<void(const LogRecord&)>;
    void set_sink(Sink sink) { sink_ = std::move(sink); }

    const CanvasItem& item(const std::string& image_id) const;
    const Group& group(const std::string& group_id) const;

    std::vector<ProximitySuggestion> move_image(const std::string& image_id, Point position);
    std::string create_group(const std::string& label);
    void rename_group(const std::string& group_id, const std::string& label);
    void delete_group(const std::string& group_id);
    void assign_to_group(const std::string& image_id, const std::string& group_id, Actor by = Actor::User,
                         double probability = 1.0);
    void unassign(const std::string& image_id);
    void set_threshold(double threshold);

    /// Confirmed members per group, in creation order, skipping empty groups.
    std::vector<GroupExamples> learning_groups() const;

    std::vector<Assignment> run_auto_group(const PairScorer& score);
    std::vector<Assignment> run_auto_group(const RelationModel& model);

    /// Returns the moved items and their new positions.
    std::vector<std::pair<std::string, Point>> run_auto_position();

    /// False (and no change) when there is nothing to undo.
    bool undo();

    std::vector<GridEntry> grid_view() const;
    std::vector<ProximitySuggestion> proximity_suggestions() const;

private:
    void commit(std::vector<EventBody> bodies);

    SessionSnapshot snapshot_;
    SessionState state_;
    std::vector<Event> events_;
    std::uint64_t next_batch_ = 1;
    Sink sink_;
};

struct SessionInput {
    std::vector<std::string> ids;
    std::vector<FeatureVector> features;
};

/// Standardize -> PCA -> t-SNE -> canvas. Fewer than two images skip the
/// embedding and sit at the canvas centre.
SessionSnapshot build_snapshot(std::string session_id, SessionInput input, const SessionConfig& config,
                               std::stop_token stop = {}, const ProgressFn& progress = {});

SessionInput features_from_images(const std::vector<ImageRecord>& images, const ExtractorSpec& extractor);

Session create_session(std::string session_id, const std::vector<ImageRecord>& images, const SessionConfig& config,
                       std::stop_token stop = {}, const ProgressFn& progress = {});

} // namespace imtriage
