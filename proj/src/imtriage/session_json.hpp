#pragma once

#include "imtriage/grouping.hpp"
#include "imtriage/heatmap.hpp"
#include "imtriage/layout.hpp"
#include "imtriage/session.hpp"

#include <json.hpp>

namespace imtriage {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const json& j, SessionConfig base = {});

json snapshot_to_json(const SessionSnapshot& snapshot);
SessionSnapshot snapshot_from_json(const json& j);

json event_to_json(const Event& event);
Event event_from_json(const json& j);

json log_record_to_json(const LogRecord& record);
LogRecord log_record_from_json(const json& j);

json assignment_to_json(const Assignment& a);
json suggestion_to_json(const ProximitySuggestion& s);
json heatmap_to_json(const Heatmap& h);
json grid_to_json(const std::vector<GridEntry>& grid);

/// Full client-facing view: items, groups, probabilities and suggestions.
json session_state_to_json(const Session& session);

/// Applies a client request ({"type": "move", ...} or {"type": "undo"}) as the
/// user. Returns the request-specific result (new group id, suggestions, ...).
json apply_user_request(Session& session, const json& request);

} // namespace imtriage
