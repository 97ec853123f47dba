#pragma once

#include "imtriage/image.hpp"
#include "imtriage/relation_model.hpp"
#include "imtriage/session.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace imtriage {

/// One live session plus what the service keeps beside it. `mutex` serialises
/// writers; readers take it too so they always see a consistent state.
struct SessionEntry {
    std::mutex mutex;
    std::optional<Session> session;           // empty while the embed job runs
    std::vector<ImageRecord> images;          // snapshot order; empty for feature-only sessions
    std::shared_ptr<const RelationModel> model;
    std::filesystem::path dir;                // empty for in-memory stores
    std::string embed_job;
    std::string embed_error;
};

/// Session directory layout:
///   snapshot.json   initial snapshot
///   events.jsonl    append-only event log (one JSON object per line)
///   model.ref       file name of the session's model snapshot, if fine-tuned
///   images/NNNNNN.png
class SessionStore {
public:
    /// An empty root keeps everything in memory. Otherwise existing sessions
    /// under `root` are loaded by replaying their logs.
    SessionStore(std::filesystem::path root, std::shared_ptr<const RelationModel> default_model);

    std::string allocate_id();

    /// Registers an entry awaiting its embedding.
    std::shared_ptr<SessionEntry> reserve(const std::string& id, std::vector<ImageRecord> images);

    /// Installs the built session, persists its snapshot/images and attaches the event sink.
    void publish(const std::shared_ptr<SessionEntry>& entry, Session session);

    std::shared_ptr<SessionEntry> find(const std::string& id) const;
    std::vector<std::string> ids() const;

    /// Swaps the session's model and records it in model.ref.
    void set_model(SessionEntry& entry, std::shared_ptr<const RelationModel> model);

    std::shared_ptr<const RelationModel> default_model() const;
    void set_default_model(std::shared_ptr<const RelationModel> model);

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    void load_existing();
    void attach_sink(SessionEntry& entry);

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
    std::shared_ptr<const RelationModel> default_model_;
    std::uint64_t next_id_ = 1;
};

} // namespace imtriage
