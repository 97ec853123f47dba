#include "imtriage/session_store.hpp"

#include "imtriage/error.hpp"
#include "imtriage/session_json.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>

namespace imtriage {

namespace fs = std::filesystem;

namespace {

std::string image_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.png", index);
    return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

SessionStore::SessionStore(fs::path root, std::shared_ptr<const RelationModel> default_model)
    : root_(std::move(root)), default_model_(std::move(default_model)) {
    if (!root_.empty()) {
        fs::create_directories(root_ / "sessions");
        load_existing();
    }
}

void SessionStore::load_existing() {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root_ / "sessions"))
        if (entry.is_directory())
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());

    for (const auto& dir : dirs) {
        const fs::path snap_path = dir / "snapshot.json";
        if (!fs::exists(snap_path))
            continue; // embedding never finished
        auto snapshot = snapshot_from_json(json::parse(read_file(snap_path)));

        std::vector<LogRecord> records;
        if (std::ifstream log(dir / "events.jsonl"); log) {
            std::string line;
            while (std::getline(log, line)) {
                if (line.empty())
                    continue;
                try {
                    records.push_back(log_record_from_json(json::parse(line)));
                } catch (const json::exception&) {
                    // a torn final line from a crash mid-write
                    spdlog::warn("session {}: ignoring unreadable log line", snapshot.session_id);
                    break;
                }
            }
        }

        auto entry = std::make_shared<SessionEntry>();
        entry->dir = dir;
        entry->model = default_model_;
        if (fs::exists(dir / "model.ref")) {
            std::string ref = read_file(dir / "model.ref");
            while (!ref.empty() && (ref.back() == '\n' || ref.back() == '\r'))
                ref.pop_back();
            entry->model = std::make_shared<const RelationModel>(load_model(dir / ref));
        }
        if (fs::exists(dir / "images")) {
            for (std::size_t i = 0; i < snapshot.size(); ++i) {
                const fs::path p = dir / "images" / image_file_name(i);
                if (!fs::exists(p)) {
                    entry->images.clear();
                    break;
                }
                entry->images.push_back(load_image(p, snapshot.image_ids[i]));
            }
        }
        const std::string id = snapshot.session_id;
        entry->session.emplace(std::move(snapshot), resolve_log(records));
        attach_sink(*entry);
        sessions_[id] = entry;

        if (id.size() > 1 && id.front() == 's') {
            try {
                next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
            } catch (const std::exception&) {
            }
        }
    }
}

std::string SessionStore::allocate_id() {
    std::lock_guard lock(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
    return buf;
}

std::shared_ptr<SessionEntry> SessionStore::reserve(const std::string& id, std::vector<ImageRecord> images) {
    auto entry = std::make_shared<SessionEntry>();
    entry->images = std::move(images);
    std::lock_guard lock(mutex_);
    entry->model = default_model_;
    if (!root_.empty())
        entry->dir = root_ / "sessions" / id;
    if (!sessions_.emplace(id, entry).second)
        throw Error(ErrorCode::Conflict, "session '" + id + "' already exists");
    return entry;
}

void SessionStore::publish(const std::shared_ptr<SessionEntry>& entry, Session session) {
    if (!entry->dir.empty()) {
        fs::create_directories(entry->dir);
        if (!entry->images.empty()) {
            fs::create_directories(entry->dir / "images");
            for (std::size_t i = 0; i < entry->images.size(); ++i)
                save_png(entry->images[i], entry->dir / "images" / image_file_name(i));
        }
        // events.jsonl must exist before the snapshot marks the session complete
        std::ofstream(entry->dir / "events.jsonl", std::ios::app);
        write_file_atomic(entry->dir / "snapshot.json", snapshot_to_json(session.snapshot()).dump());
    }
    entry->session.emplace(std::move(session));
    attach_sink(*entry);
}

void SessionStore::attach_sink(SessionEntry& entry) {
    if (entry.dir.empty() || !entry.session)
        return;
    auto log = std::make_shared<std::ofstream>(entry.dir / "events.jsonl", std::ios::app);
    if (!*log)
        throw Error(ErrorCode::Io, "cannot open event log in " + entry.dir.string());
    entry.session->set_sink([log](const LogRecord& record) {
        *log << log_record_to_json(record).dump() << '\n';
        log->flush();
    });
}

std::shared_ptr<SessionEntry> SessionStore::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw_not_found("unknown session '" + id + "'");
    return it->second;
}

std::vector<std::string> SessionStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, entry] : sessions_)
        out.push_back(id);
    return out;
}

void SessionStore::set_model(SessionEntry& entry, std::shared_ptr<const RelationModel> model) {
    if (!entry.dir.empty()) {
        save_model(*model, entry.dir / "model.bin");
        write_file_atomic(entry.dir / "model.ref", "model.bin\n");
    }
    entry.model = std::move(model);
}

std::shared_ptr<const RelationModel> SessionStore::default_model() const {
    std::lock_guard lock(mutex_);
    return default_model_;
}

void SessionStore::set_default_model(std::shared_ptr<const RelationModel> model) {
    std::lock_guard lock(mutex_);
    default_model_ = std::move(model);
}

} // namespace imtriage
