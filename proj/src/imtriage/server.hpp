#pragma once

#include "imtriage/jobs.hpp"
#include "imtriage/relation_model.hpp"
#include "imtriage/session.hpp"
#include "imtriage/session_store.hpp"

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace imtriage {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir;   // empty: sessions live in memory only
    std::filesystem::path model_path; // empty: untrained model
    int hidden = 64;
    SessionConfig session_defaults;
};

struct FinetuneOptions {
    int steps = 200;
    double learning_rate = 1e-4;
    int batch_size = 32;
    std::uint64_t seed = 5;
};

/// HTTP+JSON front end over the session store and background jobs.
class Server {
public:
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the port.
    int bind();
    /// Serves until stop(). Call bind() first.
    void serve();
    /// Blocks until serve() is accepting connections.
    void wait_until_ready();
    void stop();

    SessionStore& store() noexcept { return *store_; }
    JobManager& jobs() noexcept { return *jobs_; }
    const ServerOptions& options() const noexcept { return options_; }

private:
    void register_routes();

    ServerOptions options_;
    std::unique_ptr<SessionStore> store_;
    std::unique_ptr<JobManager> jobs_;
    std::unique_ptr<httplib::Server> http_;
    std::mutex run_mutex_;
    bool serving_ = false;
    bool stopped_ = false;
};

/// Builds a fine-tuning dataset from the confirmed members of each group.
LabeledFeatures group_training_set(const Session& session);

} // namespace imtriage
