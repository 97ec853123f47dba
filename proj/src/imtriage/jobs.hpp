#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>

namespace imtriage {

enum class JobKind { Embed, Train, Finetune };
enum class JobState { Queued, Running, Done, Failed, Cancelled };

const char* to_string(JobKind k) noexcept;
const char* to_string(JobState s) noexcept;
inline bool is_terminal(JobState s) noexcept { return s == JobState::Done || s == JobState::Failed || s == JobState::Cancelled; }

struct JobStatus {
    std::string job_id;
    JobKind kind = JobKind::Embed;
    JobState state = JobState::Queued;
    double progress = 0.0;
    std::string message;
    std::string scope; // session id, or empty for global jobs
};

class JobContext {
public:
    std::stop_token stop_token() const { return stop_; }
    /// Monotone: values below the current progress are ignored.
    void report(double fraction, std::string message = {});

private:
    friend class JobManager;
    JobContext(class JobManager* mgr, std::string id, std::stop_token stop)
        : mgr_(mgr), id_(std::move(id)), stop_(std::move(stop)) {}
    class JobManager* mgr_;
    std::string id_;
    std::stop_token stop_;
};

/// Runs background work. Per-session jobs get their own thread and at most
/// one may be active per (scope, kind); global training jobs run one at a time
/// in submission order.
class JobManager {
public:
    using Work = std::function<std::string(JobContext&)>; // returns a completion message

    JobManager();
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    /// Throws Conflict if a job of this kind is already active for `scope`.
    std::string submit(JobKind kind, const std::string& scope, Work work);
    std::string submit_global(JobKind kind, Work work);

    JobStatus status(const std::string& job_id) const; // throws NotFound
    /// Requests cancellation; returns the status after the request.
    JobStatus cancel(const std::string& job_id);
    /// Blocks until the job reaches a terminal state.
    JobStatus wait(const std::string& job_id) const;

private:
    friend class JobContext;
    struct Job {
        JobStatus status;
        std::stop_source stop;
        Work work;
    };

    std::string next_id();
    void run(const std::shared_ptr<Job>& job);
    void update_progress(const std::string& id, double fraction, std::string message);
    void global_loop(std::stop_token stop);

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> global_queue_;
    std::condition_variable_any queue_cv_;
    std::vector<std::jthread> workers_;
    std::uint64_t counter_ = 1;
    std::jthread global_worker_;
};

} // namespace imtriage
