#include "imtriage/jobs.hpp"

#include "imtriage/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace imtriage {

const char* to_string(JobKind k) noexcept {
    switch (k) {
    case JobKind::Embed: return "embed";
    case JobKind::Train: return "train";
    case JobKind::Finetune: return "finetune";
    }
    return "embed";
}

const char* to_string(JobState s) noexcept {
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    case JobState::Cancelled: return "cancelled";
    }
    return "queued";
}

void JobContext::report(double fraction, std::string message) {
    mgr_->update_progress(id_, fraction, std::move(message));
}

JobManager::JobManager() : global_worker_([this](std::stop_token st) { global_loop(st); }) {}

JobManager::~JobManager() {
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, job] : jobs_)
            job->stop.request_stop();
    }
    global_worker_.request_stop();
    queue_cv_.notify_all();
    if (global_worker_.joinable())
        global_worker_.join();
    workers_.clear();
}

std::string JobManager::next_id() { return "j" + std::to_string(counter_++); }

std::string JobManager::submit(JobKind kind, const std::string& scope, Work work) {
    std::lock_guard lock(mutex_);
    for (const auto& [id, job] : jobs_) {
        if (job->status.scope == scope && job->status.kind == kind && !is_terminal(job->status.state))
            throw Error(ErrorCode::Conflict, std::string("a ") + to_string(kind) + " job is already active for " + scope);
    }
    auto job = std::make_shared<Job>();
    job->status.job_id = next_id();
    job->status.kind = kind;
    job->status.scope = scope;
    job->work = std::move(work);
    jobs_[job->status.job_id] = job;
    workers_.emplace_back([this, job] { run(job); });
    return job->status.job_id;
}

std::string JobManager::submit_global(JobKind kind, Work work) {
    std::lock_guard lock(mutex_);
    auto job = std::make_shared<Job>();
    job->status.job_id = next_id();
    job->status.kind = kind;
    job->work = std::move(work);
    jobs_[job->status.job_id] = job;
    global_queue_.push_back(job);
    queue_cv_.notify_all();
    return job->status.job_id;
}

void JobManager::global_loop(std::stop_token stop) {
    while (true) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mutex_);
            if (!queue_cv_.wait(lock, stop, [this] { return !global_queue_.empty(); }))
                return;
            job = global_queue_.front();
            global_queue_.pop_front();
        }
        run(job);
    }
}

void JobManager::run(const std::shared_ptr<Job>& job) {
    {
        std::lock_guard lock(mutex_);
        if (job->status.state != JobState::Queued)
            return;
        if (job->stop.stop_requested()) {
            job->status.state = JobState::Cancelled;
            changed_.notify_all();
            return;
        }
        job->status.state = JobState::Running;
        changed_.notify_all();
    }
    JobContext ctx(this, job->status.job_id, job->stop.get_token());
    JobState final_state = JobState::Done;
    std::string message;
    try {
        message = job->work(ctx);
    } catch (const Error& e) {
        final_state = e.code() == ErrorCode::Cancelled ? JobState::Cancelled : JobState::Failed;
        message = e.what();
    } catch (const std::exception& e) {
        final_state = JobState::Failed;
        message = e.what();
    }
    if (final_state == JobState::Failed)
        spdlog::warn("job {} failed: {}", job->status.job_id, message);
    std::lock_guard lock(mutex_);
    job->status.state = final_state;
    if (final_state == JobState::Done)
        job->status.progress = 1.0;
    job->status.message = std::move(message);
    changed_.notify_all();
}

void JobManager::update_progress(const std::string& id, double fraction, std::string message) {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end() || is_terminal(it->second->status.state))
        return;
    auto& st = it->second->status;
    st.progress = std::clamp(std::max(st.progress, fraction), 0.0, 1.0);
    if (!message.empty())
        st.message = std::move(message);
}

JobStatus JobManager::status(const std::string& job_id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw_not_found("unknown job '" + job_id + "'");
    return it->second->status;
}

JobStatus JobManager::cancel(const std::string& job_id) {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw_not_found("unknown job '" + job_id + "'");
    auto& job = *it->second;
    if (is_terminal(job.status.state))
        return job.status;
    job.stop.request_stop();
    if (job.status.state == JobState::Queued) {
        job.status.state = JobState::Cancelled;
        global_queue_.erase(std::remove(global_queue_.begin(), global_queue_.end(), it->second), global_queue_.end());
        changed_.notify_all();
    }
    return job.status;
}

JobStatus JobManager::wait(const std::string& job_id) const {
    std::unique_lock lock(mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw_not_found("unknown job '" + job_id + "'");
    const auto job = it->second;
    changed_.wait(lock, [&] { return is_terminal(job->status.state); });
    return job->status;
}

} // namespace imtriage
