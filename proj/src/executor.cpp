#include "bsched/executor.hpp"

#include <algorithm>
#include <stdexcept>

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace bsched {

const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::JobStarted: return "JobStarted";
    case EventKind::JobCompleted: return "JobCompleted";
    case EventKind::JobWalltimeExceeded: return "JobWalltimeExceeded";
    case EventKind::NodeSuspected: return "NodeSuspected";
    case EventKind::NodeRecovered: return "NodeRecovered";
    case EventKind::SubmitJob: return "SubmitJob";
    case EventKind::ReservationDue: return "ReservationDue";
    }
    return "?";
}

// --------------------------------------------------------------------------
// VirtualClock

void VirtualClock::purge_voided() const {
    while (!pending_.empty()) {
        auto top = std::min_element(pending_.begin(), pending_.end(),
                                    [](const SimEvent& a, const SimEvent& b) {
                                        if (a.at != b.at)
                                            return a.at < b.at;
                                        return a.eventId < b.eventId;
                                    });
        if (std::find(voided_.begin(), voided_.end(), top->eventId) == voided_.end())
            return;
        pending_.erase(top);
    }
}

void VirtualClock::advance_to(Timestamp t) {
    if (t < now_)
        throw std::logic_error("virtual clock cannot move backwards");
    purge_voided();
    auto next = peek_next_time();
    if (next && t > *next)
        throw std::logic_error("advance_to would skip a pending event");
    now_ = t;
}

std::optional<SimEvent> VirtualClock::advance() {
    purge_voided();
    if (pending_.empty())
        return std::nullopt;
    auto top = std::min_element(pending_.begin(), pending_.end(),
                                [](const SimEvent& a, const SimEvent& b) {
                                    if (a.at != b.at)
                                        return a.at < b.at;
                                    return a.eventId < b.eventId;
                                });
    SimEvent ev = *top;
    pending_.erase(top);
    now_ = std::max(now_, ev.at);
    return ev;
}

std::optional<Timestamp> VirtualClock::peek_next_time() const {
    purge_voided();
    if (pending_.empty())
        return std::nullopt;
    Timestamp best = pending_.front().at;
    for (const auto& ev : pending_)
        best = std::min(best, ev.at);
    return best;
}

bool VirtualClock::has_pending() const {
    purge_voided();
    return !pending_.empty();
}

std::size_t VirtualClock::pending_count() const {
    purge_voided();
    std::size_t count = 0;
    for (const auto& ev : pending_)
        if (std::find(voided_.begin(), voided_.end(), ev.eventId) == voided_.end())
            ++count;
    return count;
}

std::uint64_t VirtualClock::schedule(EventKind kind, Timestamp at, JobId id,
                                     std::string node, std::size_t recordIndex) {
    if (at < now_)
        throw std::logic_error("cannot schedule an event in the past");
    SimEvent ev;
    ev.kind = kind;
    ev.at = at;
    ev.idJob = id;
    ev.node = std::move(node);
    ev.recordIndex = recordIndex;
    ev.eventId = nextSeq_++;
    pending_.push_back(std::move(ev));
    return pending_.back().eventId;
}

void VirtualClock::void_event(std::uint64_t eventId) {
    voided_.push_back(eventId);
}

// --------------------------------------------------------------------------
// Health probes

bool HealthSchedule::is_down(const std::string& node, Timestamp t) const {
    for (const auto& d : downtimes)
        if (d.node == node && d.from <= t && t < d.to)
            return true;
    return false;
}

std::map<std::string, NodeHealth> check_nodes(const std::vector<Node>& nodes,
                                              Seconds timeout, Timestamp now,
                                              const HealthSchedule& schedule) {
    std::map<std::string, NodeHealth> out;
    for (const auto& node : nodes) {
        if (schedule.is_down(node.name, now)) {
            out[node.name] = NodeHealth::Suspected;
            continue;
        }
        Seconds latency = 0;
        auto it = node.properties.find("probe_latency");
        if (it != node.properties.end() && std::holds_alternative<std::int64_t>(it->second))
            latency = std::get<std::int64_t>(it->second);
        out[node.name] = latency > timeout ? NodeHealth::Suspected : NodeHealth::Alive;
    }
    return out;
}

// --------------------------------------------------------------------------
// Shared store effects

bool fail_job(Store& store, JobId id, Timestamp now, const std::string& reason,
              bool hadStarted) {
    auto job = store.get_job(id);
    if (!job || is_terminal(job->state))
        return false;
    // Walk to toError from whatever state the job is observed in; racing
    // transitions are retried against the fresh state.
    JobState state = job->state;
    while (state != JobState::ToError) {
        if (is_terminal(state))
            return false;
        if (store.cas_update_state(id, state, JobState::ToError) == CasResult::Updated)
            break;
        auto fresh = store.get_job(id);
        if (!fresh)
            return false;
        state = fresh->state;
    }
    store.set_message(id, reason);
    if (hadStarted)
        store.set_stop_time(id, now);
    store.clear_assignments(id);
    store.clear_reservation(id);
    store.cas_update_state(id, JobState::ToError, JobState::Error);
    return true;
}

void finish_job(Store& store, const Completion& c) {
    if (c.walltimeExceeded) {
        if (store.cas_update_state(c.idJob, JobState::Running, JobState::ToError) !=
            CasResult::Updated)
            return; // already cancelled
        store.set_message(c.idJob, "walltime exceeded");
        store.set_stop_time(c.idJob, c.at);
        store.clear_assignments(c.idJob);
        store.clear_reservation(c.idJob);
        store.cas_update_state(c.idJob, JobState::ToError, JobState::Error);
        store.record_accounting(c.idJob, "execution", "killed at walltime");
        return;
    }
    if (store.cas_update_state(c.idJob, JobState::Running, JobState::Terminated) !=
        CasResult::Updated)
        return;
    store.set_stop_time(c.idJob, c.at);
    store.clear_assignments(c.idJob);
    store.clear_reservation(c.idJob);
    store.record_accounting(c.idJob, "execution", "completed");
}

// --------------------------------------------------------------------------
// SimExecutor

SimExecutor::SimExecutor(Store& store, VirtualClock& clock, ExecutorConfig config,
                         HealthSchedule schedule, NotifyFn notify)
    : Executor(store, config, std::move(notify)), clock_(clock),
      schedule_(std::move(schedule)) {}

bool SimExecutor::launch(const Job& job, const Assignment& assignment) {
    if (config_.healthCheckEnabled) {
        auto health = check_nodes(config_.probeTimeout);
        for (const auto& slice : assignment) {
            auto it = health.find(slice.node);
            bool alive = it != health.end() && it->second == NodeHealth::Alive;
            auto stored = store_.get_node(slice.node);
            if (stored && stored->health == NodeHealth::Dead)
                alive = false;
            if (!alive) {
                fail_job(store_, job.idJob, clock_.now(),
                         "launch aborted: node " + slice.node + " not responding",
                         false);
                if (notify_)
                    notify_(NotificationKind::Scheduling, 0);
                return false;
            }
        }
    }
    if (store_.cas_update_state(job.idJob, JobState::ToLaunch, JobState::Launching) !=
        CasResult::Updated)
        return false;
    store_.set_start_time(job.idJob, clock_.now());
    store_.add_assignments(job.idJob, assignment);
    store_.cas_update_state(job.idJob, JobState::Launching, JobState::Running);
    running_[job.idJob] = assignment;

    Seconds actual = job.actualDuration.value_or(job.maxTime);
    bool exceeded = actual > job.maxTime;
    Seconds runFor = exceeded ? job.maxTime : actual;
    EventKind kind = exceeded ? EventKind::JobWalltimeExceeded : EventKind::JobCompleted;
    completionEvent_[job.idJob] = clock_.schedule(kind, clock_.now() + runFor, job.idJob);

    std::string detail = "started on";
    for (const auto& slice : assignment)
        detail += " " + slice.node;
    store_.record_accounting(job.idJob, "execution", detail);
    return true;
}

void SimExecutor::cancel(JobId id, const std::string& reason) {
    auto job = store_.get_job(id);
    if (!job)
        return;
    if (is_terminal(job->state)) {
        store_.record_accounting(id, "warning", "cancellation ignored: job already " +
                                                    std::string(to_string(job->state)));
        return;
    }
    bool hadStarted = job->startTime.has_value() &&
                      (job->state == JobState::Launching || job->state == JobState::Running);
    fail_job(store_, id, clock_.now(), reason, hadStarted);
    auto ev = completionEvent_.find(id);
    if (ev != completionEvent_.end()) {
        clock_.void_event(ev->second);
        completionEvent_.erase(ev);
    }
    running_.erase(id);
    std::erase_if(pending_, [id](const Completion& c) { return c.idJob == id; });
    store_.record_accounting(id, "cancellation", reason);
}

std::map<std::string, NodeHealth> SimExecutor::check_nodes(Seconds timeout) {
    return bsched::check_nodes(store_.nodes(), timeout, clock_.now(), schedule_);
}

void SimExecutor::on_completion_event(const SimEvent& ev) {
    auto it = completionEvent_.find(ev.idJob);
    if (it == completionEvent_.end() || it->second != ev.eventId)
        return; // stale event of a cancelled launch
    completionEvent_.erase(it);
    pending_.push_back({ev.idJob, ev.at, ev.kind == EventKind::JobWalltimeExceeded});
    if (notify_)
        notify_(NotificationKind::Term, ev.idJob);
}

std::size_t SimExecutor::reap_completions() {
    std::size_t count = pending_.size();
    for (const auto& c : pending_) {
        finish_job(store_, c);
        running_.erase(c.idJob);
    }
    pending_.clear();
    return count;
}

bool SimExecutor::has_pending_completions() const {
    return !pending_.empty();
}

std::map<std::string, int> SimExecutor::busy_procs() const {
    std::map<std::string, int> out;
    for (const auto& [id, assignment] : running_)
        for (const auto& slice : assignment)
            out[slice.node] += slice.procs;
    return out;
}

// --------------------------------------------------------------------------
// RealExecutor

RealExecutor::RealExecutor(Store& store, ExecutorConfig config, Store::NowFn now,
                           NotifyFn notify)
    : Executor(store, config, std::move(notify)), now_(std::move(now)) {
    monitor_ = std::thread([this] { monitor_loop(); });
}

namespace {

void kill_job_tree(std::int64_t pid) {
    if (::kill(static_cast<pid_t>(-pid), SIGKILL) != 0)
        ::kill(static_cast<pid_t>(pid), SIGKILL);
}

} // namespace

RealExecutor::~RealExecutor() {
    stop_ = true;
    if (monitor_.joinable())
        monitor_.join();
    std::lock_guard lock(mutex_);
    for (const auto& child : children_)
        kill_job_tree(child.pid);
}

bool RealExecutor::launch(const Job& job, const Assignment& assignment) {
    if (config_.healthCheckEnabled) {
        for (const auto& slice : assignment) {
            auto node = store_.get_node(slice.node);
            if (node && node->health != NodeHealth::Alive) {
                fail_job(store_, job.idJob, now(),
                         "launch aborted: node " + slice.node + " not responding",
                         false);
                if (notify_)
                    notify_(NotificationKind::Scheduling, 0);
                return false;
            }
        }
    }
    if (store_.cas_update_state(job.idJob, JobState::ToLaunch, JobState::Launching) !=
        CasResult::Updated)
        return false;

    pid_t pid = ::fork();
    if (pid < 0) {
        fail_job(store_, job.idJob, now(), "fork failed", false);
        if (notify_)
            notify_(NotificationKind::Scheduling, 0);
        return false;
    }
    if (pid == 0) {
        // Own process group so a kill reaps the whole command tree.
        ::setpgid(0, 0);
        if (!job.launchingDirectory.empty() &&
            ::chdir(job.launchingDirectory.c_str()) != 0)
            ::_exit(126);
        ::execl("/bin/sh", "sh", "-c", job.command.c_str(), (char*)nullptr);
        ::_exit(127);
    }

    Timestamp startedAt = now();
    store_.set_start_time(job.idJob, startedAt);
    store_.set_bpid(job.idJob, pid);
    store_.add_assignments(job.idJob, assignment);
    store_.cas_update_state(job.idJob, JobState::Launching, JobState::Running);
    store_.record_accounting(job.idJob, "execution",
                             "started as pid " + std::to_string(pid));
    {
        std::lock_guard lock(mutex_);
        children_.push_back({job.idJob, pid, startedAt + job.maxTime, assignment, false});
    }
    return true;
}

void RealExecutor::monitor_loop() {
    while (!stop_) {
        std::vector<Completion> ready;
        {
            std::lock_guard lock(mutex_);
            for (auto it = children_.begin(); it != children_.end();) {
                int status = 0;
                pid_t r = ::waitpid(static_cast<pid_t>(it->pid), &status, WNOHANG);
                if (r == it->pid || r < 0) {
                    ready.push_back({it->idJob, now(), it->killedForWalltime});
                    it = children_.erase(it);
                    continue;
                }
                if (!it->killedForWalltime && now() >= it->deadline) {
                    kill_job_tree(it->pid);
                    it->killedForWalltime = true;
                }
                ++it;
            }
            for (const auto& c : ready)
                pending_.push_back(c);
        }
        for (const auto& c : ready)
            if (notify_)
                notify_(NotificationKind::Term, c.idJob);
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

void RealExecutor::cancel(JobId id, const std::string& reason) {
    auto job = store_.get_job(id);
    if (!job)
        return;
    if (is_terminal(job->state)) {
        store_.record_accounting(id, "warning", "cancellation ignored: job already " +
                                                    std::string(to_string(job->state)));
        return;
    }
    {
        std::lock_guard lock(mutex_);
        for (auto it = children_.begin(); it != children_.end(); ++it) {
            if (it->idJob == id) {
                kill_job_tree(it->pid);
                ::waitpid(static_cast<pid_t>(it->pid), nullptr, 0);
                children_.erase(it);
                break;
            }
        }
        std::erase_if(pending_, [id](const Completion& c) { return c.idJob == id; });
    }
    bool hadStarted = job->startTime.has_value() &&
                      (job->state == JobState::Launching || job->state == JobState::Running);
    fail_job(store_, id, now(), reason, hadStarted);
    store_.record_accounting(id, "cancellation", reason);
}

std::map<std::string, NodeHealth> RealExecutor::check_nodes(Seconds timeout) {
    // No remote hosts exist in local mode: every node answers immediately
    // unless it was administratively marked Dead.
    (void)timeout;
    std::map<std::string, NodeHealth> out;
    for (const auto& node : store_.nodes())
        out[node.name] =
            node.health == NodeHealth::Dead ? NodeHealth::Suspected : NodeHealth::Alive;
    return out;
}

std::size_t RealExecutor::reap_completions() {
    std::vector<Completion> batch;
    {
        std::lock_guard lock(mutex_);
        batch.swap(pending_);
    }
    for (const auto& c : batch)
        finish_job(store_, c);
    return batch.size();
}

bool RealExecutor::has_pending_completions() const {
    std::lock_guard lock(mutex_);
    return !pending_.empty();
}

std::map<std::string, int> RealExecutor::busy_procs() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, int> out;
    for (const auto& child : children_)
        for (const auto& slice : child.assignment)
            out[slice.node] += slice.procs;
    return out;
}

std::size_t RealExecutor::running_count() const {
    std::lock_guard lock(mutex_);
    return children_.size();
}

} // namespace bsched
