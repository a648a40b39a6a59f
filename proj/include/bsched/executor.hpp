#pragma once

#include "bsched/notifications.hpp"
#include "bsched/store.hpp"
#include "bsched/types.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

// Job execution. Simulation drives a virtual clock with a future-event
// list; real mode launches each command as a local child process. Both
// record completions that the kernel reaps into the store.

namespace bsched {

enum class EventKind {
    JobStarted,
    JobCompleted,
    JobWalltimeExceeded,
    NodeSuspected,
    NodeRecovered,
    SubmitJob,      // workload replay hook
    ReservationDue, // wakes the scheduler at a reservation start
};

const char* to_string(EventKind k);

struct SimEvent {
    EventKind kind = EventKind::JobStarted;
    Timestamp at = 0;
    JobId idJob = 0;
    std::string node;
    std::size_t recordIndex = 0; // SubmitJob: workload record to submit
    std::uint64_t eventId = 0;
};

// Time-ordered future-event list; ties fire in insertion order. now never
// decreases.
class VirtualClock {
public:
    Timestamp now() const { return now_; }

    // Jump forward without consuming events; t must not pass the next event.
    void advance_to(Timestamp t);

    // Pops the earliest pending event, sets now to its timestamp.
    std::optional<SimEvent> advance();

    std::optional<Timestamp> peek_next_time() const;
    bool has_pending() const;
    std::size_t pending_count() const;

    std::uint64_t schedule(EventKind kind, Timestamp at, JobId id = 0,
                           std::string node = {}, std::size_t recordIndex = 0);
    void void_event(std::uint64_t eventId);

private:
    void purge_voided() const;

    Timestamp now_ = 0;
    std::uint64_t nextSeq_ = 1;
    // sorted by (at, seq); lazy removal of voided events
    mutable std::vector<SimEvent> pending_;
    mutable std::vector<std::uint64_t> voided_;
};

// Scripted node downtime used by simulated probes.
struct DownInterval {
    std::string node;
    Timestamp from = 0;
    Timestamp to = 0; // half-open [from, to)
};

struct HealthSchedule {
    std::vector<DownInterval> downtimes;

    bool is_down(const std::string& node, Timestamp t) const;
};

// Probe semantics: a node scripted down never answers; otherwise it answers
// after its probe_latency property (default 0) seconds. A node whose answer
// does not arrive within the timeout is Suspected.
std::map<std::string, NodeHealth> check_nodes(const std::vector<Node>& nodes,
                                              Seconds timeout, Timestamp now,
                                              const HealthSchedule& schedule);

struct Completion {
    JobId idJob = 0;
    Timestamp at = 0;
    bool walltimeExceeded = false;
};

using NotifyFn = std::function<void(NotificationKind, JobId)>;

struct ExecutorConfig {
    bool healthCheckEnabled = false;
    Seconds probeTimeout = 5;
};

class Executor {
public:
    Executor(Store& store, ExecutorConfig config, NotifyFn notify)
        : store_(store), config_(config), notify_(std::move(notify)) {}
    virtual ~Executor() = default;

    // pre: job.state == toLaunch. On success the job runs on the assignment
    // with startTime = now. A non-Alive assignment node (with health
    // checking on) fails the job to Error and emits a rescheduling
    // notification; returns false.
    virtual bool launch(const Job& job, const Assignment& assignment) = 0;

    // Moves any non-terminal job to Error, voids its pending completion,
    // frees its resources; a terminal job is a no-op with a warning record.
    virtual void cancel(JobId id, const std::string& reason) = 0;

    virtual std::map<std::string, NodeHealth> check_nodes(Seconds timeout) = 0;

    // Applies every recorded completion to the store (Terminated, or Error
    // past the walltime). Returns how many were applied.
    virtual std::size_t reap_completions() = 0;
    virtual bool has_pending_completions() const = 0;

    // Procs currently booked per this executor's view; must mirror the
    // store's assignment rows.
    virtual std::map<std::string, int> busy_procs() const = 0;

protected:
    Store& store_;
    ExecutorConfig config_;
    NotifyFn notify_;
};

class SimExecutor final : public Executor {
public:
    SimExecutor(Store& store, VirtualClock& clock, ExecutorConfig config,
                HealthSchedule schedule, NotifyFn notify);

    bool launch(const Job& job, const Assignment& assignment) override;
    void cancel(JobId id, const std::string& reason) override;
    std::map<std::string, NodeHealth> check_nodes(Seconds timeout) override;
    std::size_t reap_completions() override;
    bool has_pending_completions() const override;
    std::map<std::string, int> busy_procs() const override;

    // Called by the simulation loop when a completion event fires.
    void on_completion_event(const SimEvent& ev);

    const HealthSchedule& health_schedule() const { return schedule_; }

private:
    VirtualClock& clock_;
    HealthSchedule schedule_;
    std::map<JobId, std::uint64_t> completionEvent_;
    std::map<JobId, Assignment> running_;
    std::vector<Completion> pending_;
};

// Local child processes, one per job; a monitor thread reaps exits and
// enforces walltimes, delivering Term notifications into the kernel buffer.
class RealExecutor final : public Executor {
public:
    RealExecutor(Store& store, ExecutorConfig config, Store::NowFn now,
                 NotifyFn notify);
    ~RealExecutor() override;

    bool launch(const Job& job, const Assignment& assignment) override;
    void cancel(JobId id, const std::string& reason) override;
    std::map<std::string, NodeHealth> check_nodes(Seconds timeout) override;
    std::size_t reap_completions() override;
    bool has_pending_completions() const override;
    std::map<std::string, int> busy_procs() const override;

    std::size_t running_count() const;

private:
    struct Child {
        JobId idJob = 0;
        std::int64_t pid = 0;
        Timestamp deadline = 0;
        Assignment assignment;
        bool killedForWalltime = false;
    };

    void monitor_loop();
    Timestamp now() const { return now_(); }

    Store::NowFn now_;
    mutable std::mutex mutex_;
    std::vector<Child> children_;
    std::vector<Completion> pending_;
    std::atomic<bool> stop_{false};
    std::thread monitor_;
};

// Shared store-side effects.

// Walks the job from whatever non-terminal state it is in to Error via
// toError. Returns false when the job was already terminal or unknown.
bool fail_job(Store& store, JobId id, Timestamp now, const std::string& reason,
              bool hadStarted);

// Running -> Terminated (or -> Error when the walltime was exceeded),
// stopTime = at, resources released.
void finish_job(Store& store, const Completion& completion);

} // namespace bsched
