#pragma once

#include "bsched/admission.hpp"
#include "bsched/executor.hpp"
#include "bsched/notifications.hpp"
#include "bsched/scheduler.hpp"
#include "bsched/store.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <thread>
#include <variant>
#include <vector>

// The central module: an automaton consuming the coalescing notification
// buffer, dispatching scheduling/execution/cancellation/monitoring tasks,
// and guaranteeing the periodic execution of every task class so the
// system stays correct even when notifications are lost.

namespace bsched {

struct KernelConfig {
    Seconds schedulingPeriod = 60;
    Seconds monitoringPeriod = 300;
    bool healthCheckEnabled = false;
    Seconds probeTimeout = 5;
    std::vector<Queue> queues; // filled with default + besteffort when empty
    std::vector<AdmissionRule> admissionRules; // shipped defaults when empty
    AdmissionDefaults admissionDefaults;
    VictimPolicy victimPolicy = VictimPolicy::YoungestFirst;
    std::uint64_t stepBudget = 1'000'000; // run_until_quiescent guard
};

class Kernel {
public:
    enum class Mode { Simulation, Real };

    Kernel(Mode mode, KernelConfig config, HealthSchedule schedule = {});
    ~Kernel();

    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    Mode mode() const { return mode_; }
    Timestamp now() const;

    Store& store() { return store_; }
    const Store& store() const { return store_; }
    VirtualClock& clock() { return clock_; }
    Executor& executor() { return *executor_; }
    NotificationBuffer& buffer() { return buffer_; }
    const KernelConfig& config() const { return config_; }

    void add_node(Node node);

    // Admission, insertion and the Scheduling notification of a submission.
    std::variant<JobId, Rejection> submit(const SubmissionRequest& request);

    // Cancellation request (the del path): flags the job and notifies the
    // automaton; the generic cancellation step does the work.
    void request_cancel(JobId id, const std::string& reason = "cancelled by user");

    void notify(NotificationKind kind, JobId payload = 0);

    struct StepOutcome {
        bool ran = false;
        std::string task; // "scheduling", "launch", "cancellation", ...
    };

    // Executes exactly one task: internal follow-up work first, then the
    // earliest due periodic task, then the oldest pending notification.
    StepOutcome step();

    // Simulation driver: alternates event delivery, automaton steps and
    // clock advances until quiescence or the step budget runs out.
    struct RunStats {
        std::uint64_t steps = 0;
        bool quiescent = false;
        std::vector<JobId> nonTerminal;
    };
    RunStats run_until_quiescent();

    bool is_quiescent() const;

    // Workload replay: invoked when a SubmitJob event fires.
    using SubmitHandler = std::function<void(std::size_t recordIndex)>;
    void set_submit_handler(SubmitHandler handler);

    // Real mode: automaton loop on a background thread until Shutdown.
    void start();
    void stop();
    bool running() const { return threadRunning_; }

    // Delivers one simulation event to its consumer.
    void route_event(const SimEvent& ev);

    Timestamp next_periodic_deadline() const;

private:
    void run_scheduling_task();
    void run_monitoring_task();
    void run_chstate_task();
    void run_term_task();
    void run_launch_task();
    void run_cancellation_task();
    void real_loop();
    void bump_deadline(Timestamp& deadline, Seconds period) const;

    Mode mode_;
    KernelConfig config_;
    Store store_;
    VirtualClock clock_;
    NotificationBuffer buffer_;
    HealthSchedule schedule_;
    std::unique_ptr<Executor> executor_;
    SimExecutor* simExecutor_ = nullptr; // non-owning view when simulating

    struct PendingLaunch {
        JobId idJob = 0;
        Assignment assignment;
    };
    std::vector<PendingLaunch> pendingLaunches_;
    // cancellation requests cross threads in real mode (daemon -> automaton)
    mutable std::mutex cancelMutex_;
    std::vector<std::pair<JobId, std::string>> pendingCancellations_;
    std::set<JobId> flagged_; // kill flags already set, not yet executed

    Timestamp nextSchedulingDeadline_ = 0;
    Timestamp nextMonitoringDeadline_ = 0;
    bool inSchedulingTask_ = false;

    SubmitHandler submitHandler_;

    std::atomic<bool> stopRequested_{false};
    std::atomic<bool> threadRunning_{false};
    std::thread thread_;
    std::chrono::steady_clock::time_point epoch_;
};

} // namespace bsched
