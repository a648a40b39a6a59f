#include "bsched/kernel.hpp"

#include <algorithm>
#include <stdexcept>

namespace bsched {

namespace {

JobFilter filter_state(JobState state) {
    JobFilter f;
    f.state = state;
    return f;
}

JobFilter filter_best_effort() {
    JobFilter f;
    f.bestEffort = true;
    return f;
}

std::vector<Queue> ensure_queues(std::vector<Queue> queues) {
    if (queues.empty()) {
        queues.push_back({"default", 0, QueuePolicy::Fifo, true, false});
        queues.push_back({"besteffort", -10, QueuePolicy::Fifo, true, true});
    }
    return queues;
}

} // namespace

Kernel::Kernel(Mode mode, KernelConfig config, HealthSchedule schedule)
    : mode_(mode), config_(std::move(config)), schedule_(std::move(schedule)),
      epoch_(std::chrono::steady_clock::now()) {
    if (config_.schedulingPeriod < 1 || config_.monitoringPeriod < 1)
        throw std::invalid_argument("kernel periods must be >= 1 second");
    if (config_.probeTimeout < 1)
        throw std::invalid_argument("probe timeout must be >= 1 second");
    config_.queues = ensure_queues(std::move(config_.queues));
    if (config_.admissionRules.empty())
        config_.admissionRules = default_admission_rules(config_.admissionDefaults);
    store_.set_now_fn([this] { return now(); });

    ExecutorConfig execConfig{config_.healthCheckEnabled, config_.probeTimeout};
    NotifyFn notify = [this](NotificationKind kind, JobId id) { buffer_.notify(kind, id); };
    if (mode_ == Mode::Simulation) {
        auto sim = std::make_unique<SimExecutor>(store_, clock_, execConfig, schedule_,
                                                 notify);
        simExecutor_ = sim.get();
        executor_ = std::move(sim);
    } else {
        executor_ = std::make_unique<RealExecutor>(store_, execConfig,
                                                   [this] { return now(); }, notify);
    }
    nextSchedulingDeadline_ = config_.schedulingPeriod;
    nextMonitoringDeadline_ = config_.monitoringPeriod;

    // Scripted downtimes prompt a probe at their boundaries.
    if (mode_ == Mode::Simulation) {
        for (const auto& d : schedule_.downtimes) {
            if (d.from >= clock_.now())
                clock_.schedule(EventKind::NodeSuspected, d.from, 0, d.node);
            if (d.to >= clock_.now())
                clock_.schedule(EventKind::NodeRecovered, d.to, 0, d.node);
        }
    }
}

Kernel::~Kernel() {
    stop();
}

Timestamp Kernel::now() const {
    if (mode_ == Mode::Simulation)
        return clock_.now();
    auto elapsed = std::chrono::steady_clock::now() - epoch_;
    return std::chrono::duration_cast<std::chrono::seconds>(elapsed).count();
}

void Kernel::add_node(Node node) {
    store_.put_node(std::move(node));
}

std::variant<JobId, Rejection> Kernel::submit(const SubmissionRequest& request) {
    SubmissionRequest req = request;
    bool degraded = false;
    if (mode_ == Mode::Simulation && req.jobType && *req.jobType == JobType::Interactive) {
        req.jobType = JobType::Passive;
        degraded = true;
    }
    auto result = admit(req, config_.admissionRules, store_.nodes(), config_.queues,
                        now());
    if (std::holds_alternative<Rejection>(result))
        return std::get<Rejection>(result);
    JobId id = store_.insert_job(std::get<Job>(std::move(result)));
    if (degraded)
        store_.record_accounting(id, "note",
                                 "interactive job degraded to passive in simulation");
    notify(NotificationKind::Scheduling);
    return id;
}

void Kernel::request_cancel(JobId id, const std::string& reason) {
    {
        std::lock_guard lock(cancelMutex_);
        pendingCancellations_.emplace_back(id, reason);
    }
    notify(NotificationKind::ChState);
}

void Kernel::notify(NotificationKind kind, JobId payload) {
    buffer_.notify(kind, payload);
}

void Kernel::bump_deadline(Timestamp& deadline, Seconds period) const {
    // Periodic tasks fire at exact period multiples on the virtual clock.
    Timestamp t = now();
    deadline = (t / period + 1) * period;
}

Timestamp Kernel::next_periodic_deadline() const {
    return std::min(nextSchedulingDeadline_, nextMonitoringDeadline_);
}

Kernel::StepOutcome Kernel::step() {
    // Follow-up work produced by the last task runs first: cancellations
    // (the generic cancellation module), then launches.
    bool cancellationsPending;
    {
        std::lock_guard lock(cancelMutex_);
        cancellationsPending = !pendingCancellations_.empty();
    }
    if (cancellationsPending) {
        run_cancellation_task();
        return {true, "cancellation"};
    }
    if (!pendingLaunches_.empty()) {
        run_launch_task();
        return {true, "launch"};
    }

    Timestamp t = now();
    if (nextSchedulingDeadline_ <= t || nextMonitoringDeadline_ <= t) {
        if (nextSchedulingDeadline_ <= nextMonitoringDeadline_) {
            bump_deadline(nextSchedulingDeadline_, config_.schedulingPeriod);
            run_scheduling_task();
            return {true, "scheduling"};
        }
        bump_deadline(nextMonitoringDeadline_, config_.monitoringPeriod);
        run_monitoring_task();
        return {true, "monitoring"};
    }

    auto notification = buffer_.pop();
    if (!notification)
        return {false, {}};
    switch (notification->kind) {
    case NotificationKind::Scheduling:
        run_scheduling_task();
        return {true, "scheduling"};
    case NotificationKind::Term:
        run_term_task();
        return {true, "term"};
    case NotificationKind::ChState:
        run_chstate_task();
        return {true, "chstate"};
    case NotificationKind::Monitoring:
        run_monitoring_task();
        return {true, "monitoring"};
    case NotificationKind::Shutdown:
        stopRequested_ = true;
        return {true, "shutdown"};
    }
    return {false, {}};
}

void Kernel::run_scheduling_task() {
    if (inSchedulingTask_)
        throw std::logic_error("scheduling task re-entered");
    inSchedulingTask_ = true;

    // Completions recorded since the last task are applied first, so the
    // pass plans against fresh occupations even when Term was lost.
    executor_->reap_completions();

    Timestamp t = now();
    auto occupations = store_.snapshot_occupations(t);
    auto nodes = store_.nodes();
    GanttTimeline timeline =
        build_timeline(t, occupations, nodes, config_.healthCheckEnabled);

    // Reservation negotiation: each toSchedule request is placed exactly at
    // its slot or rejected; acceptance runs the toAckReservation handshake
    // (acknowledged automatically in batch mode).
    for (const auto& job : store_.query_jobs(filter_state(JobState::Waiting))) {
        if (job.reservation != ReservationStatus::ToSchedule || !job.reservedStart)
            continue;
        Decision d = place_reservation(timeline, job, *job.reservedStart);
        if (d.verdict == Verdict::PlannedAt) {
            if (store_.cas_update_state(job.idJob, JobState::Waiting,
                                        JobState::ToAckReservation) != CasResult::Updated)
                continue;
            store_.commit_reservation(job.idJob, d.start, d.assignment);
            store_.cas_update_state(job.idJob, JobState::ToAckReservation,
                                    JobState::Waiting);
            store_.set_message(job.idJob,
                               "reservation scheduled at " + std::to_string(d.start));
            if (mode_ == Mode::Simulation && d.start > t)
                clock_.schedule(EventKind::ReservationDue, d.start, job.idJob);
        } else {
            executor_->cancel(job.idJob, "reservation rejected: " + d.message);
        }
    }

    ScheduleContext ctx;
    ctx.victimPolicy = config_.victimPolicy;
    for (const auto& job : store_.query_jobs(filter_state(JobState::Waiting))) {
        if (job.reservation == ReservationStatus::Scheduled && job.reservedStart &&
            *job.reservedStart <= t)
            ctx.dueReservations.push_back(
                {job, store_.reservation_for(job.idJob)
                          ? store_.reservation_for(job.idJob)->nodes
                          : Assignment{}});
    }
    for (const auto& job : store_.query_jobs(filter_best_effort())) {
        if ((job.state == JobState::Running || job.state == JobState::Launching) &&
            !flagged_.contains(job.idJob))
            ctx.runningBestEffort.push_back(job);
    }

    std::vector<Job> waiting;
    for (const auto& job : store_.query_jobs(filter_state(JobState::Waiting)))
        if (job.reservation == ReservationStatus::None)
            waiting.push_back(job);

    auto decisions = schedule_pass(config_.queues, waiting, timeline, t, ctx);

    for (auto& d : decisions) {
        switch (d.verdict) {
        case Verdict::LaunchNow:
            if (store_.cas_update_state(d.idJob, JobState::Waiting, JobState::ToLaunch) ==
                CasResult::Updated)
                pendingLaunches_.push_back({d.idJob, std::move(d.assignment)});
            break;
        case Verdict::PlannedAt:
            store_.set_message(d.idJob, "planned start at " + std::to_string(d.start));
            break;
        case Verdict::Reject:
            executor_->cancel(d.idJob, "rejected: " + d.message);
            break;
        case Verdict::FlagForCancellation:
            // Step one of the best-effort protocol: the flag. Step two, the
            // cancellation task, runs next.
            if (flagged_.insert(d.idJob).second) {
                store_.record_accounting(d.idJob, "preemption",
                                         "flagged for cancellation: " + d.message);
                std::lock_guard lock(cancelMutex_);
                pendingCancellations_.emplace_back(d.idJob, "best effort job preempted: " +
                                                               d.message);
            }
            break;
        }
    }
    inSchedulingTask_ = false;
}

void Kernel::run_launch_task() {
    auto batch = std::move(pendingLaunches_);
    pendingLaunches_.clear();
    for (const auto& p : batch) {
        auto job = store_.get_job(p.idJob);
        if (!job || job->state != JobState::ToLaunch)
            continue;
        executor_->launch(*job, p.assignment);
    }
}

void Kernel::run_cancellation_task() {
    std::vector<std::pair<JobId, std::string>> batch;
    {
        std::lock_guard lock(cancelMutex_);
        batch.swap(pendingCancellations_);
    }
    bool any = false;
    for (const auto& [id, reason] : batch) {
        executor_->cancel(id, reason);
        flagged_.erase(id);
        any = true;
    }
    if (any)
        notify(NotificationKind::Scheduling); // back to the scheduler
}

void Kernel::run_term_task() {
    if (executor_->reap_completions() > 0)
        notify(NotificationKind::Scheduling);
}

void Kernel::run_chstate_task() {
    // Consistency sweep: apply completions and finalize stray toError jobs.
    bool changed = executor_->reap_completions() > 0;
    for (const auto& job : store_.query_jobs(filter_state(JobState::ToError))) {
        store_.cas_update_state(job.idJob, JobState::ToError, JobState::Error);
        changed = true;
    }
    if (changed)
        notify(NotificationKind::Scheduling);
}

void Kernel::run_monitoring_task() {
    executor_->reap_completions();
    if (!config_.healthCheckEnabled)
        return;
    auto health = executor_->check_nodes(config_.probeTimeout);
    bool changed = false;
    for (const auto& [name, state] : health) {
        auto node = store_.get_node(name);
        if (!node || node->health == NodeHealth::Dead)
            continue; // administrative Dead is not overridden by probes
        if (node->health != state) {
            store_.set_node_health(name, state);
            changed = true;
        }
    }
    if (changed)
        notify(NotificationKind::Scheduling);
}

void Kernel::route_event(const SimEvent& ev) {
    switch (ev.kind) {
    case EventKind::JobCompleted:
    case EventKind::JobWalltimeExceeded:
        if (simExecutor_)
            simExecutor_->on_completion_event(ev);
        break;
    case EventKind::NodeSuspected:
    case EventKind::NodeRecovered:
        notify(NotificationKind::Monitoring);
        break;
    case EventKind::ReservationDue:
        notify(NotificationKind::Scheduling);
        break;
    case EventKind::SubmitJob:
        if (submitHandler_)
            submitHandler_(ev.recordIndex);
        break;
    case EventKind::JobStarted:
        break;
    }
}

bool Kernel::is_quiescent() const {
    if (mode_ == Mode::Simulation && clock_.has_pending())
        return false;
    if (!buffer_.empty())
        return false;
    {
        std::lock_guard lock(cancelMutex_);
        if (!pendingCancellations_.empty())
            return false;
    }
    if (!pendingLaunches_.empty())
        return false;
    if (executor_->has_pending_completions())
        return false;
    for (const auto& job : store_.query_jobs({}))
        if (!is_terminal(job.state))
            return false;
    return true;
}

void Kernel::set_submit_handler(SubmitHandler handler) {
    submitHandler_ = std::move(handler);
}

Kernel::RunStats Kernel::run_until_quiescent() {
    if (mode_ != Mode::Simulation)
        throw std::logic_error("run_until_quiescent requires simulation mode");
    RunStats stats;
    while (stats.steps < config_.stepBudget) {
        // Deliver everything due at the current instant before stepping, so
        // same-instant completions coalesce into one scheduling pass.
        while (clock_.has_pending() && *clock_.peek_next_time() <= clock_.now())
            route_event(*clock_.advance());

        while (stats.steps < config_.stepBudget) {
            auto outcome = step();
            if (!outcome.ran)
                break;
            ++stats.steps;
        }

        if (clock_.has_pending() && *clock_.peek_next_time() <= clock_.now())
            continue; // a task scheduled new work for this same instant

        if (is_quiescent()) {
            stats.quiescent = true;
            return stats;
        }

        auto nextEvent = clock_.peek_next_time();
        Timestamp target = next_periodic_deadline();
        if (nextEvent)
            target = std::min(target, *nextEvent);
        if (target <= clock_.now())
            continue;
        clock_.advance_to(target);
    }
    for (const auto& job : store_.query_jobs({}))
        if (!is_terminal(job.state))
            stats.nonTerminal.push_back(job.idJob);
    return stats;
}

void Kernel::start() {
    if (mode_ != Mode::Real)
        throw std::logic_error("start() requires real mode");
    if (threadRunning_)
        return;
    stopRequested_ = false;
    threadRunning_ = true;
    notify(NotificationKind::Scheduling); // pick up whatever the store holds
    thread_ = std::thread([this] { real_loop(); });
}

void Kernel::real_loop() {
    while (!stopRequested_) {
        auto outcome = step();
        if (outcome.ran)
            continue;
        // Idle: wait for a notification, a periodic deadline or a due
        // reservation, whichever comes first.
        Timestamp t = now();
        Timestamp wake = next_periodic_deadline();
        for (const auto& job : store_.query_jobs(filter_state(JobState::Waiting)))
            if (job.reservation == ReservationStatus::Scheduled && job.reservedStart)
                wake = std::min(wake, *job.reservedStart);
        auto delay = std::chrono::milliseconds(100);
        if (wake > t)
            delay = std::min(std::chrono::milliseconds((wake - t) * 1000),
                             std::chrono::milliseconds(1000));
        buffer_.wait(delay);
    }
    threadRunning_ = false;
}

void Kernel::stop() {
    if (thread_.joinable()) {
        stopRequested_ = true;
        notify(NotificationKind::Shutdown);
        thread_.join();
    }
    threadRunning_ = false;
}

} // namespace bsched
