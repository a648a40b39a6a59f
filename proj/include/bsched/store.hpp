#pragma once

#include "bsched/types.hpp"

#include <functional>
#include <mutex>
#include <string>
#include <vector>

// The store is the only communication medium between modules: relational
// style tables for jobs, nodes, assignments and reservations, plus an
// append-only accounting log. Every public operation takes the table lock,
// so any mix of concurrent calls is linearizable.

namespace bsched {

enum class CasResult { Updated, Conflict, UnknownJob, IllegalTransition };

const char* to_string(CasResult r);

struct AssignmentRow {
    JobId idJob = 0;
    std::string node;
    int procs = 0;
};

// Nodes held by a Scheduled reservation, fixed until the job launches.
struct ReservationRow {
    JobId idJob = 0;
    Timestamp start = 0;
    Assignment nodes;
};

class Store {
public:
    using NowFn = std::function<Timestamp()>;

    // now_fn stamps accounting records; defaults to a constant 0 clock.
    explicit Store(NowFn now_fn = {});

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    Store(Store&& other) noexcept;
    Store& operator=(Store&&) = delete;

    void set_now_fn(NowFn now_fn);

    // Assigns the next id from a monotonically increasing counter (first
    // id is 1, never reused) and appends an accounting record.
    // The job must arrive in state Waiting.
    JobId insert_job(Job job);

    // Atomic compare-and-set on the job state. The (expected, next) pair is
    // validated against the state machine before storage is touched.
    CasResult cas_update_state(JobId id, JobState expected, JobState next);

    std::vector<Job> query_jobs(const JobFilter& filter = {}) const;
    std::optional<Job> get_job(JobId id) const;
    std::size_t job_count() const;

    // Busy intervals from now on: one record per assignment of a Launching
    // or Running job (end = startTime + maxTime), plus one per node of each
    // Scheduled reservation that has not launched yet.
    std::vector<Occupation> snapshot_occupations(Timestamp now) const;

    // Returns false when the job id is unknown.
    bool record_accounting(JobId id, const std::string& eventKind,
                           const std::string& detail);
    std::vector<AccountingRecord> accounting() const;
    std::vector<AccountingRecord> accounting_for(JobId id) const;

    // Job field updates used by the kernel and the executor. All return
    // false on an unknown id.
    bool set_start_time(JobId id, Timestamp t);
    bool set_stop_time(JobId id, Timestamp t);
    bool set_message(JobId id, const std::string& message);
    bool set_bpid(JobId id, std::optional<std::int64_t> bpid);

    // Nodes.
    void put_node(Node node); // insert or replace by name
    std::vector<Node> nodes() const;
    std::optional<Node> get_node(const std::string& name) const;
    bool set_node_health(const std::string& name, NodeHealth health);
    int total_processors() const;

    // Assignments; rows may exist only while the job is in
    // {toLaunch, Launching, Running}.
    bool add_assignments(JobId id, const Assignment& nodes);
    void clear_assignments(JobId id);
    std::vector<AssignmentRow> assignments() const;
    Assignment assignments_for(JobId id) const;

    // Reservations: marks the job Scheduled and pins its nodes and start.
    bool commit_reservation(JobId id, Timestamp start, Assignment nodes);
    void clear_reservation(JobId id);
    std::optional<ReservationRow> reservation_for(JobId id) const;

    // Persistence snapshot. save/load round-trip is the identity; the
    // on-disk layout is described in the README. load throws
    // std::runtime_error on a malformed file.
    void save(const std::string& path) const;
    static Store load(const std::string& path, NowFn now_fn = {});

    // Reopen rule: jobs found in {toLaunch, Launching, Running} are moved
    // to toError (then Error) since their execution context is gone.
    // Returns the ids that were failed over.
    std::vector<JobId> recover_interrupted();

    // Replaces this store's tables with another store's (snapshot reopen);
    // keeps the current now_fn.
    void adopt(Store&& other);

private:
    Timestamp now_locked() const;
    Job* find_locked(JobId id);
    const Job* find_locked(JobId id) const;
    void append_accounting_locked(JobId id, const std::string& kind,
                                  const std::string& detail);

    mutable std::mutex mutex_;
    NowFn now_fn_;
    JobId next_id_ = 1;
    std::vector<Job> jobs_; // ordered by idJob
    std::vector<Node> nodes_;
    std::vector<AssignmentRow> assignments_;
    std::vector<ReservationRow> reservations_;
    std::vector<AccountingRecord> log_;
};

} // namespace bsched
