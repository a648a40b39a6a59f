#pragma once

#include "bsched/timeline.hpp"
#include "bsched/types.hpp"

#include <vector>

// The meta-scheduler: fixes reservations, then schedules each queue in
// decreasing priority with its own policy, committing every waiting job's
// slot into the timeline (conservative backfilling). It reads a store
// snapshot and emits decisions; it never mutates the store.

namespace bsched {

enum class Verdict { LaunchNow, PlannedAt, Reject, FlagForCancellation };

const char* to_string(Verdict v);

struct Decision {
    JobId idJob = 0;
    Verdict verdict = Verdict::Reject;
    Timestamp start = 0; // LaunchNow implies start == now
    Assignment assignment;
    std::string message;
};

enum class VictimPolicy {
    YoungestFirst, // cancel the most recently started best-effort jobs
    FewestJobs,    // minimize the number of cancelled jobs
};

// Policy order within one queue: FIFO by ascending id, SAF by ascending
// nbNodes*weight with id as tie-break.
std::vector<Job> order_jobs(std::vector<Job> jobs, QueuePolicy policy);

// Exact-slot semantics: the reservation is placed at desiredStart or
// rejected; it never slides. On success the slot is committed into the
// timeline.
Decision place_reservation(GanttTimeline& timeline, const Job& job,
                           Timestamp desiredStart);

// Smallest victim set, by policy preference, of running best-effort jobs
// whose removal makes the request feasible at exactly request.notBefore.
// nullopt when even removing all of them is not enough.
std::optional<std::vector<JobId>> plan_preemption(
    const GanttTimeline& timeline, const SlotRequest& request,
    const std::vector<Job>& runningBestEffort,
    VictimPolicy policy = VictimPolicy::YoungestFirst);

// A reservation whose time has come, with its pinned node set.
struct DueReservation {
    Job job;
    Assignment assignment;
};

struct ScheduleContext {
    std::vector<DueReservation> dueReservations;
    std::vector<Job> runningBestEffort; // unflagged preemption candidates
    VictimPolicy victimPolicy = VictimPolicy::YoungestFirst;
    bool enablePreemption = true;
};

// One full pass. waitingJobs are the Waiting, non-reservation jobs of all
// queues; the timeline already carries running jobs and scheduled
// reservations. Jobs whose planned start equals now get LaunchNow, others
// PlannedAt; a job whose demand no node set can ever satisfy gets Reject.
// When a regular job could start now only by evicting best-effort work,
// the pass emits FlagForCancellation for each victim and keeps the job's
// conservative plan (the job is re-planned after the cancellation).
std::vector<Decision> schedule_pass(const std::vector<Queue>& queues,
                                    const std::vector<Job>& waitingJobs,
                                    GanttTimeline& timeline, Timestamp now,
                                    const ScheduleContext& ctx = {});

} // namespace bsched
