#include "bsched/scheduler.hpp"

#include <algorithm>

namespace bsched {

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::LaunchNow: return "LaunchNow";
    case Verdict::PlannedAt: return "PlannedAt";
    case Verdict::Reject: return "Reject";
    case Verdict::FlagForCancellation: return "FlagForCancellation";
    }
    return "?";
}

std::vector<Job> order_jobs(std::vector<Job> jobs, QueuePolicy policy) {
    if (policy == QueuePolicy::Fifo) {
        std::sort(jobs.begin(), jobs.end(),
                  [](const Job& a, const Job& b) { return a.idJob < b.idJob; });
    } else {
        std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
            if (a.procs() != b.procs())
                return a.procs() < b.procs();
            return a.idJob < b.idJob;
        });
    }
    return jobs;
}

Decision place_reservation(GanttTimeline& timeline, const Job& job,
                           Timestamp desiredStart) {
    Decision d;
    d.idJob = job.idJob;
    if (desiredStart < timeline.now()) {
        d.verdict = Verdict::Reject;
        d.message = "reservation start " + std::to_string(desiredStart) +
                    " is in the past";
        return d;
    }
    SlotRequest req{job.nbNodes, job.weight, job.maxTime, job.properties, desiredStart};
    auto eligible = timeline.eligible_nodes(req);
    Timestamp end = desiredStart + job.maxTime;
    Assignment chosen;
    for (const auto* track : eligible) {
        if (timeline.window_free(*track, desiredStart, end, job.weight)) {
            chosen.push_back({track->meta.name, job.weight});
            if (static_cast<int>(chosen.size()) == job.nbNodes)
                break;
        }
    }
    if (static_cast<int>(chosen.size()) < job.nbNodes) {
        d.verdict = Verdict::Reject;
        d.message = "requested slot at " + std::to_string(desiredStart) +
                    " is not available";
        return d;
    }
    timeline.commit(job.idJob, chosen, desiredStart, end);
    d.verdict = Verdict::PlannedAt;
    d.start = desiredStart;
    d.assignment = std::move(chosen);
    return d;
}

namespace {

bool feasible_now_without(const GanttTimeline& timeline, const SlotRequest& request,
                          const std::vector<JobId>& removed) {
    GanttTimeline probe = timeline;
    for (JobId id : removed)
        probe.remove_owner(id);
    auto placement = find_earliest_slot(probe, request);
    return placement && placement->start == request.notBefore;
}

} // namespace

std::optional<std::vector<JobId>> plan_preemption(
    const GanttTimeline& timeline, const SlotRequest& request,
    const std::vector<Job>& runningBestEffort, VictimPolicy policy) {
    if (runningBestEffort.empty())
        return std::nullopt;

    // Youngest first: most recent startTime, then highest id.
    std::vector<Job> ordered = runningBestEffort;
    std::sort(ordered.begin(), ordered.end(), [](const Job& a, const Job& b) {
        Timestamp sa = a.startTime.value_or(0), sb = b.startTime.value_or(0);
        if (sa != sb)
            return sa > sb;
        return a.idJob > b.idJob;
    });

    std::vector<JobId> all;
    for (const auto& j : ordered)
        all.push_back(j.idJob);
    if (!feasible_now_without(timeline, request, all))
        return std::nullopt;

    if (policy == VictimPolicy::YoungestFirst) {
        std::vector<JobId> victims;
        for (const auto& j : ordered) {
            victims.push_back(j.idJob);
            if (feasible_now_without(timeline, request, victims))
                return victims;
        }
        return all; // unreachable: the full set is feasible
    }

    // FewestJobs: exact minimal count by increasing subset size, preferring
    // younger victims among equal-size sets. Exhaustive only while the
    // candidate pool is small; beyond that the youngest-first prefix wins.
    const std::size_t n = ordered.size();
    if (n <= 12) {
        for (std::size_t size = 1; size <= n; ++size) {
            std::vector<std::size_t> idx(size);
            for (std::size_t i = 0; i < size; ++i)
                idx[i] = i;
            while (true) {
                std::vector<JobId> victims;
                for (std::size_t i : idx)
                    victims.push_back(ordered[i].idJob);
                if (feasible_now_without(timeline, request, victims))
                    return victims;
                // next combination
                std::size_t k = size;
                while (k > 0 && idx[k - 1] == n - size + k - 1)
                    --k;
                if (k == 0)
                    break;
                ++idx[k - 1];
                for (std::size_t i = k; i < size; ++i)
                    idx[i] = idx[i - 1] + 1;
            }
        }
    }
    std::vector<JobId> victims;
    for (const auto& j : ordered) {
        victims.push_back(j.idJob);
        if (feasible_now_without(timeline, request, victims))
            return victims;
    }
    return all;
}

namespace {

// Nodes that could ever host the request, health aside: property match and
// capacity >= weight. Fewer than nbNodes of them means the job can never
// run on this cluster.
int permanently_eligible(const GanttTimeline& timeline, const Job& job) {
    int count = 0;
    for (const auto& track : timeline.tracks()) {
        if (track.meta.capacity < job.weight)
            continue;
        if (!eval_property(job.properties, track.meta))
            continue;
        ++count;
    }
    return count;
}

} // namespace

std::vector<Decision> schedule_pass(const std::vector<Queue>& queues,
                                    const std::vector<Job>& waitingJobs,
                                    GanttTimeline& timeline, Timestamp now,
                                    const ScheduleContext& ctx) {
    std::vector<Decision> decisions;

    // Reservations whose start has come launch on their pinned nodes; their
    // occupation is already part of the timeline.
    std::vector<DueReservation> due = ctx.dueReservations;
    std::sort(due.begin(), due.end(), [](const DueReservation& a, const DueReservation& b) {
        return a.job.idJob < b.job.idJob;
    });
    for (auto& r : due) {
        Decision d;
        d.idJob = r.job.idJob;
        d.verdict = Verdict::LaunchNow;
        d.start = now;
        d.assignment = r.assignment;
        decisions.push_back(std::move(d));
    }

    std::vector<Queue> ordered = queues;
    std::sort(ordered.begin(), ordered.end(), [](const Queue& a, const Queue& b) {
        if (a.priority != b.priority)
            return a.priority > b.priority;
        return a.name < b.name;
    });

    std::vector<Job> preemptionPool = ctx.runningBestEffort;

    for (const auto& queue : ordered) {
        if (!queue.active)
            continue;
        std::vector<Job> jobs;
        for (const auto& j : waitingJobs)
            if (j.queueName == queue.name && j.state == JobState::Waiting &&
                j.reservation == ReservationStatus::None)
                jobs.push_back(j);
        for (const auto& job : order_jobs(std::move(jobs), queue.policy)) {
            if (permanently_eligible(timeline, job) < job.nbNodes) {
                Decision d;
                d.idJob = job.idJob;
                d.verdict = Verdict::Reject;
                d.message = "no node set can satisfy " + std::to_string(job.nbNodes) +
                            " nodes with " + std::to_string(job.weight) +
                            " procs each" +
                            (job.properties.empty()
                                 ? std::string{}
                                 : " matching " + job.properties.to_string());
                decisions.push_back(std::move(d));
                continue;
            }
            SlotRequest req{job.nbNodes, job.weight, job.maxTime, job.properties, now};
            auto placement = find_earliest_slot(timeline, req);
            if (!placement)
                continue; // no Alive node set right now; retried on recovery

            if (placement->start > now && ctx.enablePreemption && !job.bestEffort &&
                !preemptionPool.empty()) {
                auto victims = plan_preemption(timeline, req, preemptionPool,
                                               ctx.victimPolicy);
                if (victims) {
                    for (JobId victim : *victims) {
                        Decision d;
                        d.idJob = victim;
                        d.verdict = Verdict::FlagForCancellation;
                        d.start = now;
                        d.message = "resources required by job " +
                                    std::to_string(job.idJob);
                        decisions.push_back(std::move(d));
                        std::erase_if(preemptionPool, [victim](const Job& j) {
                            return j.idJob == victim;
                        });
                    }
                }
            }

            // Conservative backfilling: the job's slot is booked even when
            // it lies in the future, so later jobs can only fill holes.
            timeline.commit(job.idJob, placement->assignment, placement->start,
                            placement->start + job.maxTime);
            Decision d;
            d.idJob = job.idJob;
            d.verdict = placement->start == now ? Verdict::LaunchNow : Verdict::PlannedAt;
            d.start = placement->start;
            d.assignment = std::move(placement->assignment);
            decisions.push_back(std::move(d));
        }
    }
    return decisions;
}

} // namespace bsched
