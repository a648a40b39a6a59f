// Acceptance suite: runs every release criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exits nonzero when any
// criterion fails.

#include "bsched/bench.hpp"
#include "bsched/config.hpp"
#include "bsched/kernel.hpp"
#include "bsched/metrics.hpp"
#include "bsched/scheduler.hpp"
#include "bsched/workload.hpp"

#include "../oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace bsched;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s: %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    if (!pass)
        ++g_failures;
}

std::vector<Node> make_cluster(int count, int capacity) {
    std::vector<Node> nodes;
    for (int i = 0; i < count; ++i) {
        Node n;
        n.name = "n" + std::to_string(i);
        n.capacity = capacity;
        nodes.push_back(n);
    }
    return nodes;
}

Job make_waiting_job(JobId id, int nbNodes, int weight, Seconds duration,
                     const std::string& queue = "default") {
    Job j;
    j.idJob = id;
    j.user = "u";
    j.command = "c";
    j.queueName = queue;
    j.nbNodes = nbNodes;
    j.weight = weight;
    j.maxTime = duration;
    return j;
}

JobId engine_submit(Kernel& kernel, int nbNodes, Seconds actual, Seconds maxTime,
                    const std::string& queue = "default",
                    std::optional<Timestamp> reservation = std::nullopt) {
    SubmissionRequest req;
    req.command = "work";
    req.user = "u";
    req.nbNodes = nbNodes;
    req.maxTime = maxTime;
    req.actualDuration = actual;
    req.queueName = queue;
    req.reservationStart = reservation;
    auto result = kernel.submit(req);
    if (std::holds_alternative<Rejection>(result))
        return 0;
    return std::get<JobId>(result);
}

// ---- 1. metric fidelity ---------------------------------------------------

void criterion_metric_fidelity() {
    double e1 = efficiency(443340, 34, 15264);
    double e2 = efficiency(443340, 34, 14037);
    double tl = lower_bound_time(443340, 34);
    bool pass = std::fabs(e1 - 0.8543) <= 0.0001 && std::fabs(e2 - 0.9289) <= 0.0001 &&
                std::fabs(tl - 13039.4) <= 0.1;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "E(443340,34,15264)=%.6f E(443340,34,14037)=%.6f T_lower=%.1f", e1,
                  e2, tl);
    report(1, "metric fidelity", pass, detail);
}

// ---- 2. policy ordering on the shipped workload ---------------------------

struct EspRuns {
    BenchOutcome fifo;
    BenchOutcome saf;
};

EspRuns run_esp() {
    auto spec = load_workload(std::string(BSCHED_DATA_DIR) + "/esp230.workload");
    EspRuns runs;
    runs.fifo = bench_run(spec, QueuePolicy::Fifo, default_config());
    runs.saf = bench_run(spec, QueuePolicy::Saf, default_config());
    return runs;
}

void criterion_policy_ordering(const EspRuns& runs) {
    bool quiescent = runs.fifo.quiescent && runs.saf.quiescent;
    bool allDone = runs.fifo.report.terminatedCount == 230 &&
                   runs.saf.report.terminatedCount == 230;
    bool ordered = runs.saf.report.elapsedTime <= runs.fifo.report.elapsedTime;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "FIFO T=%lld E=%.4f, SAF T=%lld E=%.4f, 230+230 terminated=%s",
                  static_cast<long long>(runs.fifo.report.elapsedTime),
                  runs.fifo.report.efficiency,
                  static_cast<long long>(runs.saf.report.elapsedTime),
                  runs.saf.report.efficiency, allDone ? "yes" : "no");
    report(2, "policy ordering (SAF <= FIFO)", quiescent && allDone && ordered, detail);
}

// ---- 3. conservative no-delay --------------------------------------------

void criterion_no_delay() {
    std::mt19937 rng(9001);
    int violations = 0;
    const int kInstances = 500;
    for (int trial = 0; trial < kInstances; ++trial) {
        int nodeCount = 1 + static_cast<int>(rng() % 5);
        int capacity = 1 + static_cast<int>(rng() % 2);
        auto nodes = make_cluster(nodeCount, capacity);
        std::vector<Queue> queues{{"default", 0, QueuePolicy::Fifo, true, false}};

        std::vector<Occupation> occupations;
        if (rng() % 2)
            occupations.push_back({99, nodes[rng() % nodeCount].name,
                                   1 + static_cast<int>(rng() % capacity), 0,
                                   1 + static_cast<Timestamp>(rng() % 8)});

        int jobCount = 1 + static_cast<int>(rng() % 10);
        std::vector<Job> waiting;
        for (int i = 0; i < jobCount; ++i)
            waiting.push_back(make_waiting_job(i + 1,
                                               1 + static_cast<int>(rng() % nodeCount),
                                               1 + static_cast<int>(rng() % capacity),
                                               1 + static_cast<Seconds>(rng() % 10)));
        auto tl1 = build_timeline(0, occupations, nodes);
        auto before = schedule_pass(queues, waiting, tl1, 0);

        auto extended = waiting;
        extended.push_back(make_waiting_job(jobCount + 1,
                                            1 + static_cast<int>(rng() % nodeCount),
                                            1 + static_cast<int>(rng() % capacity),
                                            1 + static_cast<Seconds>(rng() % 10)));
        auto tl2 = build_timeline(0, occupations, nodes);
        auto after = schedule_pass(queues, extended, tl2, 0);

        std::map<JobId, Timestamp> beforeStarts, afterStarts;
        for (const auto& d : before)
            beforeStarts[d.idJob] = d.start;
        for (const auto& d : after)
            afterStarts[d.idJob] = d.start;
        for (const auto& j : waiting)
            if (beforeStarts[j.idJob] != afterStarts[j.idJob])
                ++violations;
        if (!tl1.no_oversubscription() || !tl2.no_oversubscription())
            ++violations;
    }
    char detail[120];
    std::snprintf(detail, sizeof detail, "%d randomized instances, %d violations",
                  kInstances, violations);
    report(3, "conservative no-delay", violations == 0, detail);
}

// ---- 4. oracle equivalence ------------------------------------------------

int check_against_oracle(const std::vector<Queue>& queues,
                         const std::vector<Job>& waiting,
                         const std::vector<Occupation>& occupations,
                         const std::vector<Node>& nodes) {
    auto tl = build_timeline(0, occupations, nodes);
    auto decisions = schedule_pass(queues, waiting, tl, 0);
    std::map<JobId, Timestamp> mine;
    for (const auto& d : decisions)
        if (d.verdict == Verdict::LaunchNow || d.verdict == Verdict::PlannedAt)
            mine[d.idJob] = d.start;

    oracle::GridSim grid(nodes, 300);
    for (const auto& occ : occupations)
        grid.occupy(occ.node, std::max<Timestamp>(occ.start, 0), occ.end, occ.procs);
    std::vector<Job> ordered = waiting;
    std::sort(ordered.begin(), ordered.end(), [&](const Job& a, const Job& b) {
        if (queues[0].policy == QueuePolicy::Saf && a.procs() != b.procs())
            return a.procs() < b.procs();
        return a.idJob < b.idJob;
    });
    int mismatches = 0;
    for (const auto& j : ordered) {
        oracle::Request req{j.nbNodes, j.weight, j.maxTime, j.properties, 0};
        auto truth = grid.earliest_and_commit(req);
        if (!truth.has_value()) {
            if (mine.contains(j.idJob))
                ++mismatches;
            continue;
        }
        if (!mine.contains(j.idJob) || mine[j.idJob] != *truth)
            ++mismatches;
    }
    if (!tl.no_oversubscription())
        ++mismatches;
    return mismatches;
}

void criterion_oracle_equivalence() {
    int mismatches = 0;
    long instances = 0;

    // exhaustive family: 1..2 unit nodes, up to 3 jobs over all size and
    // duration combinations
    for (int nodeCount = 1; nodeCount <= 2; ++nodeCount) {
        auto nodes = make_cluster(nodeCount, 1);
        std::vector<Queue> queues{{"default", 0, QueuePolicy::Fifo, true, false}};
        std::vector<std::pair<int, Seconds>> shapes;
        for (int nb = 1; nb <= nodeCount; ++nb)
            for (Seconds d = 1; d <= 3; ++d)
                shapes.emplace_back(nb, d);
        std::size_t variants = shapes.size();
        for (std::size_t a = 0; a < variants; ++a)
            for (std::size_t b = 0; b < variants; ++b)
                for (std::size_t c = 0; c < variants; ++c) {
                    std::vector<Job> waiting{
                        make_waiting_job(1, shapes[a].first, 1, shapes[a].second),
                        make_waiting_job(2, shapes[b].first, 1, shapes[b].second),
                        make_waiting_job(3, shapes[c].first, 1, shapes[c].second)};
                    mismatches += check_against_oracle(queues, waiting, {}, nodes);
                    ++instances;
                }
    }

    // randomized coverage across the full stated bounds
    std::mt19937 rng(424242);
    for (int trial = 0; trial < 2000; ++trial) {
        int nodeCount = 1 + static_cast<int>(rng() % 4);
        int capacity = 1 + static_cast<int>(rng() % 2);
        auto nodes = make_cluster(nodeCount, capacity);
        bool saf = rng() % 2 == 0;
        std::vector<Queue> queues{
            {"default", 0, saf ? QueuePolicy::Saf : QueuePolicy::Fifo, true, false}};
        int jobCount = 1 + static_cast<int>(rng() % 6);
        std::vector<Job> waiting;
        for (int i = 0; i < jobCount; ++i)
            waiting.push_back(make_waiting_job(i + 1,
                                               1 + static_cast<int>(rng() % nodeCount),
                                               1 + static_cast<int>(rng() % capacity),
                                               1 + static_cast<Seconds>(rng() % 10)));
        std::vector<Occupation> occupations;
        if (rng() % 2)
            occupations.push_back({99, nodes[rng() % nodeCount].name,
                                   1 + static_cast<int>(rng() % capacity), 0,
                                   1 + static_cast<Timestamp>(rng() % 10)});
        mismatches += check_against_oracle(queues, waiting, occupations, nodes);
        ++instances;
    }
    char detail[120];
    std::snprintf(detail, sizeof detail, "%ld instances, %d mismatches", instances,
                  mismatches);
    report(4, "oracle equivalence", mismatches == 0, detail);
}

// ---- 5. no over-subscription ----------------------------------------------

// Reconstructs per-node busy intervals of an engine run from the accounting
// trail ("started on <nodes>") and checks capacity at every endpoint.
int oversubscription_violations(const Store& store, int capacity) {
    struct Busy {
        Timestamp start, stop;
        int procs;
    };
    std::map<std::string, std::vector<Busy>> byNode;
    for (const auto& job : store.query_jobs({})) {
        if (!job.startTime || !job.stopTime)
            continue;
        for (const auto& rec : store.accounting_for(job.idJob)) {
            if (rec.eventKind != "execution" || rec.detail.rfind("started on", 0) != 0)
                continue;
            std::istringstream nodes(rec.detail.substr(10));
            std::string name;
            while (nodes >> name)
                byNode[name].push_back({*job.startTime, *job.stopTime, job.weight});
        }
    }
    int violations = 0;
    for (const auto& [name, list] : byNode) {
        std::set<Timestamp> points;
        for (const auto& b : list) {
            points.insert(b.start);
            points.insert(b.stop);
        }
        for (Timestamp t : points) {
            int used = 0;
            for (const auto& b : list)
                if (b.start <= t && t < b.stop)
                    used += b.procs;
            if (used > capacity)
                ++violations;
        }
    }
    return violations;
}

void criterion_no_oversubscription(const EspRuns& esp) {
    // the two benchmark runs, re-executed with engine access for the audit
    auto spec = load_workload(std::string(BSCHED_DATA_DIR) + "/esp230.workload");
    int violations = 0;
    for (auto policy : {QueuePolicy::Fifo, QueuePolicy::Saf}) {
        EngineConfig config = default_config();
        for (auto& q : config.kernel.queues)
            q.policy = policy;
        Kernel kernel(Kernel::Mode::Simulation, config.kernel);
        for (const auto& n : spec.cluster)
            kernel.add_node(n);
        kernel.set_submit_handler([&](std::size_t index) {
            const auto& r = spec.records.at(index);
            SubmissionRequest req;
            req.command = "work";
            req.user = "esp";
            req.nbNodes = r.nbNodes;
            req.weight = r.weight;
            req.maxTime = r.maxTime;
            req.actualDuration = r.actualDuration;
            req.queueName = r.queueName;
            kernel.submit(req);
        });
        for (std::size_t i = 0; i < spec.records.size(); ++i)
            kernel.clock().schedule(EventKind::SubmitJob, spec.records[i].submitTime, 0,
                                    {}, i);
        auto stats = kernel.run_until_quiescent();
        if (!stats.quiescent)
            ++violations;
        violations += oversubscription_violations(kernel.store(), 2);
    }

    // a burst run
    {
        Kernel kernel(Kernel::Mode::Simulation, default_config().kernel);
        for (const auto& n : make_cluster(5, 2))
            kernel.add_node(n);
        for (int i = 0; i < 200; ++i)
            engine_submit(kernel, 1, 5, 5);
        kernel.run_until_quiescent();
        violations += oversubscription_violations(kernel.store(), 2);
    }

    // the property-run instances re-check their timelines inline (criteria
    // 3 and 4 already add violations when a pass oversubscribes); here we
    // only report the engine-run audits
    bool benchmarksQuiescent = esp.fifo.quiescent && esp.saf.quiescent;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "per-node endpoint audit over both ESP runs and a 200-job burst: "
                  "%d violations",
                  violations);
    report(5, "no over-subscription", violations == 0 && benchmarksQuiescent, detail);
}

// ---- 6. reservation exactness ---------------------------------------------

void criterion_reservation_exactness() {
    std::mt19937 rng(60606);
    int requested = 0, placed = 0, rejected = 0, moved = 0;
    while (requested < 200) {
        KernelConfig config;
        Kernel kernel(Kernel::Mode::Simulation, config);
        int nodeCount = 2 + static_cast<int>(rng() % 3);
        for (const auto& n : make_cluster(nodeCount, 1 + static_cast<int>(rng() % 2)))
            kernel.add_node(n);

        // background load plus a batch of reservations
        int background = static_cast<int>(rng() % 4);
        for (int i = 0; i < background; ++i)
            engine_submit(kernel, 1 + static_cast<int>(rng() % nodeCount),
                          1 + static_cast<Seconds>(rng() % 30),
                          1 + static_cast<Seconds>(rng() % 30));
        std::map<JobId, Timestamp> wanted;
        int batch = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < batch && requested < 200; ++i) {
            Timestamp start = 1 + static_cast<Timestamp>(rng() % 60);
            Seconds duration = 1 + static_cast<Seconds>(rng() % 20);
            JobId id = engine_submit(kernel, 1 + static_cast<int>(rng() % nodeCount),
                                     duration, duration, "default", start);
            if (id == 0)
                continue;
            wanted[id] = start;
            ++requested;
        }
        auto stats = kernel.run_until_quiescent();
        if (!stats.quiescent)
            ++moved;
        for (const auto& [id, start] : wanted) {
            auto job = *kernel.store().get_job(id);
            if (job.state == JobState::Terminated) {
                ++placed;
                if (!job.startTime || *job.startTime != start ||
                    !job.reservedStart || *job.reservedStart != start)
                    ++moved;
            } else if (job.state == JobState::Error &&
                       job.message.find("reservation rejected") != std::string::npos) {
                ++rejected;
            } else {
                ++moved; // anything else is a protocol violation
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%d requests: %d placed exactly, %d rejected, %d violations",
                  requested, placed, rejected, moved);
    report(6, "reservation exactness", moved == 0 && requested == 200, detail);
}

// ---- 7. best-effort preemption ---------------------------------------------

void criterion_preemption() {
    bool pass = true;
    std::string detail;

    // scripted single-victim scenario
    {
        Kernel kernel(Kernel::Mode::Simulation, {});
        for (const auto& n : make_cluster(1, 1))
            kernel.add_node(n);
        JobId be = engine_submit(kernel, 1, 1000, 1000, "besteffort");
        kernel.set_submit_handler(
            [&](std::size_t) { engine_submit(kernel, 1, 50, 50); });
        kernel.clock().schedule(EventKind::SubmitJob, 10, 0, {}, 0);
        auto stats = kernel.run_until_quiescent();
        auto victim = *kernel.store().get_job(be);
        auto regular = *kernel.store().get_job(2);
        bool flagBeforeCancel = false;
        int flagIdx = -1, cancelIdx = -1, idx = 0;
        for (const auto& rec : kernel.store().accounting_for(be)) {
            if (rec.eventKind == "preemption")
                flagIdx = idx;
            if (rec.eventKind == "cancellation")
                cancelIdx = idx;
            ++idx;
        }
        flagBeforeCancel = flagIdx >= 0 && cancelIdx >= 0 && flagIdx < cancelIdx;
        bool ok = stats.quiescent && victim.state == JobState::Error &&
                  victim.stopTime == 10 && flagBeforeCancel &&
                  regular.state == JobState::Terminated && regular.startTime == 10;
        if (!ok)
            pass = false;
        detail += std::string("flag-then-cancel ") + (ok ? "ok" : "BROKEN");
    }

    // youngest-first on two victims
    {
        Kernel kernel(Kernel::Mode::Simulation, {});
        for (const auto& n : make_cluster(2, 1))
            kernel.add_node(n);
        JobId old = engine_submit(kernel, 1, 1000, 1000, "besteffort");
        int phase = 0;
        kernel.set_submit_handler([&](std::size_t) {
            if (phase++ == 0)
                engine_submit(kernel, 1, 1000, 1000, "besteffort");
            else
                engine_submit(kernel, 1, 50, 50);
        });
        kernel.clock().schedule(EventKind::SubmitJob, 5, 0, {}, 0);
        kernel.clock().schedule(EventKind::SubmitJob, 10, 0, {}, 1);
        auto stats = kernel.run_until_quiescent();
        auto oldJob = *kernel.store().get_job(old);
        auto young = *kernel.store().get_job(2);
        auto regular = *kernel.store().get_job(3);
        bool ok = stats.quiescent && young.state == JobState::Error &&
                  young.stopTime == 10 && oldJob.state == JobState::Terminated &&
                  oldJob.stopTime == 1000 && regular.startTime == 10;
        if (!ok)
            pass = false;
        detail += std::string(", youngest-first ") + (ok ? "ok" : "BROKEN");
    }
    report(7, "best-effort preemption", pass, detail);
}

// ---- 8. burst stability -----------------------------------------------------

void criterion_burst() {
    auto sim = bench_burst(1000, 1, 100, default_config());
    bool simOk = sim.quiescent && sim.report.terminatedCount == 1000 &&
                 sim.report.errorCount == 0;

    // real mode: 100 trivial local processes
    EngineConfig config = default_config();
    config.nodes = make_cluster(17, 2);
    Kernel kernel(Kernel::Mode::Real, config.kernel);
    for (const auto& n : config.nodes)
        kernel.add_node(n);
    kernel.start();
    int submitted = 0;
    for (int i = 0; i < 100; ++i) {
        SubmissionRequest req;
        req.command = "/bin/true";
        req.user = "burst";
        req.maxTime = 60;
        auto result = kernel.submit(req);
        if (std::holds_alternative<JobId>(result))
            ++submitted;
    }
    std::size_t done = 0;
    for (int spin = 0; spin < 1200; ++spin) {
        JobFilter f;
        f.state = JobState::Terminated;
        done = kernel.store().query_jobs(f).size();
        if (done == 100)
            break;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    kernel.stop();
    bool realOk = submitted == 100 && done == 100 &&
                  kernel.store().job_count() == 100;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "simulated 1000/1000 terminated=%s; real 100-process burst "
                  "%zu/100 terminated, none lost",
                  simOk ? "yes" : "no", done);
    report(8, "burst stability", simOk && realOk, detail);
}

// ---- 9. state-machine legality fuzz ----------------------------------------

void criterion_state_fuzz() {
    std::mt19937 rng(171717);
    const JobState states[] = {
        JobState::Waiting, JobState::Hold, JobState::ToLaunch,
        JobState::ToError, JobState::ToAckReservation, JobState::Launching,
        JobState::Running, JobState::Terminated, JobState::Error,
    };
    long sequences = 0;
    long illegal = 0;
    for (int run = 0; run < 10000; ++run) {
        Store store;
        Job j;
        j.user = "fuzz";
        j.command = "c";
        j.queueName = "default";
        j.maxTime = 1;
        JobId id = store.insert_job(j);
        int ops = 3 + static_cast<int>(rng() % 12);
        for (int i = 0; i < ops; ++i)
            store.cas_update_state(id, states[rng() % 9], states[rng() % 9]);
        ++sequences;
        // replay the committed history; every hop must be a legal edge
        JobState current = JobState::Waiting;
        for (const auto& rec : store.accounting_for(id)) {
            if (rec.eventKind != "state")
                continue;
            auto arrow = rec.detail.find("->");
            auto from = job_state_from_string(rec.detail.substr(0, arrow));
            auto to = job_state_from_string(rec.detail.substr(arrow + 2));
            if (!from || !to || *from != current || !valid_transition(*from, *to)) {
                ++illegal;
                break;
            }
            current = *to;
        }
        if (store.get_job(id)->state != current)
            ++illegal;
    }
    char detail[120];
    std::snprintf(detail, sizeof detail,
                  "%ld random sequences, %ld illegal committed transitions", sequences,
                  illegal);
    report(9, "state-machine legality fuzz", illegal == 0, detail);
}

// ---- 10. notification-loss robustness ---------------------------------------

void criterion_notification_loss() {
    auto scripted = [](std::optional<NotificationKind> drop) {
        KernelConfig config;
        config.schedulingPeriod = 50;
        config.monitoringPeriod = 45;
        Kernel kernel(Kernel::Mode::Simulation, config);
        for (const auto& n : make_cluster(1, 1))
            kernel.add_node(n);
        if (drop)
            kernel.buffer().drop_next(*drop);
        engine_submit(kernel, 1, 5, 10);
        engine_submit(kernel, 1, 3, 10);
        engine_submit(kernel, 1, 100, 200);
        kernel.set_submit_handler([&](std::size_t index) {
            if (index == 0)
                engine_submit(kernel, 1, 2, 10);
            else
                kernel.request_cancel(3, "scripted cancel");
        });
        kernel.clock().schedule(EventKind::SubmitJob, 4, 0, {}, 0);
        kernel.clock().schedule(EventKind::SubmitJob, 6, 0, {}, 1);
        auto stats = kernel.run_until_quiescent();
        std::map<JobId, JobState> terminal;
        for (const auto& j : kernel.store().query_jobs({}))
            terminal[j.idJob] = j.state;
        return std::make_pair(stats.quiescent, terminal);
    };

    auto [baselineOk, baseline] = scripted(std::nullopt);
    bool pass = baselineOk;
    std::string detail = "kinds preserved:";
    for (auto kind : {NotificationKind::Scheduling, NotificationKind::Term,
                      NotificationKind::ChState, NotificationKind::Monitoring}) {
        auto [ok, dropped] = scripted(kind);
        bool same = ok && dropped == baseline;
        if (!same)
            pass = false;
        detail += std::string(" ") + to_string(kind) + (same ? "+" : "!");
    }
    report(10, "notification-loss robustness", pass, detail);
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_metric_fidelity();
    auto esp = run_esp();
    criterion_policy_ordering(esp);
    criterion_no_delay();
    criterion_oracle_equivalence();
    criterion_no_oversubscription(esp);
    criterion_reservation_exactness();
    criterion_preemption();
    criterion_burst();
    criterion_state_fuzz();
    criterion_notification_loss();
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
