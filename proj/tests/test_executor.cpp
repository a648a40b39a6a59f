#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsched/executor.hpp"

#include <chrono>
#include <random>
#include <thread>

using namespace bsched;

namespace {

Job make_job(Store& store, Seconds actual, Seconds maxTime, int nbNodes = 1) {
    Job j;
    j.user = "u";
    j.command = "c";
    j.queueName = "default";
    j.nbNodes = nbNodes;
    j.weight = 1;
    j.maxTime = maxTime;
    j.actualDuration = actual;
    JobId id = store.insert_job(j);
    return *store.get_job(id);
}

void put_node(Store& store, const std::string& name, int capacity = 2,
              NodeHealth health = NodeHealth::Alive) {
    Node n;
    n.name = name;
    n.capacity = capacity;
    n.health = health;
    store.put_node(n);
}

struct SimRig {
    Store store;
    VirtualClock clock;
    std::vector<std::pair<NotificationKind, JobId>> notifications;
    SimExecutor exec;

    explicit SimRig(ExecutorConfig config = {}, HealthSchedule schedule = {})
        : store([this]() -> Timestamp { return clock.now(); }),
          exec(store, clock, config, std::move(schedule),
               [this](NotificationKind k, JobId id) { notifications.emplace_back(k, id); }) {}

    // Drain events up to and including time t, feeding completions back.
    void run_to(Timestamp t) {
        while (clock.has_pending() && *clock.peek_next_time() <= t) {
            auto ev = *clock.advance();
            if (ev.kind == EventKind::JobCompleted ||
                ev.kind == EventKind::JobWalltimeExceeded)
                exec.on_completion_event(ev);
        }
        if (clock.now() < t)
            clock.advance_to(t);
        exec.reap_completions();
    }

    Job launch_running(Seconds actual, Seconds maxTime, const Assignment& a) {
        Job j = make_job(store, actual, maxTime, static_cast<int>(a.size()));
        store.cas_update_state(j.idJob, JobState::Waiting, JobState::ToLaunch);
        REQUIRE(exec.launch(*store.get_job(j.idJob), a));
        return *store.get_job(j.idJob);
    }
};

} // namespace

TEST_CASE("virtual clock pops in time order with insertion-order ties") {
    VirtualClock clock;
    CHECK_FALSE(clock.advance().has_value());
    clock.schedule(EventKind::JobCompleted, 5, 1);
    clock.schedule(EventKind::JobCompleted, 3, 2);
    clock.schedule(EventKind::JobCompleted, 5, 3);
    auto first = clock.advance();
    REQUIRE(first);
    CHECK(first->idJob == 2);
    CHECK(clock.now() == 3);
    CHECK(clock.advance()->idJob == 1); // earlier insertion wins the tie
    CHECK(clock.advance()->idJob == 3);
    CHECK(clock.now() == 5);
    CHECK_FALSE(clock.advance().has_value());
}

TEST_CASE("clock never moves backwards and rejects past scheduling") {
    VirtualClock clock;
    clock.schedule(EventKind::JobCompleted, 10, 1);
    clock.advance();
    CHECK(clock.now() == 10);
    CHECK_THROWS_AS(clock.schedule(EventKind::JobCompleted, 5, 2), std::logic_error);
    CHECK_THROWS_AS(clock.advance_to(3), std::logic_error);
}

TEST_CASE("voided events are skipped") {
    VirtualClock clock;
    auto id1 = clock.schedule(EventKind::JobCompleted, 5, 1);
    clock.schedule(EventKind::JobCompleted, 7, 2);
    clock.void_event(id1);
    CHECK(clock.pending_count() == 1);
    auto ev = clock.advance();
    REQUIRE(ev);
    CHECK(ev->idJob == 2);
}

TEST_CASE("simulated launch runs to completion") {
    SimRig rig;
    put_node(rig.store, "n1");
    rig.clock.advance_to(100);
    Job j = rig.launch_running(10, 20, {{"n1", 1}});
    CHECK(j.state == JobState::Running);
    CHECK(j.startTime == 100);
    CHECK(rig.store.assignments_for(j.idJob).size() == 1);

    rig.run_to(110);
    auto done = *rig.store.get_job(j.idJob);
    CHECK(done.state == JobState::Terminated);
    CHECK(done.stopTime == 110);
    CHECK(rig.store.assignments_for(j.idJob).empty());
    // completion delivered as a Term notification
    bool sawTerm = false;
    for (auto& [kind, id] : rig.notifications)
        if (kind == NotificationKind::Term && id == j.idJob)
            sawTerm = true;
    CHECK(sawTerm);
}

TEST_CASE("walltime enforcement kills at exactly maxTime and routes to Error") {
    SimRig rig;
    put_node(rig.store, "n1");
    rig.clock.advance_to(100);
    Job j = rig.launch_running(30, 20, {{"n1", 1}});
    rig.run_to(120);
    auto dead = *rig.store.get_job(j.idJob);
    CHECK(dead.state == JobState::Error);
    CHECK(dead.stopTime == 120);
    CHECK(dead.message == "walltime exceeded");
}

TEST_CASE("a job exactly at its walltime completes normally") {
    SimRig rig;
    put_node(rig.store, "n1");
    Job j = rig.launch_running(20, 20, {{"n1", 1}});
    rig.run_to(20);
    CHECK(rig.store.get_job(j.idJob)->state == JobState::Terminated);
}

TEST_CASE("launch onto a dead node fails the job and asks for rescheduling") {
    ExecutorConfig config;
    config.healthCheckEnabled = true;
    SimRig rig(config);
    put_node(rig.store, "n1", 2, NodeHealth::Dead);
    Job j = make_job(rig.store, 10, 20);
    rig.store.cas_update_state(j.idJob, JobState::Waiting, JobState::ToLaunch);
    CHECK_FALSE(rig.exec.launch(*rig.store.get_job(j.idJob), {{"n1", 1}}));
    auto failed = *rig.store.get_job(j.idJob);
    CHECK(failed.state == JobState::Error);
    CHECK_FALSE(failed.startTime.has_value());
    bool sawScheduling = false;
    for (auto& [kind, id] : rig.notifications)
        if (kind == NotificationKind::Scheduling)
            sawScheduling = true;
    CHECK(sawScheduling);
}

TEST_CASE("with health checking off the dead node is used anyway") {
    SimRig rig; // healthCheckEnabled defaults to false
    put_node(rig.store, "n1", 2, NodeHealth::Dead);
    Job j = rig.launch_running(5, 10, {{"n1", 1}});
    CHECK(j.state == JobState::Running);
}

TEST_CASE("cancelling a waiting job never sets a start time") {
    SimRig rig;
    Job j = make_job(rig.store, 10, 20);
    rig.exec.cancel(j.idJob, "removed by user");
    auto gone = *rig.store.get_job(j.idJob);
    CHECK(gone.state == JobState::Error);
    CHECK_FALSE(gone.startTime.has_value());
    CHECK(gone.message == "removed by user");
}

TEST_CASE("cancelling a running job frees resources at the cancellation instant") {
    SimRig rig;
    put_node(rig.store, "n1");
    Job j = rig.launch_running(100, 200, {{"n1", 1}});
    rig.clock.advance_to(40);
    rig.exec.cancel(j.idJob, "resources required");
    auto gone = *rig.store.get_job(j.idJob);
    CHECK(gone.state == JobState::Error);
    CHECK(gone.stopTime == 40);
    CHECK(rig.store.assignments_for(j.idJob).empty());
    CHECK(rig.exec.busy_procs().empty());
    // the pending completion event must be void: nothing fires later
    rig.run_to(500);
    CHECK(rig.store.get_job(j.idJob)->state == JobState::Error);
    CHECK(rig.store.get_job(j.idJob)->stopTime == 40);
}

TEST_CASE("cancelling a terminal job is a warning no-op") {
    SimRig rig;
    put_node(rig.store, "n1");
    Job j = rig.launch_running(5, 10, {{"n1", 1}});
    rig.run_to(5);
    REQUIRE(rig.store.get_job(j.idJob)->state == JobState::Terminated);
    rig.exec.cancel(j.idJob, "too late");
    CHECK(rig.store.get_job(j.idJob)->state == JobState::Terminated);
    bool sawWarning = false;
    for (const auto& rec : rig.store.accounting_for(j.idJob))
        if (rec.eventKind == "warning")
            sawWarning = true;
    CHECK(sawWarning);
}

TEST_CASE("probes follow the scripted health schedule") {
    HealthSchedule schedule;
    schedule.downtimes.push_back({"n2", 100, 200});
    std::vector<Node> nodes;
    for (const char* name : {"n1", "n2", "n3"}) {
        Node n;
        n.name = name;
        n.capacity = 1;
        nodes.push_back(n);
    }
    auto before = check_nodes(nodes, 5, 50, schedule);
    CHECK(before["n2"] == NodeHealth::Alive);
    auto during = check_nodes(nodes, 5, 150, schedule);
    CHECK(during["n1"] == NodeHealth::Alive);
    CHECK(during["n2"] == NodeHealth::Suspected);
    CHECK(during["n3"] == NodeHealth::Alive);
    auto after = check_nodes(nodes, 5, 200, schedule);
    CHECK(after["n2"] == NodeHealth::Alive);
}

TEST_CASE("shrinking the timeout only turns Alive into Suspected") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Node> nodes;
        for (int i = 0; i < 5; ++i) {
            Node n;
            n.name = "n" + std::to_string(i);
            n.capacity = 1;
            n.properties["probe_latency"] = static_cast<std::int64_t>(rng() % 20);
            nodes.push_back(n);
        }
        Seconds t1 = 1 + static_cast<Seconds>(rng() % 20);
        Seconds t2 = t1 + 1 + static_cast<Seconds>(rng() % 10);
        auto tight = check_nodes(nodes, t1, 0, {});
        auto loose = check_nodes(nodes, t2, 0, {});
        for (const auto& n : nodes) {
            if (tight[n.name] == NodeHealth::Alive)
                CHECK(loose[n.name] == NodeHealth::Alive);
        }
    }
}

TEST_CASE("executor bookkeeping mirrors the store's assignment rows") {
    SimRig rig;
    put_node(rig.store, "n1");
    put_node(rig.store, "n2");
    Job a = rig.launch_running(50, 60, {{"n1", 1}, {"n2", 1}});
    Job b = rig.launch_running(20, 30, {{"n2", 1}});

    auto check_match = [&] {
        std::map<std::string, int> fromStore;
        for (const auto& row : rig.store.assignments())
            fromStore[row.node] += row.procs;
        CHECK(rig.exec.busy_procs() == fromStore);
    };
    check_match();
    rig.run_to(20); // b completes
    check_match();
    rig.exec.cancel(a.idJob, "stop");
    check_match();
    CHECK(rig.exec.busy_procs().empty());
    (void)b;
}

TEST_CASE("every launched job ends in exactly one completion or a cancellation") {
    std::mt19937 rng(71);
    SimRig rig;
    for (int i = 0; i < 4; ++i)
        put_node(rig.store, "n" + std::to_string(i), 2);
    std::vector<JobId> launched;
    for (int i = 0; i < 30; ++i) {
        Seconds actual = 1 + static_cast<Seconds>(rng() % 30);
        Seconds maxTime = 1 + static_cast<Seconds>(rng() % 30);
        Job j = make_job(rig.store, actual, maxTime);
        rig.store.cas_update_state(j.idJob, JobState::Waiting, JobState::ToLaunch);
        std::string node = "n" + std::to_string(rng() % 4);
        if (rig.exec.launch(*rig.store.get_job(j.idJob), {{node, 1}}))
            launched.push_back(j.idJob);
        if (rng() % 4 == 0 && !launched.empty())
            rig.exec.cancel(launched[rng() % launched.size()], "random cancel");
    }
    rig.run_to(1000);
    for (JobId id : launched) {
        auto j = *rig.store.get_job(id);
        CHECK(is_terminal(j.state));
        REQUIRE(j.stopTime.has_value());
        CHECK(*j.stopTime >= *j.startTime);
    }
    CHECK(rig.exec.busy_procs().empty());
}

TEST_CASE("real mode: a process within walltime matches the simulated trajectory") {
    Store realStore;
    put_node(realStore, "n1");
    std::vector<std::pair<NotificationKind, JobId>> notes;
    auto t0 = std::chrono::steady_clock::now();
    auto now = [t0]() -> Timestamp {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    };
    RealExecutor exec(realStore, {}, now,
                      [&](NotificationKind k, JobId id) { notes.emplace_back(k, id); });

    Job j;
    j.user = "u";
    j.command = "sleep 0.2";
    j.queueName = "default";
    j.nbNodes = 1;
    j.weight = 1;
    j.maxTime = 30;
    JobId id = realStore.insert_job(j);
    realStore.cas_update_state(id, JobState::Waiting, JobState::ToLaunch);
    REQUIRE(exec.launch(*realStore.get_job(id), {{"n1", 1}}));
    CHECK(realStore.get_job(id)->bpid.has_value());

    for (int i = 0; i < 200 && !exec.has_pending_completions(); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    REQUIRE(exec.has_pending_completions());
    exec.reap_completions();
    CHECK(realStore.get_job(id)->state == JobState::Terminated);

    // identical state trajectory as the simulated run
    SimRig rig;
    put_node(rig.store, "n1");
    Job sim = rig.launch_running(1, 30, {{"n1", 1}});
    rig.run_to(1);
    auto states = [](const Store& store, JobId jobId) {
        std::vector<std::string> out;
        for (const auto& rec : store.accounting_for(jobId))
            if (rec.eventKind == "state")
                out.push_back(rec.detail);
        return out;
    };
    CHECK(states(realStore, id) == states(rig.store, sim.idJob));
}

TEST_CASE("real mode: walltime kill routes to Error") {
    Store realStore;
    put_node(realStore, "n1");
    auto t0 = std::chrono::steady_clock::now();
    auto now = [t0]() -> Timestamp {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    };
    RealExecutor exec(realStore, {}, now, {});
    Job j;
    j.user = "u";
    j.command = "sleep 30";
    j.queueName = "default";
    j.nbNodes = 1;
    j.weight = 1;
    j.maxTime = 1;
    JobId id = realStore.insert_job(j);
    realStore.cas_update_state(id, JobState::Waiting, JobState::ToLaunch);
    REQUIRE(exec.launch(*realStore.get_job(id), {{"n1", 1}}));
    for (int i = 0; i < 300 && !exec.has_pending_completions(); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    REQUIRE(exec.has_pending_completions());
    exec.reap_completions();
    auto dead = *realStore.get_job(id);
    CHECK(dead.state == JobState::Error);
    CHECK(dead.message == "walltime exceeded");
}

TEST_CASE("real mode: cancel kills the process") {
    Store realStore;
    put_node(realStore, "n1");
    auto t0 = std::chrono::steady_clock::now();
    auto now = [t0]() -> Timestamp {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    };
    RealExecutor exec(realStore, {}, now, {});
    Job j;
    j.user = "u";
    j.command = "sleep 30";
    j.queueName = "default";
    j.nbNodes = 1;
    j.weight = 1;
    j.maxTime = 60;
    JobId id = realStore.insert_job(j);
    realStore.cas_update_state(id, JobState::Waiting, JobState::ToLaunch);
    REQUIRE(exec.launch(*realStore.get_job(id), {{"n1", 1}}));
    exec.cancel(id, "stop");
    CHECK(realStore.get_job(id)->state == JobState::Error);
    CHECK(exec.running_count() == 0);
}
