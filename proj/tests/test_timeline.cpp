#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsched/timeline.hpp"
#include "oracle.hpp"

#include <random>

using namespace bsched;

namespace {

Node node(const std::string& name, int capacity,
          std::map<std::string, PropertyValue> props = {}) {
    Node n;
    n.name = name;
    n.capacity = capacity;
    n.properties = std::move(props);
    return n;
}

std::vector<Node> cluster3() {
    return {node("a", 1), node("b", 1), node("c", 1)};
}

} // namespace

TEST_CASE("empty timeline is fully free") {
    auto tl = build_timeline(0, {}, std::vector<Node>{node("a", 2), node("b", 3)});
    for (Timestamp t : {0, 5, 1000}) {
        CHECK(tl.free_at("a", t) == 2);
        CHECK(tl.free_at("b", t) == 3);
    }
}

TEST_CASE("running occupation clipped to the planning origin") {
    std::vector<Occupation> occ{{1, "a", 2, 10, 110}};
    auto tl = build_timeline(50, occ, std::vector<Node>{node("a", 2)});
    CHECK(tl.free_at("a", 50) == 0);
    CHECK(tl.free_at("a", 109) == 0);
    CHECK(tl.free_at("a", 110) == 2);
    REQUIRE(tl.tracks().size() == 1);
    REQUIRE(tl.tracks()[0].intervals.size() == 1);
    CHECK(tl.tracks()[0].intervals[0].start == 50); // never before now
}

TEST_CASE("occupation ending before now is dropped") {
    std::vector<Occupation> occ{{1, "a", 2, 10, 40}};
    auto tl = build_timeline(50, occ, std::vector<Node>{node("a", 2)});
    CHECK(tl.tracks()[0].intervals.empty());
}

TEST_CASE("unknown node in an occupation") {
    std::vector<Occupation> occ{{1, "ghost", 1, 0, 10}};
    CHECK_THROWS_AS(build_timeline(0, occ, std::vector<Node>{node("a", 1)}),
                    std::invalid_argument);
}

TEST_CASE("disjoint nodes keep independent profiles") {
    std::vector<Occupation> occ{
        {1, "a", 1, 0, 100},  // running
        {2, "b", 1, 50, 150}, // reservation
    };
    auto tl = build_timeline(0, occ, cluster3());
    // pointwise comparison on a sampled grid against direct computation
    for (Timestamp t = 0; t < 200; t += 10) {
        int expectA = (t < 100) ? 0 : 1;
        int expectB = (t >= 50 && t < 150) ? 0 : 1;
        CHECK(tl.free_at("a", t) == expectA);
        CHECK(tl.free_at("b", t) == expectB);
        CHECK(tl.free_at("c", t) == 1);
    }
}

TEST_CASE("earliest slot on an empty cluster is now") {
    auto tl = build_timeline(7, {}, cluster3());
    SlotRequest req{2, 1, 100, {}, 7};
    auto p = find_earliest_slot(tl, req);
    REQUIRE(p.has_value());
    CHECK(p->start == 7);
    REQUIRE(p->assignment.size() == 2);
    CHECK(p->assignment[0].node == "a"); // lexicographic choice
    CHECK(p->assignment[1].node == "b");
}

TEST_CASE("short job fits before a reservation, long job goes after") {
    std::vector<Occupation> occ{
        {9, "a", 1, 100, 200}, {9, "b", 1, 100, 200}, {9, "c", 1, 100, 200}};
    auto tl = build_timeline(0, occ, cluster3());

    auto p1 = find_earliest_slot(tl, SlotRequest{1, 1, 50, {}, 0});
    REQUIRE(p1.has_value());
    CHECK(p1->start == 0);

    auto p2 = find_earliest_slot(tl, SlotRequest{1, 1, 150, {}, 0});
    REQUIRE(p2.has_value());
    CHECK(p2->start == 200);
}

TEST_CASE("no finite start when properties match too few nodes") {
    auto tl = build_timeline(0, {},
                             std::vector<Node>{node("a", 1, {{"gpu", true}}),
                                               node("b", 1)});
    SlotRequest req{2, 1, 10, PropertyExpr::parse("gpu = true"), 0};
    CHECK_FALSE(find_earliest_slot(tl, req).has_value());
    SlotRequest one{1, 1, 10, PropertyExpr::parse("gpu = true"), 0};
    auto p = find_earliest_slot(tl, one);
    REQUIRE(p.has_value());
    CHECK(p->assignment[0].node == "a");
}

TEST_CASE("weight above capacity excludes the node") {
    auto tl = build_timeline(0, {}, std::vector<Node>{node("small", 1), node("big", 4)});
    SlotRequest req{1, 2, 10, {}, 0};
    auto p = find_earliest_slot(tl, req);
    REQUIRE(p.has_value());
    CHECK(p->assignment[0].node == "big");
    SlotRequest req8{1, 8, 10, {}, 0};
    CHECK_FALSE(find_earliest_slot(tl, req8).has_value());
}

TEST_CASE("commit and oversubscription check") {
    auto tl = build_timeline(0, {}, std::vector<Node>{node("a", 2)});
    tl.commit(1, {{"a", 1}}, 0, 10);
    tl.commit(2, {{"a", 1}}, 5, 15);
    CHECK(tl.no_oversubscription());
    CHECK(tl.free_at("a", 7) == 0);
    tl.commit(3, {{"a", 1}}, 7, 8); // force a violation
    CHECK_FALSE(tl.no_oversubscription());
}

TEST_CASE("alive-only filtering hides suspected nodes") {
    auto sick = node("a", 1);
    sick.health = NodeHealth::Suspected;
    std::vector<Node> nodes{sick, node("b", 1)};
    auto strict = build_timeline(0, {}, nodes, true);
    SlotRequest req{1, 1, 10, {}, 0};
    auto p = find_earliest_slot(strict, req);
    REQUIRE(p.has_value());
    CHECK(p->assignment[0].node == "b");
    auto lax = build_timeline(0, {}, nodes, false);
    auto q = find_earliest_slot(lax, req);
    REQUIRE(q.has_value());
    CHECK(q->assignment[0].node == "a");
}

TEST_CASE("slot search agrees with the second-by-second oracle") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 400; ++trial) {
        int nodeCount = 1 + static_cast<int>(rng() % 4);
        std::vector<Node> nodes;
        for (int i = 0; i < nodeCount; ++i)
            nodes.push_back(node("n" + std::to_string(i), 1 + static_cast<int>(rng() % 3)));

        Timestamp horizon = 400;
        oracle::GridSim grid(nodes, horizon);
        auto tl = build_timeline(0, {}, nodes);

        // load both with identical random occupations
        int seeds = static_cast<int>(rng() % 6);
        for (int s = 0; s < seeds; ++s) {
            const auto& target = nodes[rng() % nodes.size()];
            int procs = 1 + static_cast<int>(rng() % target.capacity);
            Timestamp start = static_cast<Timestamp>(rng() % 60);
            Timestamp end = start + 1 + static_cast<Timestamp>(rng() % 60);
            // keep it feasible: skip when it would oversubscribe
            bool ok = true;
            for (Timestamp t = start; t < end; ++t)
                if (tl.free_at(target.name, t) < procs)
                    ok = false;
            if (!ok)
                continue;
            tl.add_occupation({100 + s, target.name, procs, start, end});
            grid.occupy(target.name, start, end, procs);
        }

        // a handful of sequential requests, committed in both worlds
        int requests = 1 + static_cast<int>(rng() % 5);
        for (int r = 0; r < requests; ++r) {
            SlotRequest req;
            req.nbNodes = 1 + static_cast<int>(rng() % nodeCount);
            req.weight = 1 + static_cast<int>(rng() % 2);
            req.duration = 1 + static_cast<Seconds>(rng() % 10);
            req.notBefore = static_cast<Timestamp>(rng() % 20);
            oracle::Request oreq{req.nbNodes, req.weight, req.duration, {}, req.notBefore};

            auto mine = find_earliest_slot(tl, req);
            auto truth = grid.earliest(oreq);
            if (!truth.has_value()) {
                CHECK_FALSE(mine.has_value());
                continue;
            }
            REQUIRE(mine.has_value());
            CHECK(mine->start == truth->first);
            REQUIRE(mine->assignment.size() == truth->second.size());
            for (std::size_t i = 0; i < truth->second.size(); ++i)
                CHECK(mine->assignment[i].node == truth->second[i]);
            tl.commit(1000 + r, mine->assignment, mine->start, mine->start + req.duration);
            grid.earliest_and_commit(oreq);
        }
        CHECK(tl.no_oversubscription());
    }
}
