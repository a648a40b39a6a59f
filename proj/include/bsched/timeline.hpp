#pragma once

#include "bsched/types.hpp"

#include <span>
#include <vector>

// The scheduler's planning surface: per-node occupation intervals over
// [now, +inf) with a piecewise-constant free-capacity profile. Intervals
// are half-open [start, end).

namespace bsched {

struct SlotRequest {
    int nbNodes = 1;
    int weight = 1;
    Seconds duration = 1; // maxTime
    PropertyExpr properties;
    Timestamp notBefore = 0;
};

struct Placement {
    Timestamp start = 0;
    Assignment assignment;
};

class GanttTimeline {
public:
    struct Interval {
        Timestamp start = 0;
        Timestamp end = 0;
        int procs = 0;
        JobId owner = 0;
    };

    struct NodeTrack {
        Node meta;
        std::vector<Interval> intervals; // sorted by start
    };

    GanttTimeline(Timestamp now, bool aliveOnly) : now_(now), aliveOnly_(aliveOnly) {}

    Timestamp now() const { return now_; }
    bool alive_only() const { return aliveOnly_; }

    void add_node(Node node);

    // Clips the occupation to [now, +inf); drops it entirely when it ends
    // at or before now. Throws std::invalid_argument on an unknown node.
    void add_occupation(const Occupation& occ);

    // Books procs on each assignment node over [start, end).
    void commit(JobId owner, const Assignment& assignment, Timestamp start,
                Timestamp end);

    // Drops every interval owned by the job (used when planning preemption).
    void remove_owner(JobId owner);

    int free_at(const std::string& node, Timestamp t) const;

    // True when the node keeps free capacity >= weight throughout
    // [start, end).
    bool window_free(const NodeTrack& track, Timestamp start, Timestamp end,
                     int weight) const;

    // Nodes able to run the request at some time: property match, capacity
    // >= weight, and Alive when the timeline was built with aliveOnly.
    std::vector<const NodeTrack*> eligible_nodes(const SlotRequest& req) const;

    // Free capacity is piecewise constant, so the earliest feasible start
    // lies at notBefore or at an interval end; these are the candidates.
    std::vector<Timestamp> candidate_starts(Timestamp notBefore,
                                            std::span<const NodeTrack* const> nodes) const;

    const std::vector<NodeTrack>& tracks() const { return tracks_; }
    const NodeTrack* find_track(const std::string& name) const;

    // Capacity check at every interval endpoint of every node.
    bool no_oversubscription() const;

private:
    NodeTrack* find_track_mut(const std::string& name);

    Timestamp now_;
    bool aliveOnly_;
    std::vector<NodeTrack> tracks_; // sorted by node name
};

GanttTimeline build_timeline(Timestamp now, std::span<const Occupation> occupations,
                             std::span<const Node> nodes, bool aliveOnly = false);

// Minimal start >= notBefore at which nbNodes distinct matching nodes each
// keep free capacity >= weight for the whole duration. Nodes are chosen
// lexicographically by name among the feasible ones. nullopt when no finite
// start exists.
std::optional<Placement> find_earliest_slot(const GanttTimeline& timeline,
                                            const SlotRequest& request);

} // namespace bsched
