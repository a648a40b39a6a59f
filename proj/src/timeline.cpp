#include "bsched/timeline.hpp"

#include <algorithm>
#include <climits>
#include <stdexcept>

namespace bsched {

void GanttTimeline::add_node(Node node) {
    auto it = std::lower_bound(tracks_.begin(), tracks_.end(), node.name,
                               [](const NodeTrack& t, const std::string& name) {
                                   return t.meta.name < name;
                               });
    if (it != tracks_.end() && it->meta.name == node.name) {
        it->meta = std::move(node);
        return;
    }
    tracks_.insert(it, NodeTrack{std::move(node), {}});
}

GanttTimeline::NodeTrack* GanttTimeline::find_track_mut(const std::string& name) {
    auto it = std::lower_bound(tracks_.begin(), tracks_.end(), name,
                               [](const NodeTrack& t, const std::string& n) {
                                   return t.meta.name < n;
                               });
    if (it == tracks_.end() || it->meta.name != name)
        return nullptr;
    return &*it;
}

const GanttTimeline::NodeTrack* GanttTimeline::find_track(const std::string& name) const {
    return const_cast<GanttTimeline*>(this)->find_track_mut(name);
}

void GanttTimeline::add_occupation(const Occupation& occ) {
    NodeTrack* track = find_track_mut(occ.node);
    if (!track)
        throw std::invalid_argument("timeline: occupation references unknown node " +
                                    occ.node);
    if (occ.end <= now_)
        return;
    Interval iv{std::max(occ.start, now_), occ.end, occ.procs, occ.idJob};
    auto pos = std::lower_bound(track->intervals.begin(), track->intervals.end(),
                                iv.start, [](const Interval& a, Timestamp s) {
                                    return a.start < s;
                                });
    track->intervals.insert(pos, iv);
}

void GanttTimeline::commit(JobId owner, const Assignment& assignment, Timestamp start,
                           Timestamp end) {
    for (const auto& slice : assignment)
        add_occupation({owner, slice.node, slice.procs, start, end});
}

void GanttTimeline::remove_owner(JobId owner) {
    for (auto& track : tracks_)
        std::erase_if(track.intervals,
                      [owner](const Interval& iv) { return iv.owner == owner; });
}

int GanttTimeline::free_at(const std::string& node, Timestamp t) const {
    const NodeTrack* track = find_track(node);
    if (!track)
        throw std::invalid_argument("timeline: unknown node " + node);
    int used = 0;
    for (const auto& iv : track->intervals)
        if (iv.start <= t && t < iv.end)
            used += iv.procs;
    return track->meta.capacity - used;
}

bool GanttTimeline::window_free(const NodeTrack& track, Timestamp start, Timestamp end,
                                int weight) const {
    if (weight > track.meta.capacity)
        return false;
    int budget = track.meta.capacity - weight;
    // Max concurrent usage over [start, end) via an event sweep of the
    // overlapping intervals. The scratch buffer is reused across calls;
    // this check dominates every scheduling pass.
    static thread_local std::vector<std::pair<Timestamp, int>> events;
    events.clear();
    for (const auto& iv : track.intervals) {
        if (iv.start >= end)
            break; // sorted by start
        if (iv.end <= start)
            continue;
        events.emplace_back(std::max(iv.start, start), iv.procs);
        events.emplace_back(std::min(iv.end, end), -iv.procs);
    }
    // Pair ordering puts releases (-procs) before acquisitions at equal t,
    // matching the half-open interval semantics.
    std::sort(events.begin(), events.end());
    int used = 0;
    for (const auto& [t, delta] : events) {
        used += delta;
        if (used > budget)
            return false;
    }
    return true;
}

std::vector<const GanttTimeline::NodeTrack*>
GanttTimeline::eligible_nodes(const SlotRequest& req) const {
    std::vector<const NodeTrack*> out;
    for (const auto& track : tracks_) {
        if (track.meta.capacity < req.weight)
            continue;
        if (aliveOnly_ && track.meta.health != NodeHealth::Alive)
            continue;
        if (!eval_property(req.properties, track.meta))
            continue;
        out.push_back(&track);
    }
    return out;
}

std::vector<Timestamp>
GanttTimeline::candidate_starts(Timestamp notBefore,
                                std::span<const NodeTrack* const> nodes) const {
    std::vector<Timestamp> out{notBefore};
    for (const NodeTrack* track : nodes)
        for (const auto& iv : track->intervals)
            if (iv.end > notBefore)
                out.push_back(iv.end);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool GanttTimeline::no_oversubscription() const {
    for (const auto& track : tracks_) {
        std::vector<Timestamp> points;
        for (const auto& iv : track.intervals) {
            points.push_back(iv.start);
            points.push_back(iv.end);
        }
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());
        for (Timestamp t : points) {
            int used = 0;
            for (const auto& iv : track.intervals)
                if (iv.start <= t && t < iv.end)
                    used += iv.procs;
            if (used > track.meta.capacity)
                return false;
        }
    }
    return true;
}

GanttTimeline build_timeline(Timestamp now, std::span<const Occupation> occupations,
                             std::span<const Node> nodes, bool aliveOnly) {
    GanttTimeline timeline(now, aliveOnly);
    for (const auto& node : nodes)
        timeline.add_node(node);
    for (const auto& occ : occupations)
        timeline.add_occupation(occ);
    return timeline;
}

namespace {

// Usage step function of one node: ascending (t, procs used from t on);
// usage is 0 before the first breakpoint. Built once per slot search so the
// per-candidate window checks are plain scans.
struct UsageProfile {
    const GanttTimeline::NodeTrack* track = nullptr;
    std::vector<std::pair<Timestamp, int>> steps;

    void build(const GanttTimeline::NodeTrack& t) {
        track = &t;
        steps.clear();
        static thread_local std::vector<std::pair<Timestamp, int>> deltas;
        deltas.clear();
        for (const auto& iv : t.intervals) {
            deltas.emplace_back(iv.start, iv.procs);
            deltas.emplace_back(iv.end, -iv.procs);
        }
        std::sort(deltas.begin(), deltas.end());
        int used = 0;
        for (const auto& [time, delta] : deltas) {
            used += delta;
            if (!steps.empty() && steps.back().first == time)
                steps.back().second = used;
            else
                steps.emplace_back(time, used);
        }
    }

    // capacity - weight stays >= usage throughout [start, end)
    bool window_ok(Timestamp start, Timestamp end, int budget) const {
        auto it = std::upper_bound(steps.begin(), steps.end(),
                                   std::make_pair(start, INT_MAX));
        if (it != steps.begin()) {
            auto prev = std::prev(it);
            if (prev->second > budget)
                return false;
        }
        for (; it != steps.end() && it->first < end; ++it)
            if (it->second > budget)
                return false;
        return true;
    }
};

} // namespace

std::optional<Placement> find_earliest_slot(const GanttTimeline& timeline,
                                            const SlotRequest& request) {
    auto eligible = timeline.eligible_nodes(request);
    if (static_cast<int>(eligible.size()) < request.nbNodes)
        return std::nullopt;

    Timestamp notBefore = std::max(request.notBefore, timeline.now());
    auto candidates = timeline.candidate_starts(notBefore, eligible);

    static thread_local std::vector<UsageProfile> profiles;
    if (profiles.size() < eligible.size())
        profiles.resize(eligible.size());
    for (std::size_t i = 0; i < eligible.size(); ++i)
        profiles[i].build(*eligible[i]);

    std::vector<const GanttTimeline::NodeTrack*> chosen;
    for (Timestamp start : candidates) {
        chosen.clear();
        Timestamp end = start + request.duration;
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            int budget = eligible[i]->meta.capacity - request.weight;
            if (profiles[i].window_ok(start, end, budget)) {
                chosen.push_back(eligible[i]);
                if (static_cast<int>(chosen.size()) == request.nbNodes)
                    break;
            }
        }
        if (static_cast<int>(chosen.size()) == request.nbNodes) {
            Placement placement;
            placement.start = start;
            for (const auto* track : chosen)
                placement.assignment.push_back({track->meta.name, request.weight});
            return placement;
        }
    }
    // Free capacity is full everywhere after the last interval end, which is
    // always among the candidates, so reaching this point means no start.
    return std::nullopt;
}

} // namespace bsched
