#include "bsched/admission.hpp"

#include <algorithm>

namespace bsched {

namespace {

bool field_missing(const SubmissionRequest& r, RequestField f) {
    switch (f) {
    case RequestField::QueueName: return !r.queueName.has_value();
    case RequestField::NbNodes: return !r.nbNodes.has_value();
    case RequestField::Weight: return !r.weight.has_value();
    case RequestField::MaxTime: return !r.maxTime.has_value();
    case RequestField::LaunchingDirectory: return !r.launchingDirectory.has_value();
    }
    return false;
}

void apply_default(SubmissionRequest& r, const SetDefault& d) {
    if (!field_missing(r, d.field))
        return;
    switch (d.field) {
    case RequestField::QueueName: r.queueName = d.stringValue; break;
    case RequestField::NbNodes: r.nbNodes = static_cast<int>(d.intValue); break;
    case RequestField::Weight: r.weight = static_cast<int>(d.intValue); break;
    case RequestField::MaxTime: r.maxTime = d.intValue; break;
    case RequestField::LaunchingDirectory: r.launchingDirectory = d.stringValue; break;
    }
}

int total_processors(const std::vector<Node>& nodes) {
    int total = 0;
    for (const auto& n : nodes)
        total += n.capacity;
    return total;
}

} // namespace

std::vector<AdmissionRule> default_admission_rules(const AdmissionDefaults& defaults) {
    std::vector<AdmissionRule> rules;
    rules.push_back({"default_queue", {},
                     SetDefault{RequestField::QueueName, defaults.queueName, 0}});
    rules.push_back({"default_nbnodes", {},
                     SetDefault{RequestField::NbNodes, {}, defaults.nbNodes}});
    rules.push_back({"default_weight", {},
                     SetDefault{RequestField::Weight, {}, defaults.weight}});
    rules.push_back({"default_walltime", {},
                     SetDefault{RequestField::MaxTime, {}, defaults.maxTime}});
    rules.push_back({"default_directory", {},
                     SetDefault{RequestField::LaunchingDirectory, ".", 0}});
    rules.push_back(
        {"max_nodes",
         [](const SubmissionRequest& r, const ClusterView& c) {
             return r.nbNodes.value_or(1) > static_cast<int>(c.nodes.size());
         },
         Reject{"too many resources requested: more nodes than the cluster has"}});
    rules.push_back(
        {"max_processors",
         [](const SubmissionRequest& r, const ClusterView& c) {
             long demand = static_cast<long>(r.nbNodes.value_or(1)) *
                           r.weight.value_or(1);
             return demand > total_processors(c.nodes);
         },
         Reject{"too many resources requested: demand exceeds cluster processors"}});
    rules.push_back(
        {"no_past_reservation",
         [](const SubmissionRequest& r, const ClusterView& c) {
             return r.reservationStart && *r.reservationStart < c.now;
         },
         Reject{"reservation start is in the past"}});
    return rules;
}

std::variant<Job, Rejection> admit(const SubmissionRequest& request,
                                   const std::vector<AdmissionRule>& rules,
                                   const std::vector<Node>& cluster,
                                   const std::vector<Queue>& queues, Timestamp now) {
    if (request.command.empty())
        return Rejection{"command is required"};
    if (request.user.empty())
        return Rejection{"user is required"};

    SubmissionRequest r = request;
    ClusterView view{cluster, queues, now};
    for (const auto& rule : rules) {
        if (rule.match && !rule.match(r, view))
            continue;
        if (const auto* def = std::get_if<SetDefault>(&rule.action)) {
            apply_default(r, *def);
        } else if (const auto* rej = std::get_if<Reject>(&rule.action)) {
            return Rejection{rej->message};
        } else if (const auto* tr = std::get_if<Transform>(&rule.action)) {
            tr->apply(r);
        }
    }

    const Queue* queue = nullptr;
    for (const auto& q : queues)
        if (q.name == *r.queueName)
            queue = &q;
    if (!queue)
        return Rejection{"unknown queue: " + *r.queueName};
    if (*r.nbNodes < 1 || *r.weight < 1)
        return Rejection{"nbNodes and weight must be positive"};
    if (*r.maxTime < 1)
        return Rejection{"walltime must be positive"};
    if (r.actualDuration && *r.actualDuration < 1)
        return Rejection{"duration must be positive"};

    Job job;
    job.jobType = r.jobType.value_or(JobType::Passive);
    job.infoType = r.infoType.value_or("");
    job.state = JobState::Waiting;
    job.user = r.user;
    job.nbNodes = *r.nbNodes;
    job.weight = *r.weight;
    job.command = r.command;
    job.queueName = *r.queueName;
    job.maxTime = *r.maxTime;
    job.properties = r.properties.value_or(PropertyExpr{});
    job.launchingDirectory = *r.launchingDirectory;
    job.submissionTime = now;
    job.bestEffort = queue->bestEffortQueue;
    job.actualDuration = r.actualDuration;
    if (r.reservationStart) {
        job.reservation = ReservationStatus::ToSchedule;
        job.reservedStart = *r.reservationStart;
    }
    return job;
}

} // namespace bsched
