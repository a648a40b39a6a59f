#pragma once

#include "bsched/types.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

// Submission validation per the ordered admission-rule list: defaults are
// filled in rule order, the first rejecting rule halts evaluation. admit is
// a pure function of its inputs; insertion into the store is the caller's
// separate step.

namespace bsched {

struct SubmissionRequest {
    std::string command; // required
    std::string user;    // required
    std::optional<std::string> queueName;
    std::optional<int> nbNodes;
    std::optional<int> weight;
    std::optional<Seconds> maxTime;
    std::optional<PropertyExpr> properties;
    std::optional<JobType> jobType;
    std::optional<std::string> infoType;
    std::optional<std::string> launchingDirectory;
    std::optional<Timestamp> reservationStart; // a reservation request when set
    std::optional<Seconds> actualDuration;     // simulation-only true run length
};

// Fields an admission rule may default or transform.
enum class RequestField { QueueName, NbNodes, Weight, MaxTime, LaunchingDirectory };

struct SetDefault {
    RequestField field;
    std::string stringValue; // QueueName / LaunchingDirectory
    std::int64_t intValue = 0;
};

struct Reject {
    std::string message;
};

struct Transform {
    RequestField field;
    std::function<void(SubmissionRequest&)> apply;
};

struct ClusterView {
    const std::vector<Node>& nodes;
    const std::vector<Queue>& queues;
    Timestamp now;
};

struct AdmissionRule {
    std::string name;
    // Defaults to "always matches" when empty.
    std::function<bool(const SubmissionRequest&, const ClusterView&)> match;
    std::variant<SetDefault, Reject, Transform> action;
};

struct Rejection {
    std::string message;
};

// The shipped rule set: default queue/size/walltime plus the
// too-much-resources and past-reservation guards. The numeric defaults are
// engine configuration, not scheduler policy.
struct AdmissionDefaults {
    std::string queueName = "default";
    int nbNodes = 1;
    int weight = 1;
    Seconds maxTime = 7200;
};

std::vector<AdmissionRule> default_admission_rules(const AdmissionDefaults& defaults = {});

// Runs the rules in order, then validates the completed request. On success
// the returned Job is Waiting with submissionTime = now (reservation
// requests carry reservation = ToSchedule and their desired start).
std::variant<Job, Rejection> admit(const SubmissionRequest& request,
                                   const std::vector<AdmissionRule>& rules,
                                   const std::vector<Node>& cluster,
                                   const std::vector<Queue>& queues, Timestamp now);

} // namespace bsched
