#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Core domain types shared by every module: jobs, nodes, queues, the job
// state machine and the resource-matching property expressions. Everything
// here is a plain value type; no storage, no clocks.

namespace bsched {

using Timestamp = std::int64_t; // seconds since engine epoch 0
using Seconds = std::int64_t;
using JobId = std::int64_t;

enum class JobState {
    Waiting,
    Hold,
    ToLaunch,
    ToError,
    ToAckReservation,
    Launching,
    Running,
    Terminated,
    Error,
};

enum class ReservationStatus { None, ToSchedule, Scheduled };

enum class JobType { Interactive, Passive };

enum class NodeHealth { Alive, Suspected, Dead };

enum class QueuePolicy { Fifo, Saf };

// Legal edges of the job state machine. Terminated and Error are terminal.
bool valid_transition(JobState from, JobState to);

bool is_terminal(JobState s);

const char* to_string(JobState s);
const char* to_string(ReservationStatus r);
const char* to_string(JobType t);
const char* to_string(NodeHealth h);
const char* to_string(QueuePolicy p);

std::optional<JobState> job_state_from_string(const std::string& s);
std::optional<ReservationStatus> reservation_from_string(const std::string& s);
std::optional<JobType> job_type_from_string(const std::string& s);
std::optional<NodeHealth> node_health_from_string(const std::string& s);
std::optional<QueuePolicy> queue_policy_from_string(const std::string& s);

// Scalar node property / comparison literal: integer, string or boolean.
using PropertyValue = std::variant<std::int64_t, std::string, bool>;

std::string property_value_to_string(const PropertyValue& v);

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

const char* to_string(CmpOp op);

struct PropertyAtom {
    std::string key;
    CmpOp op = CmpOp::Eq;
    PropertyValue value;

    bool operator==(const PropertyAtom&) const = default;
};

// Conjunction of atomic comparisons. The empty conjunction matches every
// node. Evaluation is total: a missing key or a type-mismatched comparison
// makes the atom false.
struct PropertyExpr {
    std::vector<PropertyAtom> atoms;

    bool empty() const { return atoms.empty(); }
    bool operator==(const PropertyExpr&) const = default;

    // Text form: atoms joined with AND, e.g. "switch = 's1' AND mem >= 256".
    std::string to_string() const;

    // Parses the text form; throws std::invalid_argument on bad syntax.
    static PropertyExpr parse(const std::string& text);
};

struct Node {
    std::string name;
    int capacity = 1; // processors
    NodeHealth health = NodeHealth::Alive;
    std::map<std::string, PropertyValue> properties;
};

bool eval_property(const PropertyExpr& expr, const Node& node);

struct Queue {
    std::string name;
    int priority = 0; // higher schedules first
    QueuePolicy policy = QueuePolicy::Fifo;
    bool active = true;
    bool bestEffortQueue = false;
};

struct Job {
    JobId idJob = 0;
    JobType jobType = JobType::Passive;
    std::string infoType; // contact host:port for interactive jobs, opaque
    JobState state = JobState::Waiting;
    ReservationStatus reservation = ReservationStatus::None;
    std::optional<Timestamp> reservedStart;
    std::string message;
    std::string user;
    int nbNodes = 1;
    int weight = 1; // processors per node
    std::string command;
    std::optional<std::int64_t> bpid; // execution handle (real mode pid)
    std::string queueName;
    Seconds maxTime = 0; // walltime
    PropertyExpr properties;
    std::string launchingDirectory;
    Timestamp submissionTime = 0;
    std::optional<Timestamp> startTime;
    std::optional<Timestamp> stopTime;
    bool bestEffort = false;
    // True run length, simulation only; absent when a real process decides.
    std::optional<Seconds> actualDuration;

    int procs() const { return nbNodes * weight; }
};

// One slice of a job's placement: procs processors on one node.
struct NodeSlice {
    std::string node;
    int procs = 0;

    bool operator==(const NodeSlice&) const = default;
};

using Assignment = std::vector<NodeSlice>;

// A busy interval on one node, as reported by the store: either a
// launched job's [startTime, startTime + maxTime) or a scheduled
// reservation's [reservedStart, reservedStart + maxTime).
struct Occupation {
    JobId idJob = 0;
    std::string node;
    int procs = 0;
    Timestamp start = 0;
    Timestamp end = 0;
};

struct JobFilter {
    std::optional<JobState> state;
    std::optional<std::string> queueName;
    std::optional<std::string> user;
    std::optional<bool> bestEffort;
    std::optional<Timestamp> submittedFrom; // inclusive
    std::optional<Timestamp> submittedTo;   // inclusive

    bool matches(const Job& j) const;
};

struct AccountingRecord {
    Timestamp timestamp = 0;
    JobId idJob = 0;
    std::string eventKind;
    std::string detail;
};

} // namespace bsched
