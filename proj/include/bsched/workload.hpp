#pragma once

#include "bsched/executor.hpp"
#include "bsched/types.hpp"

#include <string>
#include <vector>

// Replayable job-mix description for the simulator and the benchmarks:
// cluster nodes, optional node downtimes and the job records themselves.
// Plain text, one record per line, '#' comments; the README documents the
// field order.

namespace bsched {

struct WorkloadRecord {
    Timestamp submitTime = 0;
    JobType jobType = JobType::Passive;
    std::string queueName;
    int nbNodes = 1;
    int weight = 1;
    Seconds actualDuration = 1;
    Seconds maxTime = 1;
    PropertyExpr properties;
    bool bestEffort = false;
    std::optional<Timestamp> reservationStart;

    long long work() const {
        return static_cast<long long>(nbNodes) * weight * actualDuration;
    }
};

struct WorkloadSpec {
    std::vector<Node> cluster;
    HealthSchedule health;
    std::vector<WorkloadRecord> records;

    long long total_work() const;
    int total_processors() const;
};

// Throws std::runtime_error with a line diagnostic on malformed input or a
// decreasing submitTime sequence.
WorkloadSpec parse_workload_text(const std::string& text);
WorkloadSpec load_workload(const std::string& path);

// Every queue referenced by a record must be declared; throws otherwise.
void validate_workload(const WorkloadSpec& spec, const std::vector<Queue>& queues);

} // namespace bsched
