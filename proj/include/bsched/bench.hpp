#pragma once

#include "bsched/config.hpp"
#include "bsched/metrics.hpp"
#include "bsched/workload.hpp"

// Benchmark harness: workload replay on the virtual clock and the
// submission-burst stress run. Both are deterministic: identical inputs
// give identical reports.

namespace bsched {

struct BenchOutcome {
    MetricsReport report;
    std::uint64_t kernelSteps = 0;
    bool quiescent = false;
    std::vector<JobId> nonTerminal; // non-empty only when not quiescent
};

// Replays the workload: every record is submitted at its submitTime, the
// engine runs to quiescence, metrics are computed over the whole run. The
// policy overrides every configured queue's ordering.
BenchOutcome bench_run(const WorkloadSpec& workload, QueuePolicy policy,
                       EngineConfig config);

// count identical small jobs (nodesPerJob nodes, weight 1, the given
// duration) all submitted at t = 0. Uses the config cluster; when the
// config declares no nodes, a 17-node, 2-processor cluster is generated.
BenchOutcome bench_burst(int count, int nodesPerJob, Seconds duration,
                         EngineConfig config);

} // namespace bsched
