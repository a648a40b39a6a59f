#include "bsched/bench.hpp"

#include "bsched/kernel.hpp"

#include <stdexcept>

namespace bsched {

namespace {

SubmissionRequest request_from_record(const WorkloadRecord& r) {
    SubmissionRequest req;
    req.command = "simulated";
    req.user = "workload";
    req.queueName = r.queueName;
    req.nbNodes = r.nbNodes;
    req.weight = r.weight;
    req.maxTime = r.maxTime;
    req.actualDuration = r.actualDuration;
    req.jobType = r.jobType;
    if (!r.properties.empty())
        req.properties = r.properties;
    req.reservationStart = r.reservationStart;
    return req;
}

BenchOutcome run_records(const WorkloadSpec& workload, EngineConfig config) {
    validate_workload(workload, config.kernel.queues);

    Kernel kernel(Kernel::Mode::Simulation, config.kernel, workload.health);
    const auto& cluster = workload.cluster.empty() ? config.nodes : workload.cluster;
    if (cluster.empty())
        throw std::runtime_error("bench: no cluster nodes declared");
    for (const auto& node : cluster)
        kernel.add_node(node);

    kernel.set_submit_handler([&](std::size_t index) {
        const auto& record = workload.records.at(index);
        auto result = kernel.submit(request_from_record(record));
        if (std::holds_alternative<Rejection>(result))
            throw std::runtime_error("bench: record " + std::to_string(index + 1) +
                                     " rejected: " +
                                     std::get<Rejection>(result).message);
    });
    for (std::size_t i = 0; i < workload.records.size(); ++i)
        kernel.clock().schedule(EventKind::SubmitJob, workload.records[i].submitTime, 0,
                                {}, i);

    auto stats = kernel.run_until_quiescent();

    BenchOutcome outcome;
    outcome.kernelSteps = stats.steps;
    outcome.quiescent = stats.quiescent;
    outcome.nonTerminal = stats.nonTerminal;
    int processors = 0;
    for (const auto& node : cluster)
        processors += node.capacity;
    outcome.report = compute_metrics(kernel.store(), processors);
    return outcome;
}

} // namespace

BenchOutcome bench_run(const WorkloadSpec& workload, QueuePolicy policy,
                       EngineConfig config) {
    for (auto& queue : config.kernel.queues)
        queue.policy = policy;
    return run_records(workload, std::move(config));
}

BenchOutcome bench_burst(int count, int nodesPerJob, Seconds duration,
                         EngineConfig config) {
    if (count < 1 || nodesPerJob < 1 || duration < 1)
        throw std::invalid_argument("bench_burst: count, nodes and duration must be positive");
    WorkloadSpec workload;
    workload.cluster = config.nodes;
    if (workload.cluster.empty()) {
        for (int i = 1; i <= 17; ++i) {
            Node n;
            n.name = i < 10 ? "node0" + std::to_string(i) : "node" + std::to_string(i);
            n.capacity = 2;
            workload.cluster.push_back(std::move(n));
        }
    }
    for (int i = 0; i < count; ++i) {
        WorkloadRecord r;
        r.submitTime = 0;
        r.queueName = config.kernel.admissionDefaults.queueName;
        r.nbNodes = nodesPerJob;
        r.weight = 1;
        r.actualDuration = duration;
        r.maxTime = duration;
        workload.records.push_back(std::move(r));
    }
    return run_records(workload, std::move(config));
}

} // namespace bsched
