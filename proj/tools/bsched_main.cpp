// bsched: batch-scheduler engine and cluster simulator.
//
// submit/del/stat talk to a running engine over its local socket (real
// mode) or operate on a store snapshot file (offline session). bench-run
// and bench-burst drive the simulator in-process. serve runs the real-mode
// engine.

#include "bsched/bench.hpp"
#include "bsched/config.hpp"
#include "bsched/daemon.hpp"
#include "bsched/kernel.hpp"
#include "bsched/metrics.hpp"
#include "bsched/store.hpp"
#include "bsched/workload.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using nlohmann::json;
using namespace bsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitUnreachable = 2;

std::string default_user() {
    if (const char* user = std::getenv("USER"))
        return user;
    return "unknown";
}

EngineConfig config_or_default(const std::string& path) {
    if (path.empty())
        return default_config();
    return load_config(path);
}

std::string format_opt_time(const std::optional<Timestamp>& t) {
    return t ? std::to_string(*t) : "";
}

void print_stat_rows(const std::vector<Job>& jobs) {
    std::printf("%-5s %-10s %-12s %-18s %-7s %-10s %-10s %-10s %s\n", "ID", "USER",
                "QUEUE", "STATE", "RES", "SUBMIT", "START", "STOP", "MESSAGE");
    for (const auto& j : jobs) {
        std::string res = std::to_string(j.nbNodes) + "x" + std::to_string(j.weight);
        std::printf("%-5lld %-10s %-12s %-18s %-7s %-10lld %-10s %-10s %s\n",
                    static_cast<long long>(j.idJob), j.user.c_str(),
                    j.queueName.c_str(), to_string(j.state), res.c_str(),
                    static_cast<long long>(j.submissionTime),
                    format_opt_time(j.startTime).c_str(),
                    format_opt_time(j.stopTime).c_str(), j.message.c_str());
    }
}

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) {
    g_interrupted = 1;
}

struct SubmitArgs {
    std::vector<std::string> command;
    int nbNodes = 0;
    int weight = 0;
    Seconds walltime = 0;
    std::string queue;
    std::string properties;
    Timestamp reservation = -1;
    bool bestEffort = false;
    Seconds duration = 0;
    std::string directory;
    std::string user;
};

SubmissionRequest build_request(const SubmitArgs& args,
                                const EngineConfig& config) {
    SubmissionRequest req;
    for (const auto& part : args.command) {
        if (!req.command.empty())
            req.command += ' ';
        req.command += part;
    }
    req.user = args.user.empty() ? default_user() : args.user;
    if (args.nbNodes > 0)
        req.nbNodes = args.nbNodes;
    if (args.weight > 0)
        req.weight = args.weight;
    if (args.walltime > 0)
        req.maxTime = args.walltime;
    if (!args.queue.empty())
        req.queueName = args.queue;
    if (args.bestEffort && args.queue.empty()) {
        for (const auto& q : config.kernel.queues)
            if (q.bestEffortQueue)
                req.queueName = q.name;
        if (!req.queueName)
            throw std::runtime_error("no best-effort queue configured");
    }
    if (!args.properties.empty())
        req.properties = PropertyExpr::parse(args.properties);
    if (args.reservation >= 0)
        req.reservationStart = args.reservation;
    if (args.duration > 0)
        req.actualDuration = args.duration;
    if (!args.directory.empty())
        req.launchingDirectory = args.directory;
    return req;
}

json submit_request_to_json(const SubmissionRequest& req) {
    json out;
    out["command"] = req.command;
    out["user"] = req.user;
    if (req.queueName)
        out["queue"] = *req.queueName;
    if (req.nbNodes)
        out["nbnodes"] = *req.nbNodes;
    if (req.weight)
        out["weight"] = *req.weight;
    if (req.maxTime)
        out["walltime"] = *req.maxTime;
    if (req.properties)
        out["properties"] = req.properties->to_string();
    if (req.reservationStart)
        out["reservation"] = *req.reservationStart;
    if (req.actualDuration)
        out["duration"] = *req.actualDuration;
    if (req.launchingDirectory)
        out["directory"] = *req.launchingDirectory;
    return out;
}

// Offline session: mutate a snapshot file directly; the engine picks the
// store up on its next start.
Store open_session_store(const std::string& path) {
    if (std::filesystem::exists(path))
        return Store::load(path);
    return Store{};
}

int run_submit(const SubmitArgs& args, const std::string& socket,
               const std::string& storePath, const std::string& configPath) {
    EngineConfig config = config_or_default(configPath);
    SubmissionRequest req = build_request(args, config);
    if (!socket.empty()) {
        json request{{"cmd", "submit"}, {"request", submit_request_to_json(req)}};
        json response = json::parse(daemon_call(socket, request.dump()));
        if (!response.value("ok", false)) {
            std::cerr << "submission rejected: " << response.value("error", "?")
                      << "\n";
            return kExitRejected;
        }
        std::cout << response.at("id").get<JobId>() << "\n";
        return kExitOk;
    }
    Store store = open_session_store(storePath);
    if (store.nodes().empty())
        for (const auto& n : config.nodes)
            store.put_node(n);
    auto result = admit(req, config.kernel.admissionRules, store.nodes(),
                        config.kernel.queues, 0);
    if (std::holds_alternative<Rejection>(result)) {
        std::cerr << "submission rejected: " << std::get<Rejection>(result).message
                  << "\n";
        return kExitRejected;
    }
    JobId id = store.insert_job(std::get<Job>(std::move(result)));
    store.save(storePath);
    std::cout << id << "\n";
    return kExitOk;
}

int run_del(JobId id, const std::string& socket, const std::string& storePath) {
    if (!socket.empty()) {
        json request{{"cmd", "del"}, {"id", id}};
        json response = json::parse(daemon_call(socket, request.dump()));
        if (!response.value("ok", false)) {
            std::cerr << response.value("error", "?") << "\n";
            return kExitRejected;
        }
        if (response.contains("warning"))
            std::cerr << "warning: " << response.at("warning").get<std::string>()
                      << "\n";
        return kExitOk;
    }
    Store store = open_session_store(storePath);
    auto job = store.get_job(id);
    if (!job) {
        std::cerr << "unknown job " << id << "\n";
        return kExitRejected;
    }
    if (is_terminal(job->state)) {
        std::cerr << "warning: job " << id << " is already " << to_string(job->state)
                  << "\n";
        store.record_accounting(id, "warning", "cancellation ignored: job terminal");
        store.save(storePath);
        return kExitOk;
    }
    bool started = job->startTime.has_value();
    fail_job(store, id, job->startTime.value_or(0), "cancelled by user", started);
    store.record_accounting(id, "cancellation", "cancelled by user");
    store.save(storePath);
    return kExitOk;
}

int run_stat(const std::string& user, const std::string& state,
             const std::string& queue, const std::string& socket,
             const std::string& storePath) {
    if (!socket.empty()) {
        json filter = json::object();
        if (!user.empty())
            filter["user"] = user;
        if (!state.empty())
            filter["state"] = state;
        if (!queue.empty())
            filter["queue"] = queue;
        json request{{"cmd", "stat"}, {"filter", filter}};
        json response = json::parse(daemon_call(socket, request.dump()));
        if (!response.value("ok", false)) {
            std::cerr << response.value("error", "?") << "\n";
            return kExitRejected;
        }
        std::vector<Job> jobs;
        for (const auto& row : response.at("jobs")) {
            Job j;
            j.idJob = row.at("id").get<JobId>();
            j.user = row.value("user", "");
            j.queueName = row.value("queue", "");
            if (auto s = job_state_from_string(row.value("state", "")))
                j.state = *s;
            j.nbNodes = row.value("nbnodes", 1);
            j.weight = row.value("weight", 1);
            j.submissionTime = row.value("submission", 0);
            if (row.contains("start"))
                j.startTime = row.at("start").get<Timestamp>();
            if (row.contains("stop"))
                j.stopTime = row.at("stop").get<Timestamp>();
            j.message = row.value("message", "");
            jobs.push_back(std::move(j));
        }
        print_stat_rows(jobs);
        return kExitOk;
    }
    JobFilter filter;
    if (!user.empty())
        filter.user = user;
    if (!queue.empty())
        filter.queueName = queue;
    if (!state.empty()) {
        auto s = job_state_from_string(state);
        if (!s) {
            std::cerr << "unknown state " << state << "\n";
            return kExitRejected;
        }
        filter.state = *s;
    }
    Store store = open_session_store(storePath);
    print_stat_rows(store.query_jobs(filter));
    return kExitOk;
}

void write_responses(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write response-time file " + path);
    out << "id\tresponse_seconds\n";
    for (const auto& [id, response] : report.responseTimes)
        out << id << '\t' << response << '\n';
}

int run_bench(const std::string& workloadPath, const std::string& policyName,
              const std::string& configPath, const std::string& plotPath,
              const std::string& responsesPath) {
    EngineConfig config = config_or_default(configPath);
    auto policy = queue_policy_from_string(policyName);
    if (!policy) {
        std::cerr << "policy must be fifo or saf\n";
        return kExitRejected;
    }
    WorkloadSpec workload = load_workload(workloadPath);
    BenchOutcome outcome = bench_run(workload, *policy, config);
    if (!outcome.quiescent) {
        std::cerr << "run did not reach quiescence; non-terminal jobs:";
        for (JobId id : outcome.nonTerminal)
            std::cerr << " " << id;
        std::cerr << "\n";
        return kExitRejected;
    }
    std::cout << render_report(outcome.report);
    if (!plotPath.empty()) {
        write_plot_data(outcome.report, plotPath);
        std::cout << "utilization series written to " << plotPath << "\n";
    }
    if (!responsesPath.empty())
        write_responses(outcome.report, responsesPath);
    return kExitOk;
}

int run_burst(int count, int nodesPerJob, Seconds duration,
              const std::string& configPath, const std::string& plotPath,
              const std::string& responsesPath) {
    EngineConfig config = config_or_default(configPath);
    BenchOutcome outcome = bench_burst(count, nodesPerJob, duration, config);
    if (!outcome.quiescent) {
        std::cerr << "run did not reach quiescence; non-terminal jobs:";
        for (JobId id : outcome.nonTerminal)
            std::cerr << " " << id;
        std::cerr << "\n";
        return kExitRejected;
    }
    std::cout << render_report(outcome.report);
    if (!plotPath.empty()) {
        write_plot_data(outcome.report, plotPath);
        std::cout << "utilization series written to " << plotPath << "\n";
    }
    if (!responsesPath.empty())
        write_responses(outcome.report, responsesPath);
    return kExitOk;
}

int run_serve(const std::string& configPath, const std::string& socketPath,
              const std::string& storePath) {
    EngineConfig config = config_or_default(configPath);
    Kernel kernel(Kernel::Mode::Real, config.kernel);
    for (const auto& node : config.nodes)
        kernel.add_node(node);
    if (!storePath.empty() && std::filesystem::exists(storePath)) {
        kernel.store().adopt(Store::load(storePath));
        auto recovered = kernel.store().recover_interrupted();
        if (!recovered.empty())
            std::cerr << "recovered " << recovered.size()
                      << " interrupted jobs to Error\n";
    }
    DaemonServer server(kernel, socketPath);
    server.start();
    kernel.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "engine serving on " << socketPath << "\n";
    while (!g_interrupted && kernel.running())
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    kernel.stop();
    if (!storePath.empty())
        kernel.store().save(storePath);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batch scheduler engine and cluster simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string socket;
    std::string storePath;
    std::string configPath;
    app.add_option("--socket", socket, "engine socket path (real mode)");
    app.add_option("--store", storePath, "store snapshot file (offline session)");
    app.add_option("--config", configPath, "engine configuration file");

    SubmitArgs submitArgs;
    auto* submit = app.add_subcommand("submit", "submit a job");
    submit->add_option("-n,--nodes", submitArgs.nbNodes, "number of nodes");
    submit->add_option("-w,--weight", submitArgs.weight, "processors per node");
    submit->add_option("-t,--walltime", submitArgs.walltime, "walltime seconds");
    submit->add_option("-q,--queue", submitArgs.queue, "queue name");
    submit->add_option("-p,--properties", submitArgs.properties,
                       "node property expression");
    submit->add_option("-r,--reservation", submitArgs.reservation,
                       "reserved start timestamp");
    submit->add_flag("-b,--besteffort", submitArgs.bestEffort,
                     "submit to the best-effort queue");
    submit->add_option("--duration", submitArgs.duration,
                       "true run length (simulation sessions)");
    submit->add_option("--directory", submitArgs.directory, "launching directory");
    submit->add_option("--user", submitArgs.user, "submitting user");
    submit->add_option("command", submitArgs.command, "command to execute")
        ->required();

    JobId delId = 0;
    auto* del = app.add_subcommand("del", "cancel a job");
    del->add_option("id", delId, "job id")->required();

    std::string statUser, statState, statQueue;
    auto* stat = app.add_subcommand("stat", "list jobs");
    stat->add_option("-u,--user", statUser, "filter by user");
    stat->add_option("--state", statState, "filter by state");
    stat->add_option("-q,--queue", statQueue, "filter by queue");

    std::string workloadPath, policyName = "fifo", plotPath, responsesPath;
    auto* benchRun = app.add_subcommand("bench-run", "replay a workload");
    benchRun->add_option("--workload", workloadPath, "workload file")->required();
    benchRun->add_option("--policy", policyName, "queue policy: fifo or saf");
    benchRun->add_option("--plot", plotPath, "write utilization series here");
    benchRun->add_option("--responses", responsesPath,
                         "write per-job response times here");

    int burstCount = 0, burstNodes = 1;
    Seconds burstDuration = 10;
    std::string burstPlot, burstResponses;
    auto* benchBurst = app.add_subcommand("bench-burst", "submission burst run");
    benchBurst->add_option("-c,--count", burstCount, "number of jobs")->required();
    benchBurst->add_option("--nodes-per-job", burstNodes, "nodes per job");
    benchBurst->add_option("--duration", burstDuration, "job duration seconds");
    benchBurst->add_option("--plot", burstPlot, "write utilization series here");
    benchBurst->add_option("--responses", burstResponses,
                           "write per-job response times here");

    std::string serveSocket = "/tmp/bsched.sock";
    auto* serve = app.add_subcommand("serve", "run the real-mode engine");
    serve->add_option("--listen", serveSocket, "socket path to serve on");

    auto* notifyCmd = app.add_subcommand("notify", "send a notification");
    std::string notifyKind = "Scheduling";
    notifyCmd->add_option("--kind", notifyKind,
                          "Scheduling|Term|ChState|Monitoring");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*submit)
            return run_submit(submitArgs, socket, storePath, configPath);
        if (*del)
            return run_del(delId, socket, storePath);
        if (*stat)
            return run_stat(statUser, statState, statQueue, socket, storePath);
        if (*benchRun)
            return run_bench(workloadPath, policyName, configPath, plotPath,
                             responsesPath);
        if (*benchBurst)
            return run_burst(burstCount, burstNodes, burstDuration, configPath,
                             burstPlot, burstResponses);
        if (*serve)
            return run_serve(configPath, serveSocket, storePath);
        if (*notifyCmd) {
            json request{{"cmd", "notify"}, {"kind", notifyKind}};
            json response = json::parse(daemon_call(socket, request.dump()));
            return response.value("ok", false) ? kExitOk : kExitRejected;
        }
    } catch (const std::runtime_error& e) {
        std::string what = e.what();
        std::cerr << what << "\n";
        if (what.find("engine unreachable") != std::string::npos)
            return kExitUnreachable;
        return kExitRejected;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitRejected;
    }
    return kExitOk;
}
