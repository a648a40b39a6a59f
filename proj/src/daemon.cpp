#include "bsched/daemon.hpp"

#include <json.hpp>

#include <cstring>
#include <stdexcept>

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace bsched {

using nlohmann::json;

namespace {

json job_to_json(const Job& j) {
    json out;
    out["id"] = j.idJob;
    out["type"] = to_string(j.jobType);
    out["state"] = to_string(j.state);
    out["reservation"] = to_string(j.reservation);
    out["user"] = j.user;
    out["queue"] = j.queueName;
    out["nbnodes"] = j.nbNodes;
    out["weight"] = j.weight;
    out["command"] = j.command;
    out["walltime"] = j.maxTime;
    out["properties"] = j.properties.to_string();
    out["besteffort"] = j.bestEffort;
    out["message"] = j.message;
    out["submission"] = j.submissionTime;
    if (j.startTime)
        out["start"] = *j.startTime;
    if (j.stopTime)
        out["stop"] = *j.stopTime;
    if (j.reservedStart)
        out["reserved_start"] = *j.reservedStart;
    return out;
}

SubmissionRequest request_from_json(const json& in) {
    SubmissionRequest req;
    req.command = in.value("command", "");
    req.user = in.value("user", "");
    if (in.contains("queue"))
        req.queueName = in.at("queue").get<std::string>();
    if (in.contains("nbnodes"))
        req.nbNodes = in.at("nbnodes").get<int>();
    if (in.contains("weight"))
        req.weight = in.at("weight").get<int>();
    if (in.contains("walltime"))
        req.maxTime = in.at("walltime").get<Seconds>();
    if (in.contains("properties"))
        req.properties = PropertyExpr::parse(in.at("properties").get<std::string>());
    if (in.contains("reservation"))
        req.reservationStart = in.at("reservation").get<Timestamp>();
    if (in.contains("directory"))
        req.launchingDirectory = in.at("directory").get<std::string>();
    if (in.contains("interactive") && in.at("interactive").get<bool>())
        req.jobType = JobType::Interactive;
    if (in.contains("duration"))
        req.actualDuration = in.at("duration").get<Seconds>();
    return req;
}

ssize_t write_all(int fd, const std::string& data) {
    std::size_t written = 0;
    while (written < data.size()) {
        ssize_t n = ::write(fd, data.data() + written, data.size() - written);
        if (n <= 0)
            return -1;
        written += static_cast<std::size_t>(n);
    }
    return static_cast<ssize_t>(written);
}

} // namespace

DaemonServer::DaemonServer(Kernel& kernel, std::string socketPath)
    : kernel_(kernel), path_(std::move(socketPath)) {}

DaemonServer::~DaemonServer() {
    stop();
}

void DaemonServer::start() {
    listenFd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listenFd_ < 0)
        throw std::runtime_error("daemon: cannot create socket");
    ::unlink(path_.c_str());
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path_.size() >= sizeof(addr.sun_path))
        throw std::runtime_error("daemon: socket path too long: " + path_);
    std::strncpy(addr.sun_path, path_.c_str(), sizeof(addr.sun_path) - 1);
    if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
        throw std::runtime_error("daemon: cannot bind " + path_);
    if (::listen(listenFd_, 64) < 0)
        throw std::runtime_error("daemon: cannot listen on " + path_);
    stop_ = false;
    thread_ = std::thread([this] { accept_loop(); });
}

void DaemonServer::stop() {
    stop_ = true;
    if (thread_.joinable())
        thread_.join();
    if (listenFd_ >= 0) {
        ::close(listenFd_);
        listenFd_ = -1;
        ::unlink(path_.c_str());
    }
}

void DaemonServer::accept_loop() {
    while (!stop_) {
        pollfd pfd{listenFd_, POLLIN, 0};
        int r = ::poll(&pfd, 1, 100);
        if (r <= 0)
            continue;
        int fd = ::accept(listenFd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        std::string line;
        char buf[4096];
        while (line.find('\n') == std::string::npos) {
            ssize_t n = ::read(fd, buf, sizeof buf);
            if (n <= 0)
                break;
            line.append(buf, static_cast<std::size_t>(n));
        }
        auto eol = line.find('\n');
        if (eol != std::string::npos)
            line.erase(eol);
        std::string response = handle_request(line);
        response += '\n';
        write_all(fd, response);
        ::close(fd);
    }
}

std::string DaemonServer::handle_request(const std::string& line) {
    json response;
    try {
        json request = json::parse(line);
        std::string cmd = request.value("cmd", "");
        if (cmd == "submit") {
            auto result = kernel_.submit(request_from_json(request.at("request")));
            if (std::holds_alternative<JobId>(result)) {
                response["ok"] = true;
                response["id"] = std::get<JobId>(result);
            } else {
                response["ok"] = false;
                response["error"] = std::get<Rejection>(result).message;
            }
        } else if (cmd == "del") {
            JobId id = request.at("id").get<JobId>();
            auto job = kernel_.store().get_job(id);
            if (!job) {
                response["ok"] = false;
                response["error"] = "unknown job " + std::to_string(id);
            } else if (is_terminal(job->state)) {
                response["ok"] = true;
                response["warning"] = "job " + std::to_string(id) + " is already " +
                                      to_string(job->state);
            } else {
                kernel_.request_cancel(id);
                response["ok"] = true;
            }
        } else if (cmd == "stat") {
            JobFilter filter;
            if (request.contains("filter")) {
                const auto& f = request.at("filter");
                if (f.contains("user"))
                    filter.user = f.at("user").get<std::string>();
                if (f.contains("queue"))
                    filter.queueName = f.at("queue").get<std::string>();
                if (f.contains("state")) {
                    auto state = job_state_from_string(f.at("state").get<std::string>());
                    if (!state)
                        throw std::runtime_error("unknown state filter");
                    filter.state = *state;
                }
                if (f.contains("besteffort"))
                    filter.bestEffort = f.at("besteffort").get<bool>();
            }
            response["ok"] = true;
            response["jobs"] = json::array();
            for (const auto& job : kernel_.store().query_jobs(filter))
                response["jobs"].push_back(job_to_json(job));
        } else if (cmd == "notify") {
            std::string kind = request.value("kind", "Scheduling");
            if (kind == "Scheduling")
                kernel_.notify(NotificationKind::Scheduling);
            else if (kind == "Term")
                kernel_.notify(NotificationKind::Term);
            else if (kind == "ChState")
                kernel_.notify(NotificationKind::ChState);
            else if (kind == "Monitoring")
                kernel_.notify(NotificationKind::Monitoring);
            else
                throw std::runtime_error("unknown notification kind " + kind);
            response["ok"] = true;
        } else if (cmd == "shutdown") {
            kernel_.notify(NotificationKind::Shutdown);
            stop_ = true;
            response["ok"] = true;
        } else {
            response["ok"] = false;
            response["error"] = "unknown command " + cmd;
        }
    } catch (const std::exception& e) {
        response["ok"] = false;
        response["error"] = e.what();
    }
    return response.dump();
}

std::string daemon_call(const std::string& socketPath, const std::string& requestLine) {
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0)
        throw std::runtime_error("engine unreachable: cannot create socket");
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (socketPath.size() >= sizeof(addr.sun_path)) {
        ::close(fd);
        throw std::runtime_error("engine unreachable: socket path too long");
    }
    std::strncpy(addr.sun_path, socketPath.c_str(), sizeof(addr.sun_path) - 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        throw std::runtime_error("engine unreachable at " + socketPath);
    }
    std::string out = requestLine;
    if (out.empty() || out.back() != '\n')
        out += '\n';
    if (write_all(fd, out) < 0) {
        ::close(fd);
        throw std::runtime_error("engine unreachable: write failed");
    }
    ::shutdown(fd, SHUT_WR);
    std::string response;
    char buf[4096];
    while (true) {
        ssize_t n = ::read(fd, buf, sizeof buf);
        if (n <= 0)
            break;
        response.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fd);
    auto eol = response.find('\n');
    if (eol != std::string::npos)
        response.erase(eol);
    if (response.empty())
        throw std::runtime_error("engine unreachable: empty response");
    return response;
}

} // namespace bsched
