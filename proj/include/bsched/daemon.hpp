#pragma once

#include "bsched/kernel.hpp"

#include <atomic>
#include <string>
#include <thread>

// Real-mode inter-process endpoint: one JSON object per line over a local
// Unix socket. Commands are short-lived clients: they perform store
// operations through the serving kernel and send notifications; they never
// schedule or execute jobs themselves.
//
// Requests:  {"cmd":"submit","request":{...}}  -> {"ok":true,"id":N}
//            {"cmd":"del","id":N}              -> {"ok":true[,"warning":..]}
//            {"cmd":"stat"[,"filter":{...}]}   -> {"ok":true,"jobs":[...]}
//            {"cmd":"notify","kind":"Scheduling"} -> {"ok":true}
//            {"cmd":"shutdown"}                -> {"ok":true}
// Errors:    {"ok":false,"error":"..."}

namespace bsched {

class DaemonServer {
public:
    DaemonServer(Kernel& kernel, std::string socketPath);
    ~DaemonServer();

    void start();
    void stop();

    const std::string& socket_path() const { return path_; }

private:
    void accept_loop();
    std::string handle_request(const std::string& line);

    Kernel& kernel_;
    std::string path_;
    int listenFd_ = -1;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

// Connects, sends one request line, reads one response line. Throws
// std::runtime_error when the engine is unreachable.
std::string daemon_call(const std::string& socketPath, const std::string& requestLine);

} // namespace bsched
