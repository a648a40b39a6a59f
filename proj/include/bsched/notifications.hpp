#pragma once

#include "bsched/types.hpp"

#include <array>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

// The coalescing notification buffer feeding the central automaton. Any
// thread may notify; redundant notifications (same kind already pending)
// are discarded.

namespace bsched {

enum class NotificationKind { Scheduling, Term, ChState, Monitoring, Shutdown };

const char* to_string(NotificationKind k);

struct Notification {
    NotificationKind kind = NotificationKind::Scheduling;
    JobId payload = 0; // Term carries the job id as a hint
};

class NotificationBuffer {
public:
    // Returns false when the notification was coalesced away (or dropped
    // by a scripted loss).
    bool notify(NotificationKind kind, JobId payload = 0);

    std::optional<Notification> pop();
    bool empty() const;
    std::size_t size() const;

    // Blocks until a notification is pending or the timeout elapses.
    bool wait(std::chrono::milliseconds timeout);

    // Test hook: the next notification of this kind is lost.
    void drop_next(NotificationKind kind);

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Notification> queue_; // arrival order
    std::array<bool, 5> pending_{};
    std::array<bool, 5> dropNext_{};
};

} // namespace bsched
