#include "bsched/notifications.hpp"

namespace bsched {

const char* to_string(NotificationKind k) {
    switch (k) {
    case NotificationKind::Scheduling: return "Scheduling";
    case NotificationKind::Term: return "Term";
    case NotificationKind::ChState: return "ChState";
    case NotificationKind::Monitoring: return "Monitoring";
    case NotificationKind::Shutdown: return "Shutdown";
    }
    return "?";
}

bool NotificationBuffer::notify(NotificationKind kind, JobId payload) {
    std::lock_guard lock(mutex_);
    auto idx = static_cast<std::size_t>(kind);
    if (dropNext_[idx]) {
        dropNext_[idx] = false;
        return false;
    }
    if (pending_[idx])
        return false; // redundant, discarded
    pending_[idx] = true;
    queue_.push_back({kind, payload});
    cv_.notify_all();
    return true;
}

std::optional<Notification> NotificationBuffer::pop() {
    std::lock_guard lock(mutex_);
    if (queue_.empty())
        return std::nullopt;
    Notification n = queue_.front();
    queue_.pop_front();
    pending_[static_cast<std::size_t>(n.kind)] = false;
    return n;
}

bool NotificationBuffer::empty() const {
    std::lock_guard lock(mutex_);
    return queue_.empty();
}

std::size_t NotificationBuffer::size() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

bool NotificationBuffer::wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [this] { return !queue_.empty(); });
}

void NotificationBuffer::drop_next(NotificationKind kind) {
    std::lock_guard lock(mutex_);
    dropNext_[static_cast<std::size_t>(kind)] = true;
}

} // namespace bsched
