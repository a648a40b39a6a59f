#include "bsched/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bsched {

const char* to_string(CasResult r) {
    switch (r) {
    case CasResult::Updated: return "Updated";
    case CasResult::Conflict: return "Conflict";
    case CasResult::UnknownJob: return "UnknownJob";
    case CasResult::IllegalTransition: return "IllegalTransition";
    }
    return "?";
}

Store::Store(NowFn now_fn) : now_fn_(std::move(now_fn)) {}

Store::Store(Store&& other) noexcept {
    std::lock_guard lock(other.mutex_);
    now_fn_ = std::move(other.now_fn_);
    next_id_ = other.next_id_;
    jobs_ = std::move(other.jobs_);
    nodes_ = std::move(other.nodes_);
    assignments_ = std::move(other.assignments_);
    reservations_ = std::move(other.reservations_);
    log_ = std::move(other.log_);
}

void Store::set_now_fn(NowFn now_fn) {
    std::lock_guard lock(mutex_);
    now_fn_ = std::move(now_fn);
}

Timestamp Store::now_locked() const {
    return now_fn_ ? now_fn_() : 0;
}

Job* Store::find_locked(JobId id) {
    auto it = std::lower_bound(jobs_.begin(), jobs_.end(), id,
                               [](const Job& j, JobId v) { return j.idJob < v; });
    if (it == jobs_.end() || it->idJob != id)
        return nullptr;
    return &*it;
}

const Job* Store::find_locked(JobId id) const {
    return const_cast<Store*>(this)->find_locked(id);
}

void Store::append_accounting_locked(JobId id, const std::string& kind,
                                     const std::string& detail) {
    log_.push_back({now_locked(), id, kind, detail});
}

JobId Store::insert_job(Job job) {
    std::lock_guard lock(mutex_);
    if (job.state != JobState::Waiting)
        throw std::invalid_argument("insert_job: new jobs must be Waiting");
    job.idJob = next_id_++;
    jobs_.push_back(std::move(job));
    append_accounting_locked(jobs_.back().idJob, "submission",
                             "inserted in queue " + jobs_.back().queueName);
    return jobs_.back().idJob;
}

CasResult Store::cas_update_state(JobId id, JobState expected, JobState next) {
    if (!valid_transition(expected, next))
        return CasResult::IllegalTransition;
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return CasResult::UnknownJob;
    if (job->state != expected)
        return CasResult::Conflict;
    job->state = next;
    append_accounting_locked(id, "state",
                             std::string(to_string(expected)) + "->" + to_string(next));
    return CasResult::Updated;
}

std::vector<Job> Store::query_jobs(const JobFilter& filter) const {
    std::lock_guard lock(mutex_);
    std::vector<Job> out;
    for (const auto& j : jobs_)
        if (filter.matches(j))
            out.push_back(j);
    return out;
}

std::optional<Job> Store::get_job(JobId id) const {
    std::lock_guard lock(mutex_);
    const Job* job = find_locked(id);
    if (!job)
        return std::nullopt;
    return *job;
}

std::size_t Store::job_count() const {
    std::lock_guard lock(mutex_);
    return jobs_.size();
}

std::vector<Occupation> Store::snapshot_occupations(Timestamp now) const {
    std::lock_guard lock(mutex_);
    std::vector<Occupation> out;
    for (const auto& j : jobs_) {
        if ((j.state == JobState::Launching || j.state == JobState::Running) &&
            j.startTime) {
            Timestamp end = *j.startTime + j.maxTime;
            for (const auto& row : assignments_)
                if (row.idJob == j.idJob)
                    out.push_back({j.idJob, row.node, row.procs, *j.startTime, end});
        } else if (j.reservation == ReservationStatus::Scheduled &&
                   !is_terminal(j.state) && j.reservedStart) {
            // Not launched yet: the pinned slot itself is the occupation.
            Timestamp end = *j.reservedStart + j.maxTime;
            for (const auto& row : reservations_)
                if (row.idJob == j.idJob)
                    for (const auto& slice : row.nodes)
                        out.push_back({j.idJob, slice.node, slice.procs,
                                       *j.reservedStart, end});
        }
    }
    (void)now;
    return out;
}

bool Store::record_accounting(JobId id, const std::string& eventKind,
                              const std::string& detail) {
    std::lock_guard lock(mutex_);
    if (!find_locked(id))
        return false;
    append_accounting_locked(id, eventKind, detail);
    return true;
}

std::vector<AccountingRecord> Store::accounting() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::vector<AccountingRecord> Store::accounting_for(JobId id) const {
    std::lock_guard lock(mutex_);
    std::vector<AccountingRecord> out;
    for (const auto& rec : log_)
        if (rec.idJob == id)
            out.push_back(rec);
    return out;
}

bool Store::set_start_time(JobId id, Timestamp t) {
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return false;
    job->startTime = t;
    return true;
}

bool Store::set_stop_time(JobId id, Timestamp t) {
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return false;
    job->stopTime = t;
    return true;
}

bool Store::set_message(JobId id, const std::string& message) {
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return false;
    job->message = message;
    return true;
}

bool Store::set_bpid(JobId id, std::optional<std::int64_t> bpid) {
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return false;
    job->bpid = bpid;
    return true;
}

void Store::put_node(Node node) {
    std::lock_guard lock(mutex_);
    for (auto& n : nodes_) {
        if (n.name == node.name) {
            n = std::move(node);
            return;
        }
    }
    nodes_.push_back(std::move(node));
}

std::vector<Node> Store::nodes() const {
    std::lock_guard lock(mutex_);
    return nodes_;
}

std::optional<Node> Store::get_node(const std::string& name) const {
    std::lock_guard lock(mutex_);
    for (const auto& n : nodes_)
        if (n.name == name)
            return n;
    return std::nullopt;
}

bool Store::set_node_health(const std::string& name, NodeHealth health) {
    std::lock_guard lock(mutex_);
    for (auto& n : nodes_) {
        if (n.name == name) {
            n.health = health;
            return true;
        }
    }
    return false;
}

int Store::total_processors() const {
    std::lock_guard lock(mutex_);
    int total = 0;
    for (const auto& n : nodes_)
        total += n.capacity;
    return total;
}

bool Store::add_assignments(JobId id, const Assignment& nodes) {
    std::lock_guard lock(mutex_);
    if (!find_locked(id))
        return false;
    for (const auto& slice : nodes)
        assignments_.push_back({id, slice.node, slice.procs});
    return true;
}

void Store::clear_assignments(JobId id) {
    std::lock_guard lock(mutex_);
    std::erase_if(assignments_, [&](const AssignmentRow& r) { return r.idJob == id; });
}

std::vector<AssignmentRow> Store::assignments() const {
    std::lock_guard lock(mutex_);
    return assignments_;
}

Assignment Store::assignments_for(JobId id) const {
    std::lock_guard lock(mutex_);
    Assignment out;
    for (const auto& row : assignments_)
        if (row.idJob == id)
            out.push_back({row.node, row.procs});
    return out;
}

bool Store::commit_reservation(JobId id, Timestamp start, Assignment nodes) {
    std::lock_guard lock(mutex_);
    Job* job = find_locked(id);
    if (!job)
        return false;
    job->reservation = ReservationStatus::Scheduled;
    job->reservedStart = start;
    std::erase_if(reservations_, [&](const ReservationRow& r) { return r.idJob == id; });
    reservations_.push_back({id, start, std::move(nodes)});
    append_accounting_locked(id, "reservation",
                             "scheduled at " + std::to_string(start));
    return true;
}

void Store::clear_reservation(JobId id) {
    std::lock_guard lock(mutex_);
    std::erase_if(reservations_, [&](const ReservationRow& r) { return r.idJob == id; });
}

std::optional<ReservationRow> Store::reservation_for(JobId id) const {
    std::lock_guard lock(mutex_);
    for (const auto& r : reservations_)
        if (r.idJob == id)
            return r;
    return std::nullopt;
}

void Store::adopt(Store&& other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    next_id_ = other.next_id_;
    jobs_ = std::move(other.jobs_);
    nodes_ = std::move(other.nodes_);
    assignments_ = std::move(other.assignments_);
    reservations_ = std::move(other.reservations_);
    log_ = std::move(other.log_);
}

std::vector<JobId> Store::recover_interrupted() {
    std::lock_guard lock(mutex_);
    std::vector<JobId> failed;
    for (auto& j : jobs_) {
        if (j.state == JobState::ToLaunch || j.state == JobState::Launching ||
            j.state == JobState::Running) {
            JobState from = j.state;
            j.state = JobState::ToError;
            append_accounting_locked(j.idJob, "state",
                                     std::string(to_string(from)) + "->toError");
            j.state = JobState::Error;
            append_accounting_locked(j.idJob, "state", "toError->Error");
            j.message = "interrupted: engine restarted";
            failed.push_back(j.idJob);
        }
    }
    for (JobId id : failed)
        std::erase_if(assignments_, [&](const AssignmentRow& r) { return r.idJob == id; });
    return failed;
}

// ---------------------------------------------------------------------------
// Persistence snapshot
//
// Line-delimited text, one [section] header per table, fields tab separated.
// Job columns follow the jobs-table order (idJob..stopTime) with the
// bestEffort, reservedStart and actualDuration columns appended. Absent
// optionals are written as "-"; strings are escaped (\t, \n, \\, and a
// leading "-" as \x2d).

namespace {

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\\': out += "\\\\"; break;
        default: out += c;
        }
    }
    if (out == "-")
        return "\\x2d";
    return out;
}

std::string unescape(const std::string& s) {
    if (s == "\\x2d")
        return "-";
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char c = s[++i];
            if (c == 't')
                out += '\t';
            else if (c == 'n')
                out += '\n';
            else
                out += c;
        } else {
            out += s[i];
        }
    }
    return out;
}

std::string opt_to_field(const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : "-";
}

std::optional<std::int64_t> field_to_opt(const std::string& f) {
    if (f == "-")
        return std::nullopt;
    return std::stoll(f);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

std::string props_to_field(const std::map<std::string, PropertyValue>& props) {
    std::string out;
    for (const auto& [k, v] : props) {
        if (!out.empty())
            out += ',';
        out += k + "=" + property_value_to_string(v);
    }
    return out.empty() ? "-" : escape(out);
}

std::map<std::string, PropertyValue> field_to_props(const std::string& field) {
    std::map<std::string, PropertyValue> out;
    if (field == "-")
        return out;
    // Reuses the expression grammar: "k=v,k=v" parses as equality atoms.
    PropertyExpr expr = PropertyExpr::parse(unescape(field));
    for (const auto& atom : expr.atoms)
        out[atom.key] = atom.value;
    return out;
}

[[noreturn]] void bad_file(const std::string& what) {
    throw std::runtime_error("store snapshot: " + what);
}

} // namespace

void Store::save(const std::string& path) const {
    std::lock_guard lock(mutex_);
    std::ostringstream out;
    out << "bsched-store v1\n";
    out << "[counter]\n" << next_id_ << "\n";
    out << "[jobs]\n";
    for (const auto& j : jobs_) {
        out << j.idJob << '\t' << to_string(j.jobType) << '\t' << escape(j.infoType)
            << '\t' << to_string(j.state) << '\t' << to_string(j.reservation) << '\t'
            << escape(j.message) << '\t' << escape(j.user) << '\t' << j.nbNodes << '\t'
            << j.weight << '\t' << escape(j.command) << '\t' << opt_to_field(j.bpid)
            << '\t' << escape(j.queueName) << '\t' << j.maxTime << '\t'
            << escape(j.properties.to_string()) << '\t' << escape(j.launchingDirectory)
            << '\t' << j.submissionTime << '\t' << opt_to_field(j.startTime) << '\t'
            << opt_to_field(j.stopTime) << '\t' << (j.bestEffort ? 1 : 0) << '\t'
            << opt_to_field(j.reservedStart) << '\t' << opt_to_field(j.actualDuration)
            << '\n';
    }
    out << "[nodes]\n";
    for (const auto& n : nodes_)
        out << escape(n.name) << '\t' << n.capacity << '\t' << to_string(n.health)
            << '\t' << props_to_field(n.properties) << '\n';
    out << "[assignments]\n";
    for (const auto& a : assignments_)
        out << a.idJob << '\t' << escape(a.node) << '\t' << a.procs << '\n';
    out << "[reservations]\n";
    for (const auto& r : reservations_)
        for (const auto& slice : r.nodes)
            out << r.idJob << '\t' << r.start << '\t' << escape(slice.node) << '\t'
                << slice.procs << '\n';
    out << "[accounting]\n";
    for (const auto& rec : log_)
        out << rec.timestamp << '\t' << rec.idJob << '\t' << escape(rec.eventKind)
            << '\t' << escape(rec.detail) << '\n';

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file)
        throw std::runtime_error("store snapshot: cannot write " + path);
    file << out.str();
}

Store Store::load(const std::string& path, NowFn now_fn) {
    std::ifstream file(path, std::ios::binary);
    if (!file)
        bad_file("cannot read " + path);
    Store store(std::move(now_fn));
    std::string line;
    if (!std::getline(file, line) || line != "bsched-store v1")
        bad_file("bad magic line");

    enum class Section { None, Counter, Jobs, Nodes, Assignments, Reservations, Accounting };
    Section section = Section::None;
    while (std::getline(file, line)) {
        if (line == "[counter]") { section = Section::Counter; continue; }
        if (line == "[jobs]") { section = Section::Jobs; continue; }
        if (line == "[nodes]") { section = Section::Nodes; continue; }
        if (line == "[assignments]") { section = Section::Assignments; continue; }
        if (line == "[reservations]") { section = Section::Reservations; continue; }
        if (line == "[accounting]") { section = Section::Accounting; continue; }
        if (line.empty())
            continue;
        auto fields = split_tabs(line);
        switch (section) {
        case Section::Counter:
            store.next_id_ = std::stoll(line);
            break;
        case Section::Jobs: {
            if (fields.size() != 21)
                bad_file("job row has " + std::to_string(fields.size()) + " fields");
            Job j;
            j.idJob = std::stoll(fields[0]);
            auto type = job_type_from_string(fields[1]);
            auto state = job_state_from_string(fields[3]);
            auto resv = reservation_from_string(fields[4]);
            if (!type || !state || !resv)
                bad_file("bad enum in job row " + fields[0]);
            j.jobType = *type;
            j.infoType = unescape(fields[2]);
            j.state = *state;
            j.reservation = *resv;
            j.message = unescape(fields[5]);
            j.user = unescape(fields[6]);
            j.nbNodes = std::stoi(fields[7]);
            j.weight = std::stoi(fields[8]);
            j.command = unescape(fields[9]);
            j.bpid = field_to_opt(fields[10]);
            j.queueName = unescape(fields[11]);
            j.maxTime = std::stoll(fields[12]);
            j.properties = PropertyExpr::parse(unescape(fields[13]));
            j.launchingDirectory = unescape(fields[14]);
            j.submissionTime = std::stoll(fields[15]);
            j.startTime = field_to_opt(fields[16]);
            j.stopTime = field_to_opt(fields[17]);
            j.bestEffort = fields[18] == "1";
            j.reservedStart = field_to_opt(fields[19]);
            j.actualDuration = field_to_opt(fields[20]);
            store.jobs_.push_back(std::move(j));
            break;
        }
        case Section::Nodes: {
            if (fields.size() != 4)
                bad_file("node row has " + std::to_string(fields.size()) + " fields");
            Node n;
            n.name = unescape(fields[0]);
            n.capacity = std::stoi(fields[1]);
            auto health = node_health_from_string(fields[2]);
            if (!health)
                bad_file("bad health in node row " + n.name);
            n.health = *health;
            n.properties = field_to_props(fields[3]);
            store.nodes_.push_back(std::move(n));
            break;
        }
        case Section::Assignments:
            if (fields.size() != 3)
                bad_file("assignment row");
            store.assignments_.push_back(
                {std::stoll(fields[0]), unescape(fields[1]), std::stoi(fields[2])});
            break;
        case Section::Reservations: {
            if (fields.size() != 4)
                bad_file("reservation row");
            JobId id = std::stoll(fields[0]);
            Timestamp start = std::stoll(fields[1]);
            NodeSlice slice{unescape(fields[2]), std::stoi(fields[3])};
            bool merged = false;
            for (auto& r : store.reservations_) {
                if (r.idJob == id) {
                    r.nodes.push_back(slice);
                    merged = true;
                    break;
                }
            }
            if (!merged)
                store.reservations_.push_back({id, start, {slice}});
            break;
        }
        case Section::Accounting:
            if (fields.size() != 4)
                bad_file("accounting row");
            store.log_.push_back({std::stoll(fields[0]), std::stoll(fields[1]),
                                  unescape(fields[2]), unescape(fields[3])});
            break;
        case Section::None:
            bad_file("data before first section header");
        }
    }
    std::sort(store.jobs_.begin(), store.jobs_.end(),
              [](const Job& a, const Job& b) { return a.idJob < b.idJob; });
    return store;
}

} // namespace bsched
