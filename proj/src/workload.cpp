#include "bsched/workload.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bsched {

namespace {

[[noreturn]] void fail(std::size_t lineNo, const std::string& what) {
    throw std::runtime_error("workload line " + std::to_string(lineNo) + ": " + what);
}

// Whitespace tokenizer honoring double-quoted fields (for property
// expressions containing spaces).
std::vector<std::string> tokenize(const std::string& line, std::size_t lineNo) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
            ++i;
        if (i >= line.size())
            break;
        if (line[i] == '"') {
            std::size_t end = line.find('"', i + 1);
            if (end == std::string::npos)
                fail(lineNo, "unterminated quoted field");
            out.push_back(line.substr(i + 1, end - i - 1));
            i = end + 1;
        } else {
            std::size_t start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
                ++i;
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

} // namespace

long long WorkloadSpec::total_work() const {
    long long total = 0;
    for (const auto& r : records)
        total += r.work();
    return total;
}

int WorkloadSpec::total_processors() const {
    int total = 0;
    for (const auto& n : cluster)
        total += n.capacity;
    return total;
}

WorkloadSpec parse_workload_text(const std::string& text) {
    WorkloadSpec spec;
    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;
    Timestamp lastSubmit = 0;
    bool haveJob = false;
    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        auto tok = tokenize(line, lineNo);
        if (tok.empty())
            continue;
        if (tok[0] == "node") {
            if (tok.size() < 3)
                fail(lineNo, "expected: node NAME CAPACITY [key=value ...]");
            Node n;
            n.name = tok[1];
            n.capacity = std::stoi(tok[2]);
            if (n.capacity < 1)
                fail(lineNo, "node capacity must be positive");
            for (std::size_t i = 3; i < tok.size(); ++i) {
                auto expr = PropertyExpr::parse(tok[i]);
                for (const auto& atom : expr.atoms)
                    n.properties[atom.key] = atom.value;
            }
            spec.cluster.push_back(std::move(n));
        } else if (tok[0] == "down") {
            if (tok.size() != 4)
                fail(lineNo, "expected: down NODE FROM TO");
            spec.health.downtimes.push_back(
                {tok[1], std::stoll(tok[2]), std::stoll(tok[3])});
        } else if (tok[0] == "job") {
            // job SUBMIT TYPE QUEUE NBNODES WEIGHT DURATION MAXTIME
            //     PROPERTIES BESTEFFORT RESERVATION
            if (tok.size() != 11)
                fail(lineNo, "job record needs 10 fields, got " +
                                 std::to_string(tok.size() - 1));
            WorkloadRecord r;
            r.submitTime = std::stoll(tok[1]);
            auto type = job_type_from_string(tok[2]);
            if (!type)
                fail(lineNo, "job type is Interactive or Passive");
            r.jobType = *type;
            r.queueName = tok[3];
            r.nbNodes = std::stoi(tok[4]);
            r.weight = std::stoi(tok[5]);
            r.actualDuration = std::stoll(tok[6]);
            r.maxTime = std::stoll(tok[7]);
            if (r.nbNodes < 1 || r.weight < 1 || r.actualDuration < 1 || r.maxTime < 1)
                fail(lineNo, "sizes and durations must be positive");
            r.properties = tok[8] == "-" ? PropertyExpr{} : PropertyExpr::parse(tok[8]);
            r.bestEffort = tok[9] == "1" || tok[9] == "true";
            if (tok[10] != "-")
                r.reservationStart = std::stoll(tok[10]);
            if (haveJob && r.submitTime < lastSubmit)
                fail(lineNo, "submit times must be non-decreasing");
            lastSubmit = r.submitTime;
            haveJob = true;
            spec.records.push_back(std::move(r));
        } else {
            fail(lineNo, "unknown directive " + tok[0]);
        }
    }
    return spec;
}

WorkloadSpec load_workload(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw std::runtime_error("cannot read workload file " + path);
    std::ostringstream text;
    text << file.rdbuf();
    return parse_workload_text(text.str());
}

void validate_workload(const WorkloadSpec& spec, const std::vector<Queue>& queues) {
    for (const auto& r : spec.records) {
        bool found = false;
        for (const auto& q : queues)
            if (q.name == r.queueName)
                found = true;
        if (!found)
            throw std::runtime_error("workload references undeclared queue " +
                                     r.queueName);
    }
    for (const auto& d : spec.health.downtimes) {
        bool found = false;
        for (const auto& n : spec.cluster)
            if (n.name == d.node)
                found = true;
        if (!found)
            throw std::runtime_error("downtime references unknown node " + d.node);
    }
}

} // namespace bsched
