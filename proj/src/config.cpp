#include "bsched/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bsched {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok)
        out.push_back(tok);
    return out;
}

[[noreturn]] void fail(std::size_t lineNo, const std::string& what) {
    throw std::runtime_error("config line " + std::to_string(lineNo) + ": " + what);
}

std::optional<RequestField> field_from_string(const std::string& s) {
    if (s == "queue")
        return RequestField::QueueName;
    if (s == "nbnodes")
        return RequestField::NbNodes;
    if (s == "weight")
        return RequestField::Weight;
    if (s == "walltime")
        return RequestField::MaxTime;
    if (s == "directory")
        return RequestField::LaunchingDirectory;
    return std::nullopt;
}

std::optional<std::int64_t> request_int_field(const SubmissionRequest& r,
                                              RequestField f) {
    switch (f) {
    case RequestField::NbNodes:
        return r.nbNodes ? std::optional<std::int64_t>(*r.nbNodes) : std::nullopt;
    case RequestField::Weight:
        return r.weight ? std::optional<std::int64_t>(*r.weight) : std::nullopt;
    case RequestField::MaxTime:
        return r.maxTime ? std::optional<std::int64_t>(*r.maxTime) : std::nullopt;
    default:
        return std::nullopt;
    }
}

std::optional<std::string> request_string_field(const SubmissionRequest& r,
                                                RequestField f) {
    switch (f) {
    case RequestField::QueueName: return r.queueName;
    case RequestField::LaunchingDirectory: return r.launchingDirectory;
    default: return std::nullopt;
    }
}

// rule NAME if always then reject MESSAGE...
// rule NAME if missing FIELD then default FIELD VALUE
// rule NAME if FIELD OP VALUE then reject MESSAGE...
AdmissionRule parse_rule(const std::vector<std::string>& tok, std::size_t lineNo) {
    if (tok.size() < 6 || tok[2] != "if")
        fail(lineNo, "expected: rule NAME if CONDITION then ACTION");
    AdmissionRule rule;
    rule.name = tok[1];

    std::size_t thenPos = 0;
    for (std::size_t i = 3; i < tok.size(); ++i)
        if (tok[i] == "then") {
            thenPos = i;
            break;
        }
    if (thenPos == 0)
        fail(lineNo, "missing 'then'");

    // condition
    if (tok[3] == "always" && thenPos == 4) {
        rule.match = {};
    } else if (tok[3] == "missing" && thenPos == 5) {
        auto field = field_from_string(tok[4]);
        if (!field)
            fail(lineNo, "unknown field " + tok[4]);
        RequestField f = *field;
        rule.match = [f](const SubmissionRequest& r, const ClusterView&) {
            return !request_int_field(r, f).has_value() &&
                   !request_string_field(r, f).has_value();
        };
    } else if (thenPos == 6) {
        auto field = field_from_string(tok[3]);
        if (!field)
            fail(lineNo, "unknown field " + tok[3]);
        RequestField f = *field;
        std::string op = tok[4];
        std::string value = tok[5];
        rule.match = [f, op, value](const SubmissionRequest& r, const ClusterView&) {
            if (auto sval = request_string_field(r, f)) {
                if (op == "=")
                    return *sval == value;
                if (op == "!=")
                    return *sval != value;
                return false;
            }
            auto ival = request_int_field(r, f);
            if (!ival)
                return false;
            std::int64_t rhs = std::stoll(value);
            if (op == "=")
                return *ival == rhs;
            if (op == "!=")
                return *ival != rhs;
            if (op == "<")
                return *ival < rhs;
            if (op == "<=")
                return *ival <= rhs;
            if (op == ">")
                return *ival > rhs;
            if (op == ">=")
                return *ival >= rhs;
            return false;
        };
    } else {
        fail(lineNo, "bad condition");
    }

    // action
    if (tok[thenPos + 1] == "reject") {
        std::string message;
        for (std::size_t i = thenPos + 2; i < tok.size(); ++i) {
            if (!message.empty())
                message += ' ';
            message += tok[i];
        }
        if (message.empty())
            fail(lineNo, "reject needs a message");
        rule.action = Reject{message};
    } else if (tok[thenPos + 1] == "default") {
        if (tok.size() != thenPos + 4)
            fail(lineNo, "default needs FIELD VALUE");
        auto field = field_from_string(tok[thenPos + 2]);
        if (!field)
            fail(lineNo, "unknown field " + tok[thenPos + 2]);
        SetDefault def;
        def.field = *field;
        if (*field == RequestField::QueueName ||
            *field == RequestField::LaunchingDirectory)
            def.stringValue = tok[thenPos + 3];
        else
            def.intValue = std::stoll(tok[thenPos + 3]);
        rule.action = def;
    } else {
        fail(lineNo, "unknown action " + tok[thenPos + 1]);
    }
    return rule;
}

} // namespace

EngineConfig default_config() {
    EngineConfig config;
    config.kernel.queues.push_back({"default", 0, QueuePolicy::Fifo, true, false});
    config.kernel.queues.push_back({"besteffort", -10, QueuePolicy::Fifo, true, true});
    return config;
}

EngineConfig parse_config_text(const std::string& text) {
    EngineConfig config;
    std::vector<AdmissionRule> customRules;
    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        auto tok = tokenize(line);
        if (tok.empty())
            continue;
        const std::string& key = tok[0];
        if (key == "scheduling_period" && tok.size() == 2) {
            config.kernel.schedulingPeriod = std::stoll(tok[1]);
        } else if (key == "monitoring_period" && tok.size() == 2) {
            config.kernel.monitoringPeriod = std::stoll(tok[1]);
        } else if (key == "health_check" && tok.size() == 2) {
            config.kernel.healthCheckEnabled = tok[1] == "on" || tok[1] == "true";
        } else if (key == "probe_timeout" && tok.size() == 2) {
            config.kernel.probeTimeout = std::stoll(tok[1]);
        } else if (key == "step_budget" && tok.size() == 2) {
            config.kernel.stepBudget = std::stoull(tok[1]);
        } else if (key == "victim_policy" && tok.size() == 2) {
            if (tok[1] == "youngest")
                config.kernel.victimPolicy = VictimPolicy::YoungestFirst;
            else if (tok[1] == "fewest")
                config.kernel.victimPolicy = VictimPolicy::FewestJobs;
            else
                fail(lineNo, "victim_policy is youngest or fewest");
        } else if (key == "default_queue" && tok.size() == 2) {
            config.kernel.admissionDefaults.queueName = tok[1];
        } else if (key == "default_walltime" && tok.size() == 2) {
            config.kernel.admissionDefaults.maxTime = std::stoll(tok[1]);
        } else if (key == "default_nbnodes" && tok.size() == 2) {
            config.kernel.admissionDefaults.nbNodes = std::stoi(tok[1]);
        } else if (key == "default_weight" && tok.size() == 2) {
            config.kernel.admissionDefaults.weight = std::stoi(tok[1]);
        } else if (key == "queue") {
            // queue NAME PRIORITY POLICY active|inactive [besteffort]
            if (tok.size() < 5)
                fail(lineNo, "expected: queue NAME PRIORITY POLICY STATE [besteffort]");
            Queue q;
            q.name = tok[1];
            q.priority = std::stoi(tok[2]);
            auto policy = queue_policy_from_string(tok[3]);
            if (!policy)
                fail(lineNo, "queue policy is fifo or saf");
            q.policy = *policy;
            q.active = tok[4] == "active";
            q.bestEffortQueue = tok.size() > 5 && tok[5] == "besteffort";
            config.kernel.queues.push_back(q);
        } else if (key == "node") {
            // node NAME CAPACITY [key=value ...]
            if (tok.size() < 3)
                fail(lineNo, "expected: node NAME CAPACITY [key=value ...]");
            Node n;
            n.name = tok[1];
            n.capacity = std::stoi(tok[2]);
            for (std::size_t i = 3; i < tok.size(); ++i) {
                auto expr = PropertyExpr::parse(tok[i]);
                for (const auto& atom : expr.atoms)
                    n.properties[atom.key] = atom.value;
            }
            config.nodes.push_back(n);
        } else if (key == "rule") {
            customRules.push_back(parse_rule(tok, lineNo));
        } else {
            fail(lineNo, "unknown directive " + key);
        }
    }
    // Custom rules run before the shipped defaults so they can pre-empt
    // both the defaulting and the validity checks.
    auto rules = std::move(customRules);
    for (auto& r : default_admission_rules(config.kernel.admissionDefaults))
        rules.push_back(std::move(r));
    config.kernel.admissionRules = std::move(rules);
    if (config.kernel.queues.empty()) {
        config.kernel.queues.push_back({"default", 0, QueuePolicy::Fifo, true, false});
        config.kernel.queues.push_back({"besteffort", -10, QueuePolicy::Fifo, true, true});
    }
    return config;
}

EngineConfig load_config(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw std::runtime_error("cannot read config file " + path);
    std::ostringstream text;
    text << file.rdbuf();
    auto config = parse_config_text(text.str());
    apply_env_overrides(config.kernel);
    return config;
}

void apply_env_overrides(KernelConfig& config) {
    if (const char* v = std::getenv("BSCHED_SCHEDULING_PERIOD"))
        config.schedulingPeriod = std::stoll(v);
    if (const char* v = std::getenv("BSCHED_MONITORING_PERIOD"))
        config.monitoringPeriod = std::stoll(v);
    if (const char* v = std::getenv("BSCHED_HEALTH_CHECK"))
        config.healthCheckEnabled = std::string(v) == "on" || std::string(v) == "true";
    if (const char* v = std::getenv("BSCHED_PROBE_TIMEOUT"))
        config.probeTimeout = std::stoll(v);
}

} // namespace bsched
