#include "bsched/types.hpp"

#include <array>
#include <cctype>
#include <stdexcept>

namespace bsched {

bool valid_transition(JobState from, JobState to) {
    switch (from) {
    case JobState::Waiting:
        return to == JobState::Hold || to == JobState::ToLaunch ||
               to == JobState::ToAckReservation || to == JobState::ToError;
    case JobState::Hold:
        return to == JobState::Waiting || to == JobState::ToError;
    case JobState::ToAckReservation:
        return to == JobState::Waiting || to == JobState::ToError;
    case JobState::ToLaunch:
        return to == JobState::Launching || to == JobState::ToError;
    case JobState::Launching:
        return to == JobState::Running || to == JobState::ToError;
    case JobState::Running:
        return to == JobState::Terminated || to == JobState::ToError;
    case JobState::ToError:
        return to == JobState::Error;
    case JobState::Terminated:
    case JobState::Error:
        return false;
    }
    return false;
}

bool is_terminal(JobState s) {
    return s == JobState::Terminated || s == JobState::Error;
}

const char* to_string(JobState s) {
    switch (s) {
    case JobState::Waiting: return "Waiting";
    case JobState::Hold: return "Hold";
    case JobState::ToLaunch: return "toLaunch";
    case JobState::ToError: return "toError";
    case JobState::ToAckReservation: return "toAckReservation";
    case JobState::Launching: return "Launching";
    case JobState::Running: return "Running";
    case JobState::Terminated: return "Terminated";
    case JobState::Error: return "Error";
    }
    return "?";
}

const char* to_string(ReservationStatus r) {
    switch (r) {
    case ReservationStatus::None: return "None";
    case ReservationStatus::ToSchedule: return "toSchedule";
    case ReservationStatus::Scheduled: return "Scheduled";
    }
    return "?";
}

const char* to_string(JobType t) {
    return t == JobType::Interactive ? "Interactive" : "Passive";
}

const char* to_string(NodeHealth h) {
    switch (h) {
    case NodeHealth::Alive: return "Alive";
    case NodeHealth::Suspected: return "Suspected";
    case NodeHealth::Dead: return "Dead";
    }
    return "?";
}

const char* to_string(QueuePolicy p) {
    return p == QueuePolicy::Fifo ? "fifo" : "saf";
}

namespace {

template <typename T, std::size_t N>
std::optional<T> lookup(const std::array<std::pair<const char*, T>, N>& table,
                        const std::string& s) {
    for (const auto& [name, value] : table)
        if (s == name)
            return value;
    return std::nullopt;
}

} // namespace

std::optional<JobState> job_state_from_string(const std::string& s) {
    static const std::array<std::pair<const char*, JobState>, 9> table{{
        {"Waiting", JobState::Waiting},
        {"Hold", JobState::Hold},
        {"toLaunch", JobState::ToLaunch},
        {"toError", JobState::ToError},
        {"toAckReservation", JobState::ToAckReservation},
        {"Launching", JobState::Launching},
        {"Running", JobState::Running},
        {"Terminated", JobState::Terminated},
        {"Error", JobState::Error},
    }};
    return lookup(table, s);
}

std::optional<ReservationStatus> reservation_from_string(const std::string& s) {
    static const std::array<std::pair<const char*, ReservationStatus>, 3> table{{
        {"None", ReservationStatus::None},
        {"toSchedule", ReservationStatus::ToSchedule},
        {"Scheduled", ReservationStatus::Scheduled},
    }};
    return lookup(table, s);
}

std::optional<JobType> job_type_from_string(const std::string& s) {
    static const std::array<std::pair<const char*, JobType>, 2> table{{
        {"Interactive", JobType::Interactive},
        {"Passive", JobType::Passive},
    }};
    return lookup(table, s);
}

std::optional<NodeHealth> node_health_from_string(const std::string& s) {
    static const std::array<std::pair<const char*, NodeHealth>, 3> table{{
        {"Alive", NodeHealth::Alive},
        {"Suspected", NodeHealth::Suspected},
        {"Dead", NodeHealth::Dead},
    }};
    return lookup(table, s);
}

std::optional<QueuePolicy> queue_policy_from_string(const std::string& s) {
    static const std::array<std::pair<const char*, QueuePolicy>, 2> table{{
        {"fifo", QueuePolicy::Fifo},
        {"saf", QueuePolicy::Saf},
    }};
    return lookup(table, s);
}

std::string property_value_to_string(const PropertyValue& v) {
    if (std::holds_alternative<std::int64_t>(v))
        return std::to_string(std::get<std::int64_t>(v));
    if (std::holds_alternative<bool>(v))
        return std::get<bool>(v) ? "true" : "false";
    return "'" + std::get<std::string>(v) + "'";
}

const char* to_string(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

namespace {

// Total three-way compare of two property values. Returns nullopt on a
// type mismatch, which makes the enclosing atom false.
std::optional<int> compare_values(const PropertyValue& a, const PropertyValue& b) {
    if (a.index() != b.index())
        return std::nullopt;
    if (std::holds_alternative<std::int64_t>(a)) {
        auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
        return x < y ? -1 : x > y ? 1 : 0;
    }
    if (std::holds_alternative<bool>(a)) {
        int x = std::get<bool>(a), y = std::get<bool>(b);
        return x - y;
    }
    const auto& x = std::get<std::string>(a);
    const auto& y = std::get<std::string>(b);
    return x < y ? -1 : x > y ? 1 : 0;
}

bool apply_op(CmpOp op, int cmp) {
    switch (op) {
    case CmpOp::Eq: return cmp == 0;
    case CmpOp::Ne: return cmp != 0;
    case CmpOp::Lt: return cmp < 0;
    case CmpOp::Le: return cmp <= 0;
    case CmpOp::Gt: return cmp > 0;
    case CmpOp::Ge: return cmp >= 0;
    }
    return false;
}

} // namespace

bool eval_property(const PropertyExpr& expr, const Node& node) {
    for (const auto& atom : expr.atoms) {
        auto it = node.properties.find(atom.key);
        if (it == node.properties.end())
            return false;
        auto cmp = compare_values(it->second, atom.value);
        if (!cmp || !apply_op(atom.op, *cmp))
            return false;
    }
    return true;
}

std::string PropertyExpr::to_string() const {
    std::string out;
    for (const auto& atom : atoms) {
        if (!out.empty())
            out += " AND ";
        out += atom.key;
        out += ' ';
        out += bsched::to_string(atom.op);
        out += ' ';
        out += property_value_to_string(atom.value);
    }
    return out;
}

namespace {

struct Lexer {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }

    bool done() {
        skip_ws();
        return pos >= text.size();
    }

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("property expression: " + what + " at offset " +
                                    std::to_string(pos) + " in \"" + text + "\"");
    }

    std::string identifier() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (pos == start)
            fail("expected identifier");
        return text.substr(start, pos - start);
    }

    CmpOp op() {
        skip_ws();
        auto two = text.substr(pos, 2);
        if (two == "!=") { pos += 2; return CmpOp::Ne; }
        if (two == "<=") { pos += 2; return CmpOp::Le; }
        if (two == ">=") { pos += 2; return CmpOp::Ge; }
        if (two == "==") { pos += 2; return CmpOp::Eq; }
        switch (pos < text.size() ? text[pos] : '\0') {
        case '=': ++pos; return CmpOp::Eq;
        case '<': ++pos; return CmpOp::Lt;
        case '>': ++pos; return CmpOp::Gt;
        default: fail("expected comparison operator");
        }
    }

    PropertyValue value() {
        skip_ws();
        if (pos >= text.size())
            fail("expected value");
        char c = text[pos];
        if (c == '\'') {
            std::size_t end = text.find('\'', pos + 1);
            if (end == std::string::npos)
                fail("unterminated string literal");
            std::string s = text.substr(pos + 1, end - pos - 1);
            pos = end + 1;
            return s;
        }
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_' ||
                text[pos] == '-' || text[pos] == '+'))
            ++pos;
        if (pos == start)
            fail("expected value");
        std::string tok = text.substr(start, pos - start);
        if (tok == "true")
            return true;
        if (tok == "false")
            return false;
        bool numeric = !tok.empty();
        for (std::size_t i = 0; i < tok.size(); ++i) {
            char d = tok[i];
            if (i == 0 && (d == '-' || d == '+'))
                continue;
            if (!std::isdigit(static_cast<unsigned char>(d))) {
                numeric = false;
                break;
            }
        }
        if (numeric && tok != "-" && tok != "+")
            return static_cast<std::int64_t>(std::stoll(tok));
        return tok; // bare word, treated as a string
    }

    // The separator between atoms: AND (any case) or a comma.
    bool separator() {
        skip_ws();
        if (pos < text.size() && text[pos] == ',') {
            ++pos;
            return true;
        }
        if (pos + 3 <= text.size()) {
            std::string kw = text.substr(pos, 3);
            for (auto& ch : kw)
                ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            bool boundary = pos + 3 == text.size() ||
                            !std::isalnum(static_cast<unsigned char>(text[pos + 3]));
            if (kw == "AND" && boundary) {
                pos += 3;
                return true;
            }
        }
        return false;
    }
};

} // namespace

PropertyExpr PropertyExpr::parse(const std::string& text) {
    PropertyExpr expr;
    Lexer lex{text};
    if (lex.done())
        return expr;
    while (true) {
        PropertyAtom atom;
        atom.key = lex.identifier();
        atom.op = lex.op();
        atom.value = lex.value();
        expr.atoms.push_back(std::move(atom));
        if (lex.done())
            break;
        if (!lex.separator())
            lex.fail("expected AND, comma or end of expression");
    }
    return expr;
}

bool JobFilter::matches(const Job& j) const {
    if (state && j.state != *state)
        return false;
    if (queueName && j.queueName != *queueName)
        return false;
    if (user && j.user != *user)
        return false;
    if (bestEffort && j.bestEffort != *bestEffort)
        return false;
    if (submittedFrom && j.submissionTime < *submittedFrom)
        return false;
    if (submittedTo && j.submissionTime > *submittedTo)
        return false;
    return true;
}

} // namespace bsched
