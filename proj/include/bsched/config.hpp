#pragma once

#include "bsched/kernel.hpp"

#include <string>
#include <vector>

// Engine configuration file: human-readable key/value lines, a queue table,
// optional cluster nodes and optional admission rules. '#' starts a
// comment. Environment variables BSCHED_SCHEDULING_PERIOD,
// BSCHED_MONITORING_PERIOD, BSCHED_HEALTH_CHECK and BSCHED_PROBE_TIMEOUT
// override the file.

namespace bsched {

struct EngineConfig {
    KernelConfig kernel;
    std::vector<Node> nodes; // optional cluster description
};

// Throws std::runtime_error with a line diagnostic on a malformed file.
EngineConfig parse_config_text(const std::string& text);
EngineConfig load_config(const std::string& path);

void apply_env_overrides(KernelConfig& config);

// The built-in configuration: default + besteffort queues, shipped
// admission defaults, no nodes.
EngineConfig default_config();

} // namespace bsched
