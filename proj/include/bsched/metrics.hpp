#pragma once

#include "bsched/store.hpp"
#include "bsched/types.hpp"

#include <limits>
#include <string>
#include <vector>

// Run metrics: jobmix work, elapsed time, efficiency against the no-idle
// lower bound, per-job response times and the processors-in-use series.

namespace bsched {

struct MetricsReport {
    long long jobmixWork = 0;     // W, CPU-seconds
    int availableProcessors = 0;  // P
    Seconds elapsedTime = 0;      // T = max stopTime - min submissionTime
    // E = W / (P*T); NaN (rendered "n/a") until a run defines it
    double efficiency = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<JobId, Seconds>> responseTimes; // stop - submit
    double meanResponseTime = 0.0;
    std::size_t jobCount = 0;
    std::size_t terminatedCount = 0;
    std::size_t errorCount = 0;
    // Step series of processors in use, one point per change instant.
    std::vector<std::pair<Timestamp, int>> utilization;
};

// E = W / (P*T); the lower bound on elapsed time is T_lower = W / P.
double efficiency(long long work, int processors, Seconds elapsed);
double lower_bound_time(long long work, int processors);

// Processors-in-use step function over the started jobs; ends with a zero
// point after the last stop.
std::vector<std::pair<Timestamp, int>> utilization_series(const std::vector<Job>& jobs);

// Integral of the step series, in CPU-seconds.
long long utilization_integral(const std::vector<std::pair<Timestamp, int>>& series);

MetricsReport compute_metrics(const Store& store, int availableProcessors);

// Table-shaped summary.
std::string render_report(const MetricsReport& report);

// Two tab-separated columns with a "time\tbusy_procs" header line.
void write_plot_data(const MetricsReport& report, const std::string& path);

} // namespace bsched
