#include "bsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bsched {

double efficiency(long long work, int processors, Seconds elapsed) {
    if (work <= 0 || processors <= 0 || elapsed <= 0)
        return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(work) /
           (static_cast<double>(processors) * static_cast<double>(elapsed));
}

double lower_bound_time(long long work, int processors) {
    if (processors <= 0)
        return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(work) / static_cast<double>(processors);
}

std::vector<std::pair<Timestamp, int>> utilization_series(const std::vector<Job>& jobs) {
    std::map<Timestamp, int> deltas;
    for (const auto& job : jobs) {
        if (!job.startTime || !job.stopTime || *job.stopTime <= *job.startTime)
            continue;
        deltas[*job.startTime] += job.procs();
        deltas[*job.stopTime] -= job.procs();
    }
    std::vector<std::pair<Timestamp, int>> series;
    int busy = 0;
    for (const auto& [t, delta] : deltas) {
        busy += delta;
        if (!series.empty() && series.back().first == t)
            series.back().second = busy;
        else
            series.emplace_back(t, busy);
    }
    return series;
}

long long utilization_integral(const std::vector<std::pair<Timestamp, int>>& series) {
    long long total = 0;
    for (std::size_t i = 0; i + 1 < series.size(); ++i)
        total += static_cast<long long>(series[i].second) *
                 (series[i + 1].first - series[i].first);
    return total;
}

MetricsReport compute_metrics(const Store& store, int availableProcessors) {
    MetricsReport report;
    report.availableProcessors = availableProcessors;
    auto jobs = store.query_jobs({});
    report.jobCount = jobs.size();

    Timestamp minSubmit = std::numeric_limits<Timestamp>::max();
    Timestamp maxStop = std::numeric_limits<Timestamp>::min();
    double responseSum = 0.0;
    for (const auto& job : jobs) {
        if (job.state == JobState::Terminated)
            ++report.terminatedCount;
        else if (job.state == JobState::Error)
            ++report.errorCount;
        if (job.actualDuration)
            report.jobmixWork += static_cast<long long>(job.procs()) * *job.actualDuration;
        else if (job.startTime && job.stopTime)
            report.jobmixWork +=
                static_cast<long long>(job.procs()) * (*job.stopTime - *job.startTime);
        minSubmit = std::min(minSubmit, job.submissionTime);
        if (job.stopTime) {
            maxStop = std::max(maxStop, *job.stopTime);
            Seconds response = *job.stopTime - job.submissionTime;
            report.responseTimes.emplace_back(job.idJob, response);
            responseSum += static_cast<double>(response);
        }
    }
    if (!report.responseTimes.empty()) {
        report.elapsedTime = maxStop - minSubmit;
        report.meanResponseTime = responseSum / static_cast<double>(report.responseTimes.size());
    }
    report.efficiency =
        efficiency(report.jobmixWork, availableProcessors, report.elapsedTime);
    report.utilization = utilization_series(jobs);
    return report;
}

std::string render_report(const MetricsReport& report) {
    std::ostringstream out;
    char eff[32];
    if (std::isnan(report.efficiency))
        std::snprintf(eff, sizeof eff, "n/a");
    else
        std::snprintf(eff, sizeof eff, "%.4f", report.efficiency);
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.2f", report.meanResponseTime);
    out << "Available Processors   " << report.availableProcessors << "\n"
        << "Jobmix work (CPU-sec)  " << report.jobmixWork << "\n"
        << "Elapsed Time           " << report.elapsedTime << "\n"
        << "Efficiency             " << eff << "\n"
        << "Jobs                   " << report.jobCount << " ("
        << report.terminatedCount << " terminated, " << report.errorCount
        << " error)\n"
        << "Mean response time     " << mean << "\n";
    return out.str();
}

void write_plot_data(const MetricsReport& report, const std::string& path) {
    std::ofstream file(path, std::ios::trunc);
    if (!file)
        throw std::runtime_error("cannot write plot data file " + path);
    file << "time\tbusy_procs\n";
    for (const auto& [t, busy] : report.utilization)
        file << t << '\t' << busy << '\n';
}

} // namespace bsched
