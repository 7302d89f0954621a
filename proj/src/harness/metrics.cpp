#include <charconv>
#include <cmath>

#include "lcl/core/errors.hpp"
#include "lcl/core/text.hpp"
#include "lcl/harness/harness.hpp"

namespace lcl::harness {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::int64_t parse_i64(const std::string& s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("bad integer in metrics csv: " + s);
    return v;
}

double parse_f64(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("bad number in metrics csv: " + s);
    return v;
}

constexpr const char* kHeader = "task_id,phase,metric,step,value";

bool is_forward_phase(const std::string& phase) { return phase == "tune" || phase == "online"; }

}  // namespace

void MetricsTable::add(std::string task, std::string phase, std::string metric, std::int64_t step,
                       double value) {
    rows.push_back({std::move(task), std::move(phase), std::move(metric), step, value});
}

std::string MetricsTable::to_csv() const {
    std::string out = kHeader;
    out += '\n';
    for (const MetricRow& r : rows) {
        out += r.task_id;
        out += ',';
        out += r.phase;
        out += ',';
        out += r.metric;
        out += ',';
        out += std::to_string(r.step);
        out += ',';
        out += format_g17(r.value);
        out += '\n';
    }
    return out;
}

MetricsTable MetricsTable::from_csv(const std::string& text) {
    MetricsTable table;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != kHeader) throw ConfigError("metrics csv header mismatch: " + line);
            saw_header = true;
            continue;
        }
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != 5) throw ConfigError("metrics csv row needs 5 fields: " + line);
        table.rows.push_back({f[0], f[1], f[2], parse_i64(f[3]), parse_f64(f[4])});
    }
    if (!saw_header) throw ConfigError("metrics csv is empty");
    return table;
}

std::map<std::string, double> compute_forgetting(const MetricsTable& table,
                                                 const std::string& metric) {
    // last tune/online row and last final row per task for the metric
    std::map<std::string, double> forward;
    std::map<std::string, double> final_value;
    for (const MetricRow& r : table.rows) {
        if (r.metric != metric) continue;
        if (is_forward_phase(r.phase)) forward[r.task_id] = r.value;
        if (r.phase == "final") final_value[r.task_id] = r.value;
    }
    if (final_value.empty()) throw MissingPhase("no final rows for metric " + metric);
    std::map<std::string, double> ratios;
    for (const auto& [task, fin] : final_value) {
        const auto it = forward.find(task);
        if (it == forward.end())
            throw MissingPhase("no tune/online row for task " + task + " metric " + metric);
        if (it->second <= 0.0) continue;  // ratio undefined for non-positive forward value
        ratios[task] = fin / it->second;
    }
    return ratios;
}

std::pair<double, double> compute_return_success(const std::vector<EvalTrajectory>& trajectories) {
    if (trajectories.empty()) throw EmptyBatch("no evaluation trajectories");
    double sum_return = 0.0;
    double successes = 0.0;
    for (const EvalTrajectory& tr : trajectories) {
        double ret = 0.0;
        for (std::size_t i = 0; i < tr.rewards.size(); ++i) ret += tr.rewards[i];
        sum_return += ret;
        bool any = false;
        for (std::uint8_t s : tr.success) any = any || s != 0;
        successes += any ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(trajectories.size());
    return {sum_return / n, successes / n};
}

namespace {

struct Accumulator {
    std::size_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void put(double v) {
        n += 1;
        sum += v;
        sum_sq += v * v;
    }
    double mean() const { return sum / static_cast<double>(n); }
    double stderr_mean() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return std::sqrt(std::max(0.0, var) / static_cast<double>(n));
    }
};

}  // namespace

std::string aggregate_report(const std::vector<std::string>& metrics_csvs) {
    if (metrics_csvs.empty()) throw EmptyBatch("no metrics files to aggregate");
    // first-appearance key order keeps the report deterministic across runs
    std::vector<std::string> order;
    std::map<std::string, Accumulator> acc;
    std::map<std::string, MetricRow> key_row;
    for (const std::string& text : metrics_csvs) {
        const MetricsTable table = MetricsTable::from_csv(text);
        for (const MetricRow& r : table.rows) {
            const std::string key =
                r.task_id + '\n' + r.phase + '\n' + r.metric + '\n' + std::to_string(r.step);
            auto it = acc.find(key);
            if (it == acc.end()) {
                order.push_back(key);
                key_row[key] = r;
                it = acc.emplace(key, Accumulator{}).first;
            }
            it->second.put(r.value);
        }
    }
    std::string out = "task_id,phase,metric,step,mean,stderr,n\n";
    for (const std::string& key : order) {
        const MetricRow& r = key_row[key];
        const Accumulator& a = acc[key];
        out += r.task_id;
        out += ',';
        out += r.phase;
        out += ',';
        out += r.metric;
        out += ',';
        out += std::to_string(r.step);
        out += ',';
        out += format_g17(a.mean());
        out += ',';
        out += format_g17(a.stderr_mean());
        out += ',';
        out += std::to_string(a.n);
        out += '\n';
    }
    return out;
}

std::string forgetting_report(const std::vector<std::string>& metrics_csvs,
                              const std::string& metric) {
    if (metrics_csvs.empty()) throw EmptyBatch("no metrics files to aggregate");
    std::vector<std::string> order;
    std::map<std::string, Accumulator> acc;
    for (const std::string& text : metrics_csvs) {
        const MetricsTable table = MetricsTable::from_csv(text);
        for (const auto& [task, ratio] : compute_forgetting(table, metric)) {
            auto it = acc.find(task);
            if (it == acc.end()) {
                order.push_back(task);
                it = acc.emplace(task, Accumulator{}).first;
            }
            it->second.put(ratio);
        }
    }
    std::string out = "task_id,forgetting_mean,forgetting_stderr,n\n";
    for (const std::string& task : order) {
        const Accumulator& a = acc[task];
        out += task;
        out += ',';
        out += format_g17(a.mean());
        out += ',';
        out += format_g17(a.stderr_mean());
        out += ',';
        out += std::to_string(a.n);
        out += '\n';
    }
    return out;
}

}  // namespace lcl::harness
