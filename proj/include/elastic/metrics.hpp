#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace elastic {

/// First line of every metrics CSV; the summarizer refuses other versions.
inline constexpr const char* kMetricsSchemaLine = "# elastic-metrics v1";

inline const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols = {
        "frame_id", "t",         "split_index", "forced",    "sigma",     "predicted_e",       "observed_e",
        "latency",  "cpu_rel",   "power_rel",   "bandwidth", "cumulative_regret", "update_window"};
    return cols;
}

struct MetricsRow {
    std::uint64_t frame_id = 0;
    std::uint64_t t = 0;
    std::size_t split_index = 0;
    bool forced = false;
    double sigma = 0.0;
    std::optional<double> predicted_e;
    std::optional<double> observed_e;
    double latency = 0.0;
    double cpu_rel = 0.0;
    double power_rel = 0.0;
    double bandwidth = 0.0;
    std::optional<double> cumulative_regret;
    bool update_window = false;
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

/// Parses a metrics CSV. Throws SchemaError on version or column mismatch.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Half-open frame range [begin, end) with a label.
struct Segment {
    std::string label;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
};

struct SegmentStats {
    std::string label;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    std::size_t frames = 0;
    double mean_latency = 0.0;
    double mean_cpu = 0.0;
    double mean_power = 0.0;
    std::size_t modal_split = 0;
    std::optional<double> final_regret;
};

/// Aggregates rows whose frame_id falls in each segment.
std::vector<SegmentStats> summarize_rows(const std::vector<MetricsRow>& rows, const std::vector<Segment>& segments);

/// Segments split where the update_window column changes value.
std::vector<Segment> segments_by_window(const std::vector<MetricsRow>& rows);

/// Least-squares slope of log(cumulative) against log(t) for t in [T/10, T].
/// Non-positive values are skipped; returns 0 when fewer than two points remain.
double loglog_slope(const std::vector<double>& cumulative);

} // namespace elastic
