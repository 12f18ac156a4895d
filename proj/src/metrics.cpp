#include "elastic/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace elastic {

namespace {

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.9g}", *v) : std::string{}; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no, const char* column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError(fmt::format("line {}: column '{}' is not a number: '{}'", line_no, column, s));
    }
}

std::uint64_t parse_u64(const std::string& s, std::size_t line_no, const char* column) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw SchemaError(fmt::format("line {}: column '{}' is not an unsigned integer: '{}'", line_no, column, s));
    return v;
}

std::optional<double> parse_opt(const std::string& s, std::size_t line_no, const char* column) {
    if (s.empty()) return std::nullopt;
    return parse_double(s, line_no, column);
}

} // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kMetricsSchemaLine << '\n';
    const auto& cols = metrics_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{:.9g},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{},{}\n", r.frame_id, r.t,
                           r.split_index, r.forced ? 1 : 0, r.sigma, fmt_opt(r.predicted_e), fmt_opt(r.observed_e),
                           r.latency, r.cpu_rel, r.power_rel, r.bandwidth, fmt_opt(r.cumulative_regret),
                           r.update_window ? 1 : 0);
    }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
    write_metrics_csv(out, rows);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsSchemaLine)
        throw SchemaError(fmt::format("unsupported metrics schema: expected '{}', found '{}'", kMetricsSchemaLine, line));
    if (!std::getline(in, line)) throw SchemaError("missing header row");

    const auto& cols = metrics_columns();
    const auto header = split_csv_line(line);
    if (header != cols) {
        std::string diag;
        for (std::size_t i = 0; i < std::max(header.size(), cols.size()); ++i) {
            const std::string got = i < header.size() ? header[i] : "<missing>";
            const std::string want = i < cols.size() ? cols[i] : "<none>";
            if (got != want) diag += fmt::format(" column {}: expected '{}', found '{}';", i, want, got);
        }
        throw SchemaError("metrics header mismatch:" + diag);
    }

    std::vector<MetricsRow> rows;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != cols.size())
            throw SchemaError(fmt::format("line {}: expected {} columns, found {}", line_no, cols.size(), c.size()));
        MetricsRow r;
        r.frame_id = parse_u64(c[0], line_no, "frame_id");
        r.t = parse_u64(c[1], line_no, "t");
        r.split_index = parse_u64(c[2], line_no, "split_index");
        r.forced = parse_u64(c[3], line_no, "forced") != 0;
        r.sigma = parse_double(c[4], line_no, "sigma");
        r.predicted_e = parse_opt(c[5], line_no, "predicted_e");
        r.observed_e = parse_opt(c[6], line_no, "observed_e");
        r.latency = parse_double(c[7], line_no, "latency");
        r.cpu_rel = parse_double(c[8], line_no, "cpu_rel");
        r.power_rel = parse_double(c[9], line_no, "power_rel");
        r.bandwidth = parse_double(c[10], line_no, "bandwidth");
        r.cumulative_regret = parse_opt(c[11], line_no, "cumulative_regret");
        r.update_window = parse_u64(c[12], line_no, "update_window") != 0;
        rows.push_back(r);
    }
    return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
    return read_metrics_csv(in);
}

std::vector<SegmentStats> summarize_rows(const std::vector<MetricsRow>& rows, const std::vector<Segment>& segments) {
    std::vector<SegmentStats> out;
    for (const auto& seg : segments) {
        SegmentStats st;
        st.label = seg.label;
        st.begin = seg.begin;
        st.end = seg.end;
        std::vector<std::size_t> split_counts;
        for (const auto& r : rows) {
            if (r.frame_id < seg.begin || r.frame_id >= seg.end) continue;
            ++st.frames;
            st.mean_latency += r.latency;
            st.mean_cpu += r.cpu_rel;
            st.mean_power += r.power_rel;
            if (split_counts.size() <= r.split_index) split_counts.resize(r.split_index + 1, 0);
            ++split_counts[r.split_index];
            if (r.cumulative_regret) st.final_regret = r.cumulative_regret;
        }
        if (st.frames > 0) {
            const double n = static_cast<double>(st.frames);
            st.mean_latency /= n;
            st.mean_cpu /= n;
            st.mean_power /= n;
            st.modal_split = static_cast<std::size_t>(
                std::max_element(split_counts.begin(), split_counts.end()) - split_counts.begin());
        }
        out.push_back(st);
    }
    return out;
}

std::vector<Segment> segments_by_window(const std::vector<MetricsRow>& rows) {
    std::vector<Segment> out;
    if (rows.empty()) return out;
    std::size_t updates = 0, steady = 0;
    auto label_for = [&](bool window) {
        return window ? fmt::format("update-{}", ++updates) : fmt::format("steady-{}", ++steady);
    };
    Segment cur{label_for(rows.front().update_window), rows.front().frame_id, rows.front().frame_id + 1};
    bool state = rows.front().update_window;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].update_window != state) {
            out.push_back(cur);
            state = rows[i].update_window;
            cur = Segment{label_for(state), rows[i].frame_id, rows[i].frame_id + 1};
        } else {
            cur.end = rows[i].frame_id + 1;
        }
    }
    out.push_back(cur);
    return out;
}

double loglog_slope(const std::vector<double>& cumulative) {
    const std::size_t horizon = cumulative.size();
    if (horizon < 2) return 0.0;
    const std::size_t first = std::max<std::size_t>(1, horizon / 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t t = first; t <= horizon; ++t) {
        const double r = cumulative[t - 1];
        if (!(r > 0.0)) continue;
        const double x = std::log(static_cast<double>(t));
        const double y = std::log(r);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double denom = nn * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (nn * sxy - sx * sy) / denom;
}

} // namespace elastic
