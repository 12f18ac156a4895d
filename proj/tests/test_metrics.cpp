#include "elastic/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace elastic;

namespace {

std::vector<MetricsRow> sample_rows() {
    std::vector<MetricsRow> rows;
    for (std::uint64_t f = 0; f < 6; ++f) {
        MetricsRow r;
        r.frame_id = f;
        r.t = f + 1;
        r.split_index = f % 3;
        r.forced = f == 2;
        r.sigma = f % 2 ? 0.8 : 0.2;
        if (r.split_index != 2) {
            r.predicted_e = 0.1 * static_cast<double>(f);
            r.observed_e = 1.0 / 3.0;
        }
        r.latency = 1.5 + static_cast<double>(f);
        r.cpu_rel = 0.25;
        r.power_rel = 1000.0 + static_cast<double>(f);
        r.bandwidth = 1e6;
        r.cumulative_regret = 0.5 * static_cast<double>(f);
        r.update_window = f < 2;
        rows.push_back(r);
    }
    return rows;
}

} // namespace

TEST_CASE("csv roundtrip keeps every field") {
    const auto rows = sample_rows();
    std::stringstream ss;
    write_metrics_csv(ss, rows);
    const auto back = read_metrics_csv(ss);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].frame_id == rows[i].frame_id);
        CHECK(back[i].split_index == rows[i].split_index);
        CHECK(back[i].forced == rows[i].forced);
        CHECK(back[i].predicted_e.has_value() == rows[i].predicted_e.has_value());
        if (rows[i].observed_e) CHECK(*back[i].observed_e == doctest::Approx(*rows[i].observed_e).epsilon(1e-8));
        CHECK(back[i].latency == rows[i].latency);
        CHECK(back[i].update_window == rows[i].update_window);
    }
}

TEST_CASE("header and version are checked") {
    std::stringstream ss;
    write_metrics_csv(ss, sample_rows());
    const std::string text = ss.str();
    CHECK(text.rfind(std::string(kMetricsSchemaLine) + "\nframe_id,t,split_index,forced,sigma,predicted_e,observed_e,"
                                                      "latency,cpu_rel,power_rel,bandwidth,cumulative_regret,update_window\n",
                     0) == 0);

    std::stringstream wrong_version("# elastic-metrics v0\n" + text.substr(text.find('\n') + 1));
    CHECK_THROWS_AS(read_metrics_csv(wrong_version), SchemaError);

    std::string swapped = text;
    swapped.replace(swapped.find("latency"), 7, "latencx");
    std::stringstream bad(swapped);
    CHECK_THROWS_WITH_AS(read_metrics_csv(bad), doctest::Contains("column 7: expected 'latency', found 'latencx'"),
                         SchemaError);

    const std::size_t header_end = text.find('\n', text.find('\n') + 1) + 1;
    std::stringstream short_row(text.substr(0, header_end) + "1,2,3\n");
    CHECK_THROWS_WITH_AS(read_metrics_csv(short_row), doctest::Contains("expected 13 columns"), SchemaError);
}

TEST_CASE("segment statistics") {
    const auto rows = sample_rows();
    const auto st = summarize_rows(rows, {Segment{"a", 0, 2}, Segment{"b", 2, 6}, Segment{"none", 10, 20}});
    REQUIRE(st.size() == 3);
    CHECK(st[0].frames == 2);
    CHECK(st[0].mean_latency == doctest::Approx(2.0));
    CHECK(st[1].mean_latency == doctest::Approx((3.5 + 4.5 + 5.5 + 6.5) / 4));
    CHECK(*st[1].final_regret == doctest::Approx(2.5));
    CHECK(st[2].frames == 0);

    const auto w = segments_by_window(rows);
    REQUIRE(w.size() == 2);
    CHECK(w[0].label == "update-1");
    CHECK(w[0].end == 2);
    CHECK(w[1].label == "steady-1");
    CHECK(w[1].begin == 2);
    CHECK(w[1].end == 6);
}

TEST_CASE("log-log slope recovers power laws") {
    for (double k : {0.5, 0.75, 1.0}) {
        std::vector<double> c;
        for (int t = 1; t <= 10000; ++t) c.push_back(3.0 * std::pow(t, k));
        CHECK(loglog_slope(c) == doctest::Approx(k).epsilon(1e-9));
    }
    std::vector<double> linear;
    for (int t = 1; t <= 1000; ++t) linear.push_back(0.7 * t);
    CHECK(loglog_slope(linear) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(loglog_slope(std::vector<double>(100, 0.0)) == 0.0);
}
