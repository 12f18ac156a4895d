#pragma once

#include "elastic/config.hpp"
#include "elastic/metrics.hpp"
#include "elastic/sim.hpp"

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace elastic {

/// Exit statuses of the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct SummaryRow {
    std::string section;
    std::string phase;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    std::string policy;
    SegmentStats stats;
    double regret_slope = 0.0;
};

/// Per phase and policy means, skipping phases with no frames.
std::vector<SummaryRow> summary_rows(const ExperimentResult& result);

void write_summary_text(std::ostream& out, const std::string& title, const std::vector<SummaryRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// File-name-safe form of a section label ("10M->3M" -> "10M-3M").
std::string file_stem(const std::string& label);

/// Predictor snapshot per section: gamma, samples M, design Q and response p.
void write_checkpoint(const std::string& path, const ExperimentResult& result);
std::vector<std::pair<std::string, RidgePredictor>> read_checkpoint(const std::string& path);

struct RunArtifacts {
    std::vector<std::string> files;
    ExperimentResult result; // sim mode only
};

/// Sim mode: all four policies on every section. Live mode: the elastic
/// policy driving the press node against a release node. Writes CSVs,
/// summary.txt, summary.csv and (sim) checkpoint.json under cfg.out.
RunArtifacts run_experiment_config(const ExperimentConfig& cfg, std::ostream& log);

enum class Segmentation { window, whole, bounds };

/// Summarizes a metrics CSV. `bounds` are interior frame boundaries for
/// Segmentation::bounds. Writes aligned text to `text` and a table to `table_path`.
void summarize_csv(const std::string& csv_path, Segmentation mode, const std::vector<std::uint64_t>& bounds,
                   std::ostream& text, const std::string& table_path);

/// Serves the configured pipeline until `stop` becomes true.
void run_release(const ExperimentConfig& cfg, const Endpoint& listen, const std::atomic<bool>& stop, std::ostream& log);

} // namespace elastic
