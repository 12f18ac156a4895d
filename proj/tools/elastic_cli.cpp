// elastic: run offloading experiments, summarize metrics, serve release nodes.

#include "elastic/config.hpp"
#include "elastic/harness.hpp"
#include "elastic/scenarios.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

elastic::ExperimentConfig resolve(const std::optional<std::string>& config, const elastic::ConfigOverrides& ov) {
    if (config) return elastic::load_config(*config, ov);
    if (!ov.preset) throw elastic::ConfigError("either --config or --preset is required");
    auto cfg = elastic::preset_config(*ov.preset, ov.seed.value_or(1));
    if (ov.out) cfg.out = *ov.out;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Elastic computation offloading: experiments, summaries and release nodes"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    elastic::ConfigOverrides ov;

    auto* run = app.add_subcommand("run", "run a sim or live experiment");
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--preset", ov.preset, "scenario preset")
        ->check(CLI::IsMember(elastic::preset_names()));
    run->add_option("--seed", ov.seed, "seed (overrides the config)");
    run->add_option("--out", ov.out, "output directory (overrides the config)");

    std::string csv_path;
    std::string segmentation = "window";
    std::vector<std::uint64_t> bounds;
    std::string table_path;
    auto* summarize = app.add_subcommand("summarize", "summarize a metrics CSV");
    summarize->add_option("csv", csv_path, "metrics CSV")->required()->check(CLI::ExistingFile);
    summarize->add_option("--segments", segmentation, "window | whole | bounds")
        ->check(CLI::IsMember({"window", "whole", "bounds"}));
    summarize->add_option("--bounds", bounds, "interior frame boundaries for --segments bounds")->delimiter(',');
    summarize->add_option("--table", table_path, "machine-readable summary output (default <csv>.summary.csv)");

    std::optional<std::string> listen;
    std::optional<std::string> pipeline_cfg;
    auto* release = app.add_subcommand("release", "serve a release node");
    release->add_option("--listen", listen, "host:port (else the config, else $ELASTIC_RELEASE_LISTEN)");
    release->add_option("--pipeline", pipeline_cfg, "config file holding the pipeline")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? elastic::kExitOk : elastic::kExitConfig;
    }

    try {
        if (*run) {
            const auto cfg = resolve(config_path, ov);
            const auto art = elastic::run_experiment_config(cfg, std::cerr);
            for (const auto& f : art.files) std::cout << f << '\n';
        } else if (*summarize) {
            const auto mode = segmentation == "window"  ? elastic::Segmentation::window
                              : segmentation == "whole" ? elastic::Segmentation::whole
                                                        : elastic::Segmentation::bounds;
            if (mode == elastic::Segmentation::bounds && bounds.empty())
                throw elastic::ConfigError("--segments bounds needs --bounds");
            elastic::summarize_csv(csv_path, mode, bounds, std::cout,
                                   table_path.empty() ? csv_path + ".summary.csv" : table_path);
        } else if (*release) {
            auto cfg = elastic::load_config(*pipeline_cfg);
            const auto ep = elastic::resolve_listen(listen ? listen : cfg.listen, std::getenv("ELASTIC_RELEASE_LISTEN"));
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            elastic::run_release(cfg, ep, g_stop, std::cerr);
        }
    } catch (const elastic::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return elastic::kExitConfig;
    } catch (const elastic::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return elastic::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return elastic::kExitRuntime;
    }
    return elastic::kExitOk;
}
