#include <algorithm>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "agora/config.hpp"
#include "agora/orchestrator.hpp"
#include "agora/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitEval = 4;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string outdir;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config_path, "Config file (JSON)");
    cmd->add_option("--set", opts.overrides,
                    "Override a config key, e.g. --set run.rounds=50");
    cmd->add_option("-o,--outdir", opts.outdir, "Run output directory");
    cmd->add_flag("--resume", opts.resume,
                  "Resume from the latest checkpoint in the run directory");
}

std::string timestamp_dir(const std::string& prefix) {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&now));
    return "runs/" + prefix + "-" + buf;
}

agora::RunConfig load_config(const CommonOptions& opts) {
    std::string path = opts.config_path;
    if (opts.resume && path.empty() && !opts.outdir.empty()) {
        path = (std::filesystem::path(opts.outdir) / "config.json").string();
    }
    return agora::parse_config(path, opts.overrides);
}

void print_report(const agora::RunReport& report) {
    std::cout << "rounds completed: " << report.rounds_completed
              << (report.halted ? " (halted)" : "") << "\n";
    if (!report.evals.empty()) {
        std::cout << "benchmark: baseline " << report.evals.front().ensemble
                  << " -> final " << report.evals.back().ensemble << "\n";
    }
    std::cout << "dataset epochs: " << report.dataset_epochs
              << ", gated records: " << report.total_gated << "\n";
    std::cout << "final ratings (conservative order):\n";
    for (const auto& [id, rating] : report.final_ratings) {
        std::cout << "  " << id << "  mu=" << rating.mu
                  << " sigma=" << rating.sigma << "\n";
    }
}

int run_engine(const CommonOptions& opts, agora::Orchestrator::Mode mode,
               bool simulated_only, const std::string& prefix) {
    agora::RunConfig config = load_config(opts);
    config.require_ensemble(simulated_only);
    if (mode == agora::Orchestrator::Mode::Isolated) {
        config.require_isolated_pool();
    }
    std::filesystem::path outdir =
        opts.outdir.empty() ? timestamp_dir(prefix) : opts.outdir;
    agora::Orchestrator engine(std::move(config), outdir, mode, opts.resume);
    agora::RunReport report = engine.run_experiment();
    std::cout << "run directory: " << outdir.string() << "\n";
    print_report(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agora: self-evolving ensemble orchestration engine"};
    app.require_subcommand(1);

    CommonOptions sim_opts;
    CLI::App* simulate =
        app.add_subcommand("simulate", "Closed-loop run on simulated agents");
    add_common(simulate, sim_opts);

    CommonOptions run_opts;
    CLI::App* run =
        app.add_subcommand("run", "Closed-loop run with remote backends");
    add_common(run, run_opts);

    CommonOptions eval_opts;
    CLI::App* eval =
        app.add_subcommand("eval", "Benchmark scoring only (no evolution)");
    add_common(eval, eval_opts);

    CommonOptions iso_opts;
    CLI::App* isolated = app.add_subcommand(
        "isolated", "Isolated self-consistency evolution baseline");
    add_common(isolated, iso_opts);

    CommonOptions ablate_opts;
    std::string ablate_flags = "all";
    CLI::App* ablate =
        app.add_subcommand("ablate", "Run the single-flag ablation matrix");
    add_common(ablate, ablate_opts);
    ablate->add_option("--flags", ablate_flags,
                       "Comma-separated flag names, or 'all'");

    CommonOptions export_opts;
    std::string export_out;
    CLI::App* export_cmd = app.add_subcommand(
        "export", "Export the current buffer of a checkpointed run");
    export_cmd->add_option("--from", export_opts.outdir, "Run directory")
        ->required();
    export_cmd->add_option("--out", export_out, "Destination directory");

    std::vector<std::string> report_dirs;
    CLI::App* report_cmd =
        app.add_subcommand("report", "Summarize run metrics into CSV/text");
    report_cmd->add_option("dirs", report_dirs, "Run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            return run_engine(sim_opts, agora::Orchestrator::Mode::Collaborative,
                              /*simulated_only=*/true, "simulate");
        }
        if (run->parsed()) {
            return run_engine(run_opts, agora::Orchestrator::Mode::Collaborative,
                              /*simulated_only=*/false, "run");
        }
        if (isolated->parsed()) {
            return run_engine(iso_opts, agora::Orchestrator::Mode::Isolated,
                              /*simulated_only=*/false, "isolated");
        }
        if (eval->parsed()) {
            agora::RunConfig config = load_config(eval_opts);
            config.require_ensemble(false);
            if (config.eval.path.empty()) {
                std::cerr << "eval: config error: eval.path is required\n";
                return kExitEval;
            }
            config.run.rounds = 0;  // baseline eval only
            std::filesystem::path outdir = eval_opts.outdir.empty()
                                               ? timestamp_dir("eval")
                                               : eval_opts.outdir;
            agora::Orchestrator engine(std::move(config), outdir);
            agora::RunReport report = engine.run_experiment();
            if (report.evals.empty()) {
                std::cerr << "eval: no benchmark results produced\n";
                return kExitEval;
            }
            std::cout << "benchmark score: " << report.evals.back().ensemble
                      << "\n";
            return kExitOk;
        }
        if (ablate->parsed()) {
            static const std::vector<std::string> kAllFlags = {
                "without_valid_vote",     "without_parametric",
                "without_quality_vote",   "without_elite_icl",
                "without_random_qgen",    "without_difficulty_control",
                "without_external_anchor", "without_explanation",
                "without_dynamic_strategy", "without_fem"};
            std::vector<std::string> flags;
            if (ablate_flags == "all") {
                flags = kAllFlags;
            } else {
                std::istringstream parts(ablate_flags);
                std::string part;
                while (std::getline(parts, part, ',')) {
                    if (std::find(kAllFlags.begin(), kAllFlags.end(), part) ==
                        kAllFlags.end()) {
                        throw agora::ConfigError("unknown ablation flag '" +
                                                 part + "'");
                    }
                    flags.push_back(part);
                }
            }
            std::filesystem::path outdir = ablate_opts.outdir.empty()
                                               ? timestamp_dir("ablate")
                                               : ablate_opts.outdir;
            std::vector<std::filesystem::path> run_dirs;

            agora::RunConfig baseline = load_config(ablate_opts);
            baseline.require_ensemble(false);
            {
                agora::Orchestrator engine(baseline, outdir / "baseline");
                engine.run_experiment();
                run_dirs.push_back(outdir / "baseline");
            }
            for (const std::string& flag : flags) {
                CommonOptions flagged = ablate_opts;
                flagged.overrides.push_back("ablation." + flag + "=true");
                agora::RunConfig config = load_config(flagged);
                config.require_ensemble(false);
                agora::Orchestrator engine(config, outdir / flag);
                engine.run_experiment();
                run_dirs.push_back(outdir / flag);
                std::cout << "completed ablation: " << flag << "\n";
            }
            agora::ReportArtifacts artifacts =
                agora::write_comparison(run_dirs, outdir);
            std::cout << "delta table: " << artifacts.comparison_csv.string()
                      << "\n";
            return kExitOk;
        }
        if (export_cmd->parsed()) {
            CommonOptions opts = export_opts;
            opts.resume = true;
            agora::RunConfig config = load_config(opts);
            agora::Orchestrator engine(std::move(config), opts.outdir,
                                       agora::Orchestrator::Mode::Collaborative,
                                       /*resume=*/true);
            if (engine.buffer().size() == 0) {
                std::cerr << "export: buffer is empty\n";
                return kExitRuntime;
            }
            agora::FlushEvent snapshot;
            snapshot.epoch = engine.buffer().epoch() + 1;
            snapshot.entries = engine.buffer().entries();
            std::filesystem::path dest =
                export_out.empty()
                    ? std::filesystem::path(opts.outdir) / "datasets" / "manual"
                    : std::filesystem::path(export_out);
            agora::DatasetFile dataset = agora::sft_export(
                snapshot, dest, engine.config().trainer.lora);
            std::cout << "exported " << dataset.count << " records to "
                      << dataset.path.string() << " (digest " << dataset.digest
                      << ")\n";
            return kExitOk;
        }
        if (report_cmd->parsed()) {
            if (report_dirs.size() == 1) {
                agora::ReportArtifacts artifacts =
                    agora::write_report(report_dirs.front());
                std::cout << "series: " << artifacts.series_csv.string() << " ("
                          << artifacts.rows << " rows";
                if (artifacts.skipped_lines > 0) {
                    std::cout << ", " << artifacts.skipped_lines
                              << " corrupt lines skipped";
                }
                std::cout << ")\nsummary: " << artifacts.summary_txt.string()
                          << "\n";
            } else {
                std::vector<std::filesystem::path> dirs(report_dirs.begin(),
                                                        report_dirs.end());
                for (const auto& dir : dirs) {
                    agora::write_report(dir);
                }
                agora::ReportArtifacts artifacts =
                    agora::write_comparison(dirs, dirs.front().parent_path());
                std::cout << "delta table: " << artifacts.comparison_csv.string()
                          << "\n";
            }
            return kExitOk;
        }
    } catch (const agora::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
