#include "agora/report.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

#include "agora/util.hpp"

namespace agora {

namespace {

using nlohmann::json;

std::vector<std::string> agent_ids_from_row(const json& row) {
    std::vector<std::string> ids;
    if (row.contains("mu") && row["mu"].is_object()) {
        for (const auto& [id, value] : row["mu"].items()) ids.push_back(id);
    }
    return ids;
}

json read_report_json(const std::filesystem::path& run_dir) {
    std::ifstream in(run_dir / "report.json");
    json out;
    if (in) {
        try {
            in >> out;
        } catch (const json::exception&) {
            out = json::object();
        }
    }
    return out;
}

json read_config_json(const std::filesystem::path& run_dir) {
    std::ifstream in(run_dir / "config.json");
    json out;
    if (in) {
        try {
            in >> out;
        } catch (const json::exception&) {
            out = json::object();
        }
    }
    return out;
}

std::string active_flag(const json& config) {
    if (!config.contains("ablation")) return "";
    std::vector<std::string> set_flags;
    for (const auto& [key, value] : config["ablation"].items()) {
        if (value.is_boolean() && value.get<bool>()) set_flags.push_back(key);
    }
    if (set_flags.empty()) return "";
    std::string joined = set_flags.front();
    for (size_t i = 1; i < set_flags.size(); ++i) joined += "+" + set_flags[i];
    return joined;
}

}  // namespace

ReportArtifacts write_report(const std::filesystem::path& run_dir) {
    std::filesystem::path metrics_path = run_dir / "metrics.jsonl";
    std::ifstream in(metrics_path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("no metrics file at " + metrics_path.string());
    }

    ReportArtifacts artifacts;
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception&) {
            ++artifacts.skipped_lines;
        }
    }

    std::vector<std::string> ids;
    if (!rows.empty()) ids = agent_ids_from_row(rows.front());

    artifacts.series_csv = run_dir / "series.csv";
    {
        std::ofstream csv(artifacts.series_csv, std::ios::binary | std::ios::trunc);
        csv << "round,d,v,v_target,f,buffer_fill,challenges,accepted,gated";
        for (const std::string& id : ids) csv << ",mu_" << id;
        csv << "\n";
        csv << std::setprecision(17);
        for (const json& row : rows) {
            csv << row.value("round", 0) << ',' << row.value("d", 0.0) << ','
                << row.value("v", 0.0) << ',' << row.value("v_target", 0.0) << ','
                << row.value("f", 0.0) << ',' << row.value("buffer_fill", 0) << ','
                << row.value("challenges", 0) << ',' << row.value("accepted", 0)
                << ',' << row.value("gated", 0);
            for (const std::string& id : ids) {
                double mu = 0.0;
                if (row.contains("mu") && row["mu"].contains(id)) {
                    mu = row["mu"][id].get<double>();
                }
                csv << ',' << mu;
            }
            csv << "\n";
            ++artifacts.rows;
        }
    }

    json report = read_report_json(run_dir);
    artifacts.summary_txt = run_dir / "summary.txt";
    {
        std::ofstream out(artifacts.summary_txt,
                          std::ios::binary | std::ios::trunc);
        out << "run directory: " << run_dir.string() << "\n";
        out << "rounds: " << artifacts.rows << "\n";
        if (artifacts.skipped_lines > 0) {
            out << "corrupt metrics lines skipped: " << artifacts.skipped_lines
                << "\n";
        }
        if (!rows.empty()) {
            const json& last = rows.back();
            out << "final difficulty: " << last.value("d", 0.0) << "\n";
            out << "final pass rate: " << last.value("v", 0.0) << "\n";
            out << "final target: " << last.value("v_target", 0.0) << "\n";
            out << "buffer fill: " << last.value("buffer_fill", 0) << "\n";
        }
        // Yield observables: gated data per cycle and rounds per flush epoch.
        long gated_total = 0;
        for (const json& row : rows) gated_total += row.value("gated", 0);
        if (!rows.empty()) {
            out << "gated records per round: "
                << double(gated_total) / double(rows.size()) << "\n";
        }
        if (report.contains("dataset_epochs")) {
            int epochs = report["dataset_epochs"].get<int>();
            out << "dataset epochs: " << epochs << "\n";
            if (epochs > 0 && !rows.empty()) {
                out << "rounds per buffer fill: "
                    << double(rows.size()) / double(epochs) << "\n";
            }
        }
        if (report.contains("final_ratings")) {
            out << "final ratings (conservative order):\n";
            for (const json& r : report["final_ratings"]) {
                out << "  " << r.value("id", "?") << "  mu=" << r.value("mu", 0.0)
                    << " sigma=" << r.value("sigma", 0.0)
                    << " conservative=" << r.value("conservative", 0.0) << "\n";
            }
        }
        if (report.contains("evals") && !report["evals"].empty()) {
            out << "benchmark series:\n";
            for (const json& e : report["evals"]) {
                out << "  round " << e.value("round", 0) << ": "
                    << e.value("ensemble", 0.0) << "\n";
            }
        }
    }
    return artifacts;
}

ReportArtifacts write_comparison(const std::vector<std::filesystem::path>& runs,
                                 const std::filesystem::path& out_dir) {
    struct Row {
        std::string name;
        std::string flag;
        double score = 0.0;
        long contamination = 0;
    };
    std::vector<Row> rows;
    std::optional<size_t> baseline_idx;

    for (const auto& dir : runs) {
        json report = read_report_json(dir);
        json config = read_config_json(dir);
        Row row;
        row.name = dir.filename().string();
        row.flag = active_flag(config);
        if (report.contains("evals") && !report["evals"].empty()) {
            row.score = report["evals"].back().value("ensemble", 0.0);
        }
        row.contamination = report.value("total_contamination", 0L);
        if (row.flag.empty() && !baseline_idx) {
            baseline_idx = rows.size();
        }
        rows.push_back(std::move(row));
    }
    size_t base = baseline_idx.value_or(0);

    ReportArtifacts artifacts;
    std::filesystem::create_directories(out_dir);
    artifacts.comparison_csv = out_dir / "comparison.csv";
    std::ofstream csv(artifacts.comparison_csv,
                      std::ios::binary | std::ios::trunc);
    csv << "run,flag,final_score,delta_vs_baseline,contamination\n";
    csv << std::setprecision(17);
    for (const Row& row : rows) {
        csv << row.name << ',' << (row.flag.empty() ? "baseline" : row.flag)
            << ',' << row.score << ',' << row.score - rows[base].score << ','
            << row.contamination << "\n";
        ++artifacts.rows;
    }
    return artifacts;
}

}  // namespace agora
