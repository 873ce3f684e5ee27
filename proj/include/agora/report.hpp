#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace agora {

struct ReportArtifacts {
    std::filesystem::path series_csv;
    std::filesystem::path summary_txt;
    std::filesystem::path comparison_csv;  // only for multi-run reports
    int rows = 0;
    int skipped_lines = 0;
};

// Turn one run directory's metrics into a CSV series plus a text summary.
// Corrupt metrics lines are skipped and counted.
ReportArtifacts write_report(const std::filesystem::path& run_dir);

// Multi-run comparison (ablation deltas). The baseline is the run with no
// ablation flag set, or the first directory when none qualifies.
ReportArtifacts write_comparison(const std::vector<std::filesystem::path>& runs,
                                 const std::filesystem::path& out_dir);

}  // namespace agora
