#pragma once

#include <filesystem>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace agora {

// Append-only line-delimited protocol event log. Events must contain no
// wall-clock data: a fixed seed has to reproduce the file byte for byte.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path, bool resume = false);

    void append(const nlohmann::json& event);
    void flush();

    uint64_t offset() const { return offset_; }
    const std::filesystem::path& path() const { return path_; }

    // Resume support: drop everything written after a checkpoint.
    void truncate_to(uint64_t offset);

    static std::vector<nlohmann::json> read_all(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::ofstream out_;
    uint64_t offset_ = 0;
};

// JSONL helpers shared by the problem-file loaders and metrics readers.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace agora
