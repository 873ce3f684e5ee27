#include "agora/event_log.hpp"

#include <stdexcept>

#include "agora/util.hpp"

namespace agora {

EventLog::EventLog(std::filesystem::path path, bool resume)
    : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    auto mode = std::ios::binary | (resume ? std::ios::app : std::ios::trunc);
    out_.open(path_, mode);
    if (!out_) {
        throw std::runtime_error("EventLog: cannot open " + path_.string());
    }
    offset_ = resume ? std::filesystem::file_size(path_) : 0;
}

void EventLog::append(const nlohmann::json& event) {
    std::string line = event.dump();
    line += '\n';
    out_ << line;
    if (!out_) {
        throw std::runtime_error("EventLog: write failed on " + path_.string());
    }
    offset_ += line.size();
}

void EventLog::flush() { out_.flush(); }

void EventLog::truncate_to(uint64_t offset) {
    out_.close();
    std::filesystem::resize_file(path_, offset);
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) {
        throw std::runtime_error("EventLog: cannot reopen " + path_.string());
    }
    offset_ = offset;
}

std::vector<nlohmann::json> EventLog::read_all(
    const std::filesystem::path& path) {
    return read_jsonl(path);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_jsonl: cannot open " + path.string());
    }
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

}  // namespace agora
