#include "agora/evolution.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace agora {

int indicator(bool consensus_accepted, double author_mu,
              double ensemble_mean_mu) {
    return (consensus_accepted && author_mu > ensemble_mean_mu) ? 1 : 0;
}

void EliteHistory::update(InteractionRecord record) {
    for (const InteractionRecord& existing : records_) {
        if (existing.key() == record.key()) {
            return;  // idempotent for an already-present record
        }
    }
    records_.push_back(std::move(record));
    seqs_.push_back(next_seq_++);
    sort_and_trim();
}

void EliteHistory::sort_and_trim() {
    std::vector<size_t> order(records_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (records_[a].quality_score != records_[b].quality_score) {
            return records_[a].quality_score > records_[b].quality_score;
        }
        return seqs_[a] > seqs_[b];  // newer wins ties
    });
    std::vector<InteractionRecord> new_records;
    std::vector<uint64_t> new_seqs;
    size_t keep = std::min<size_t>(order.size(), size_t(std::max(capacity_, 0)));
    for (size_t i = 0; i < keep; ++i) {
        new_records.push_back(std::move(records_[order[i]]));
        new_seqs.push_back(seqs_[order[i]]);
    }
    records_ = std::move(new_records);
    seqs_ = std::move(new_seqs);
}

void EliteHistory::restore(
    std::vector<std::pair<InteractionRecord, uint64_t>> entries,
    uint64_t next_seq) {
    records_.clear();
    seqs_.clear();
    for (auto& [record, seq] : entries) {
        records_.push_back(std::move(record));
        seqs_.push_back(seq);
    }
    next_seq_ = next_seq;
    sort_and_trim();
}

PromptContext assemble_context(const EliteHistory& history,
                               const Challenge& challenge,
                               const AblationFlags& flags, int round,
                               int sample_index) {
    PromptContext ctx;
    ctx.preamble =
        "You are a member of a peer group solving problems together. Work "
        "carefully and finish with the final answer after '####'.";
    if (!flags.without_elite_icl) {
        for (const InteractionRecord& record : history.records()) {
            Exemplar ex;
            ex.challenge_prompt = record.challenge.prompt;
            ex.solution_text = record.solution.text;
            if (!flags.without_explanation) ex.explanation = record.explanation;
            ex.quality = record.quality_score;
            ctx.exemplars.push_back(std::move(ex));
        }
    }
    ctx.target_prompt = challenge.prompt;
    ctx.round = round;
    SolveTask task;
    task.challenge = challenge;
    task.sample_index = sample_index;
    ctx.task = task;
    return ctx;
}

std::optional<FlushEvent> HQBuffer::push(BufferEntry entry, int gate) {
    if (gate == 0) return std::nullopt;
    entries_.push_back(std::move(entry));
    if (entries_.size() < threshold_) return std::nullopt;
    FlushEvent event;
    event.epoch = ++epoch_;
    event.entries = std::move(entries_);
    entries_.clear();
    return event;
}

void HQBuffer::restore(std::vector<BufferEntry> entries, int epoch) {
    entries_ = std::move(entries);
    epoch_ = epoch;
}

SftLoss sft_loss(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) {
        throw std::invalid_argument("sft_loss: empty logprob sequence");
    }
    double total = 0.0;
    for (double lp : token_logprobs) {
        if (lp > 0.0) {
            throw std::invalid_argument("sft_loss: positive logprob");
        }
        total -= lp;
    }
    return {total, total / double(token_logprobs.size())};
}

namespace {

nlohmann::json entry_to_json(const BufferEntry& e) {
    // Exported schema: prompt, completion, author, round, epoch get written
    // per line; the remaining fields live only in checkpoints.
    return nlohmann::json{{"prompt", e.prompt},
                          {"completion", e.completion},
                          {"author", e.author},
                          {"round", e.round}};
}

}  // namespace

DatasetFile sft_export(const FlushEvent& snapshot,
                       const std::filesystem::path& directory,
                       const LoraParams& lora) {
    if (snapshot.entries.empty()) {
        throw std::invalid_argument("sft_export: empty snapshot");
    }
    std::filesystem::create_directories(directory);

    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%04d.jsonl", snapshot.epoch);
    std::filesystem::path path = directory / name;
    std::filesystem::path tmp = path;
    tmp += ".tmp";

    std::string body;
    for (const BufferEntry& e : snapshot.entries) {
        nlohmann::json record = entry_to_json(e);
        record["epoch"] = snapshot.epoch;
        body += record.dump();
        body += '\n';
    }

    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << body)) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("sft_export: failed writing " +
                                     tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);

    DatasetFile dataset;
    dataset.path = path;
    dataset.count = snapshot.entries.size();
    dataset.digest = hex64(fnv1a64(body));

    nlohmann::json manifest{
        {"epoch", snapshot.epoch},
        {"count", dataset.count},
        {"digest", dataset.digest},
        {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha},
                  {"dropout", lora.dropout}}},
    };
    dataset.manifest_path = path;
    dataset.manifest_path.replace_extension(".manifest.json");
    std::filesystem::path mtmp = dataset.manifest_path;
    mtmp += ".tmp";
    {
        std::ofstream out(mtmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << manifest.dump(2) << '\n')) {
            std::error_code ec;
            std::filesystem::remove(mtmp, ec);
            throw std::runtime_error("sft_export: failed writing manifest");
        }
    }
    std::filesystem::rename(mtmp, dataset.manifest_path);
    return dataset;
}

std::vector<BufferEntry> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_dataset: cannot open " + path.string());
    }
    std::vector<BufferEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line);
        BufferEntry e;
        e.prompt = record.at("prompt").get<std::string>();
        e.completion = record.at("completion").get<std::string>();
        e.author = record.at("author").get<std::string>();
        e.round = record.at("round").get<int>();
        e.prompt_digest = fnv1a64(e.prompt);
        e.completion_digest = fnv1a64(e.completion);
        e.topic = topic_digest(e.prompt);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::string to_string(TrainerOutcome::Status s) {
    switch (s) {
        case TrainerOutcome::Status::Ok: return "ok";
        case TrainerOutcome::Status::Failed: return "failed";
        case TrainerOutcome::Status::Skipped: return "skipped";
    }
    return "unknown";
}

namespace {

TrainerOutcome run_command_trainer(const TrainerConfig& config,
                                   const DatasetFile& dataset, int epoch) {
    TrainerOutcome outcome;
    outcome.epoch = epoch;

    std::ostringstream cmd;
    for (const std::string& part : config.command) cmd << part << ' ';
    cmd << "--dataset " << dataset.path.string() << " --manifest "
        << dataset.manifest_path.string() << " --rank " << config.lora.rank
        << " --alpha " << config.lora.alpha << " --dropout "
        << config.lora.dropout << " --epoch " << epoch << " 2>/dev/null";

    FILE* pipe = ::popen(cmd.str().c_str(), "r");
    if (pipe == nullptr) {
        outcome.status = TrainerOutcome::Status::Failed;
        outcome.detail = "popen failed";
        return outcome;
    }
    std::string output;
    char buf[256];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) output += buf;
    int rc = ::pclose(pipe);
    if (rc == 0) {
        outcome.status = TrainerOutcome::Status::Ok;
        outcome.adapter_id = trim(output);
        if (outcome.adapter_id.empty()) {
            outcome.adapter_id = "adapter-epoch-" + std::to_string(epoch);
        }
    } else {
        outcome.status = TrainerOutcome::Status::Failed;
        outcome.detail = "trainer exited with status " + std::to_string(rc);
    }
    return outcome;
}

}  // namespace

// Webhook delivery lives in remote_client.cpp (shared http plumbing).
TrainerOutcome webhook_trainer_post(const std::string& url,
                                    const DatasetFile& dataset, int epoch,
                                    const LoraParams& lora);

TrainerOutcome trainer_hook(const TrainerConfig& config,
                            const DatasetFile& dataset, int epoch) {
    switch (config.kind) {
        case TrainerConfig::Kind::None: {
            TrainerOutcome outcome;
            outcome.status = TrainerOutcome::Status::Skipped;
            outcome.epoch = epoch;
            outcome.detail = "no trainer configured";
            return outcome;
        }
        case TrainerConfig::Kind::Simulated: {
            TrainerOutcome outcome;
            outcome.status = TrainerOutcome::Status::Ok;
            outcome.epoch = epoch;
            outcome.adapter_id = "sim-epoch-" + std::to_string(epoch);
            return outcome;
        }
        case TrainerConfig::Kind::Command:
            return run_command_trainer(config, dataset, epoch);
        case TrainerConfig::Kind::Webhook:
            return webhook_trainer_post(config.url, dataset, epoch, config.lora);
    }
    TrainerOutcome outcome;
    outcome.status = TrainerOutcome::Status::Failed;
    outcome.detail = "unknown trainer kind";
    return outcome;
}

}  // namespace agora
