#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agora/types.hpp"

namespace agora {

// One consensus-accepted winning interaction: the unit of elite history and
// of the high-quality buffer.
struct InteractionRecord {
    Challenge challenge;
    Solution solution;
    AgentId author;
    std::string explanation;
    double quality_score = 0.0;  // author mu at record time
    int round = 0;

    std::string key() const { return challenge.id + "/" + author; }
};

// Eq-gate: consensus acceptance AND author mu strictly above the ensemble
// mean at the gating round.
int indicator(bool consensus_accepted, double author_mu,
              double ensemble_mean_mu);

// Top-k interactions by quality score, ties broken by recency.
class EliteHistory {
public:
    explicit EliteHistory(int capacity = 3) : capacity_(capacity) {}

    void update(InteractionRecord record);

    const std::vector<InteractionRecord>& records() const { return records_; }
    int capacity() const { return capacity_; }
    uint64_t sequence() const { return next_seq_; }

    // Checkpoint support: rebuild with explicit sequence numbers.
    void restore(std::vector<std::pair<InteractionRecord, uint64_t>> entries,
                 uint64_t next_seq);
    const std::vector<uint64_t>& sequences() const { return seqs_; }

private:
    void sort_and_trim();

    int capacity_;
    std::vector<InteractionRecord> records_;  // quality desc, recency tiebreak
    std::vector<uint64_t> seqs_;              // parallel to records_
    uint64_t next_seq_ = 0;
};

struct AblationFlags {
    bool without_valid_vote = false;
    bool without_parametric = false;
    bool without_quality_vote = false;
    bool without_elite_icl = false;
    bool without_random_qgen = false;
    bool without_difficulty_control = false;
    bool without_external_anchor = false;
    bool without_explanation = false;
    bool without_dynamic_strategy = false;
    bool without_fem = false;
};

// Few-shot context for a solver: elite exemplars (quality-descending) plus the
// target challenge. Pure function of its inputs.
PromptContext assemble_context(const EliteHistory& history,
                               const Challenge& challenge,
                               const AblationFlags& flags, int round,
                               int sample_index = 0);

struct BufferEntry {
    std::string prompt;
    std::string completion;
    AgentId author;
    int round = 0;
    std::string challenge_id;
    uint64_t prompt_digest = 0;
    uint64_t completion_digest = 0;
    uint64_t topic = 0;          // digit-stripped prompt digest
    double difficulty = 0.0;
    std::optional<bool> oracle_correct;  // audit only
};

struct FlushEvent {
    int epoch = 0;
    std::vector<BufferEntry> entries;
};

// Indicator-gated FIFO; emits a snapshot and clears when the threshold fills.
class HQBuffer {
public:
    explicit HQBuffer(size_t threshold = 1024) : threshold_(threshold) {}

    std::optional<FlushEvent> push(BufferEntry entry, int gate);

    size_t size() const { return entries_.size(); }
    size_t threshold() const { return threshold_; }
    int epoch() const { return epoch_; }
    const std::vector<BufferEntry>& entries() const { return entries_; }

    void restore(std::vector<BufferEntry> entries, int epoch);

private:
    size_t threshold_;
    int epoch_ = 0;  // completed flushes
    std::vector<BufferEntry> entries_;
};

struct SftLoss {
    double total = 0.0;
    double per_token_mean = 0.0;
};

// Negative sum of completion-token logprobs. Rejects empty input and any
// positive logprob.
SftLoss sft_loss(std::span<const double> token_logprobs);

struct LoraParams {
    int rank = 16;
    int alpha = 32;
    double dropout = 0.05;
};

struct DatasetFile {
    std::filesystem::path path;
    std::filesystem::path manifest_path;
    size_t count = 0;
    std::string digest;  // hex digest of the dataset file bytes
};

// Materialize a flush snapshot as a line-delimited dataset plus manifest.
// Writes are staged and renamed so a failure leaves no partial file.
DatasetFile sft_export(const FlushEvent& snapshot,
                       const std::filesystem::path& directory,
                       const LoraParams& lora);

// Parse a dataset file back (field-for-field with what was exported).
std::vector<BufferEntry> load_dataset(const std::filesystem::path& path);

struct TrainerConfig {
    enum class Kind { None, Simulated, Command, Webhook };
    Kind kind = Kind::None;
    std::vector<std::string> command;  // argv prefix for Kind::Command
    std::string url;                   // for Kind::Webhook
    LoraParams lora;
};

struct TrainerOutcome {
    enum class Status { Ok, Failed, Skipped };
    Status status = Status::Skipped;
    std::string adapter_id;
    std::string detail;
    int epoch = 0;
};

std::string to_string(TrainerOutcome::Status s);

// Hand a freshly exported dataset to the external trainer (subprocess or
// webhook). Failure is recorded, never fatal: the run continues on the prior
// adapter. Kind::Simulated is handled by the orchestrator, not here.
TrainerOutcome trainer_hook(const TrainerConfig& config,
                            const DatasetFile& dataset, int epoch);

}  // namespace agora
