#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "json.hpp"

#include "agora/config.hpp"
#include "agora/evaluation.hpp"
#include "agora/event_log.hpp"
#include "agora/evolution.hpp"

namespace agora {

struct RoundMetrics {
    int round = 0;
    double d = 0.0;
    double v = 0.0;          // this round's pass rate (consensus acceptances)
    double v_target = 0.0;
    double f = 0.0;          // last internal-surprise value
    size_t buffer_fill = 0;
    int challenges = 0;
    int attempted = 0;
    int accepted = 0;
    int gated = 0;
    int contamination = 0;   // flawed entries gated in this round (audit)
    std::vector<double> mu;
    std::vector<double> sigma;
    std::optional<double> mean_skill;            // simulated ensembles only
    std::optional<double> mean_self_loss;        // when logprobs are sampled
    std::map<std::string, double> phase_ms;      // wall clock; never logged

    // Deterministic form written to the event log (no timing, no sim fields).
    nlohmann::json canonical_json(const std::vector<AgentId>& ids) const;
    // Full observability row for metrics.jsonl.
    nlohmann::json full_json(const std::vector<AgentId>& ids) const;
};

struct EvalResult {
    int round = 0;
    std::vector<double> per_agent;
    double ensemble = 0.0;
};

struct RunReport {
    int rounds_completed = 0;
    bool halted = false;
    std::vector<EvalResult> evals;
    std::vector<std::pair<AgentId, Rating>> final_ratings;  // conservative desc
    int dataset_epochs = 0;
    long total_challenges = 0;
    long total_solutions = 0;
    long total_accepted = 0;
    long total_gated = 0;
    long total_contamination = 0;
    bool degraded = false;  // an external trainer failed at least once

    nlohmann::json to_json() const;
};

// The dual-loop round engine: challenge generation, solution formulation,
// quality evaluation, model evolution. Owns all mutable run state; a round
// either commits whole or rolls back to its start.
class Orchestrator {
public:
    enum class Mode { Collaborative, Isolated };

    Orchestrator(RunConfig config, std::filesystem::path run_dir,
                 Mode mode = Mode::Collaborative, bool resume = false);
    ~Orchestrator();

    // One protocol round. Returns metrics on commit, nullopt on abort.
    std::optional<RoundMetrics> run_round();

    RunReport run_experiment();

    EvalResult benchmark_eval();
    void anchor_pass();
    std::filesystem::path checkpoint_now();

    int round() const { return round_; }
    int abort_streak() const { return abort_streak_; }
    const ControllerState& controller() const { return controller_; }
    const std::vector<Rating>& ratings() const { return ratings_; }
    const AnchorState& anchor_state() const { return anchor_state_; }
    const EliteHistory& history() const { return history_; }
    const HQBuffer& buffer() const { return buffer_; }
    const std::vector<HQBuffer>& isolated_buffers() const {
        return iso_buffers_;
    }
    Ensemble& ensemble() { return ensemble_; }
    const RunConfig& config() const { return config_; }
    const std::filesystem::path& run_dir() const { return run_dir_; }

    // Mean latent skill across simulated members (audit observability).
    std::optional<double> mean_skill() const;

    static std::filesystem::path latest_checkpoint(
        const std::filesystem::path& run_dir);

private:
    struct CoreState;  // snapshot for atomic round rollback

    void build_ensemble();
    CoreState snapshot_core() const;
    void restore_core(const CoreState& state);

    void stage(nlohmann::json event);
    void commit_round(const RoundMetrics& metrics);
    void write_now(const nlohmann::json& event);

    std::vector<Challenge> phase_generate(int round_no);
    std::vector<std::optional<Solution>> phase_solve(
        int round_no, const std::vector<Challenge>& challenges,
        const std::vector<size_t>& solvers, const SamplingParams& sampling,
        RoundMetrics& metrics);
    SamplingParams round_sampling(int round_no) const;

    void dispatch_trainer(const FlushEvent& flush,
                          const std::optional<DatasetFile>& dataset);
    double entry_training_weight(const BufferEntry& entry) const;
    double flush_diversity_factor(const FlushEvent& flush) const;
    void apply_simulated_training(const FlushEvent& flush);
    void poll_trainers(bool block);
    void log_trainer(const TrainerOutcome& outcome);

    std::optional<RoundMetrics> run_collaborative_round();
    std::optional<RoundMetrics> run_isolated_round();

    nlohmann::json state_to_json() const;
    void state_from_json(const nlohmann::json& snapshot);
    void open_outputs(bool resume);
    void resume_from_checkpoint();

    RunConfig config_;
    std::filesystem::path run_dir_;
    Mode mode_;
    bool has_remote_ = false;

    Ensemble ensemble_;
    ControllerState controller_;
    std::vector<Rating> ratings_;
    AnchorState anchor_state_;
    EliteHistory history_;
    HQBuffer buffer_;
    std::vector<HQBuffer> iso_buffers_;  // isolated mode, one per agent

    int round_ = 0;
    int abort_streak_ = 0;
    int next_anchor_round_ = 0;
    bool degraded_ = false;
    std::set<uint64_t> seen_digests_;

    long total_challenges_ = 0;
    long total_solutions_ = 0;
    long total_accepted_ = 0;
    long total_gated_ = 0;
    long total_contamination_ = 0;

    std::vector<Challenge> anchor_problems_;
    std::vector<Challenge> eval_problems_;
    std::vector<Challenge> pool_problems_;
    std::vector<EvalResult> evals_;

    std::unique_ptr<EventLog> event_log_;
    std::ofstream metrics_out_;
    std::ofstream challenges_out_;
    std::ofstream trainer_out_;
    uint64_t metrics_offset_ = 0;
    uint64_t challenges_offset_ = 0;
    uint64_t trainer_offset_ = 0;

    std::vector<nlohmann::json> staged_events_;
    std::vector<nlohmann::json> staged_challenge_records_;
    std::vector<std::pair<int, std::future<TrainerOutcome>>> pending_trainers_;
};

}  // namespace agora
