#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agora/agents.hpp"
#include "agora/curriculum.hpp"
#include "agora/evolution.hpp"
#include "agora/remote_client.hpp"
#include "agora/trueskill.hpp"

namespace agora {

struct AgentSpec {
    AgentId id;
    std::set<Role> roles;
    BackendKind backend = BackendKind::Simulated;
    SkillProfile profile;       // simulated backends
    EndpointConfig endpoint;    // remote backends
};

struct RunSection {
    uint64_t seed = 42;
    int rounds = 100;
    int challenges_per_round = 4;
    int eval_cadence = 25;
    int checkpoint_cadence = 50;
    int halt_after_aborts = 3;
};

struct AnchorSection {
    std::string path;           // empty disables anchoring
    int cadence = 50;
    double lambda = 0.8;
    double surprise_alert = 0.25;
    double epsilon = 1e-9;
    size_t window = 10;
};

struct EvalSection {
    std::string path;           // empty disables benchmark evals
};

struct EvolutionSection {
    size_t buffer_threshold = 1024;
    int elite_k = 3;
    bool exclude_self = false;
    std::string answer_marker = "####";
};

struct IsolatedSection {
    std::string pool;           // seed problem pool (required for isolated runs)
    int samples_per_problem = 32;
};

struct RunConfig {
    RunSection run;
    std::vector<AgentSpec> ensemble;
    ControllerState controller;
    DifficultyBuckets buckets;
    TrueSkillParams trueskill;
    EvolutionSection evolution;
    SamplingParams sampling;
    AnchorSection anchor;
    EvalSection eval;
    TrainerConfig trainer;
    SimParams sim;
    double sim_skill_drift_per_round = 0.0;
    AblationFlags ablation;
    IsolatedSection isolated;

    nlohmann::json to_json() const;
    uint64_t digest() const;

    // Checks that must hold regardless of subcommand.
    void validate() const;
    // Additional checks for commands that actually run an ensemble.
    void require_ensemble(bool simulated_only) const;
    void require_isolated_pool() const;
};

// Parse a config file plus "a.b.c=value" override strings. Overrides are
// applied before schema validation; unknown keys anywhere are rejected with
// their full path.
RunConfig parse_config(const std::filesystem::path& file,
                       const std::vector<std::string>& overrides);
RunConfig parse_config_json(nlohmann::json root);

// Problems used by anchor sets, benchmark evals and isolated-mode pools:
// one JSON record per line with id, prompt, gold_answer and optional
// difficulty.
std::vector<Challenge> load_problem_file(const std::filesystem::path& path);

}  // namespace agora
