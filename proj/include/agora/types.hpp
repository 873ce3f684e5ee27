#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "agora/util.hpp"

namespace agora {

using AgentId = std::string;

enum class Role { Generator, Solver, Verifier, Voter };

std::string to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

struct SamplingParams {
    double temperature = 0.6;
    double top_p = 0.95;
    int max_tokens = 1024;
    bool logprobs = false;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

// Hidden ground truth attached by the simulated backend. Protocol decisions
// must never consult this; it exists for the test-oracle layer and for the
// simulator's own physics (simulated verifiers, training audits).
struct SolutionOracle {
    std::optional<bool> correct;
    std::optional<double> style;
};

struct AgentResponse {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    std::chrono::milliseconds latency{0};
    TokenUsage usage;
    std::optional<SolutionOracle> oracle;  // simulated backends only
};

struct Challenge {
    std::string id;
    std::string prompt;
    double difficulty = 0.0;
    AgentId generator;
    int round = 0;
    uint64_t dedup_digest = 0;
    std::optional<std::string> gold_answer;  // anchor/eval/pool problems only
};

struct Solution {
    std::string id;
    std::string challenge_id;
    AgentId author;
    std::string text;
    std::optional<std::string> answer;  // extracted final-answer span
    int round = 0;
    uint64_t digest = 0;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    SolutionOracle oracle;
};

enum class Verdict { Approve, Reject, Abstain };

std::string to_string(Verdict v);

struct VerificationOutcome {
    std::string solution_id;
    std::vector<std::pair<AgentId, Verdict>> verdicts;
    bool accepted = false;
};

enum class PairResult { AWins, BWins, Tie };

std::string to_string(PairResult r);

struct PairOutcome {
    std::string solution_a;
    std::string solution_b;
    int votes_a = 0;
    int votes_b = 0;
    PairResult result = PairResult::Tie;
};

// Few-shot exemplar drawn from the elite history.
struct Exemplar {
    std::string challenge_prompt;
    std::string solution_text;
    std::string explanation;  // empty only under the explanation ablation
    double quality = 0.0;
};

// --- Task payloads -----------------------------------------------------------
// A PromptContext carries both the rendered text (what a remote model sees)
// and a structured task spec. Remote backends use only the text; the simulated
// backend needs the structure to emulate outcomes. Protocol modules build the
// context once and invoke any backend with it, so no caller branches on
// backend kind.

struct SolveTask {
    Challenge challenge;
    int sample_index = 0;  // distinguishes repeated samples of one prompt
};

struct GenerateTask {
    double difficulty = 1.0;
    std::string directive;
    int ordinal = 0;
    int retry = 0;
    bool fixed_template = false;  // curriculum ablation: no stochastic choice
};

struct VerifyTask {
    std::string solution_id;
    uint64_t solution_digest = 0;
    SolutionOracle oracle;  // passed through untouched for the sim physics
};

struct VoteTask {
    uint64_t pair_digest = 0;
    std::optional<double> style_a;
    std::optional<double> style_b;
};

struct ExplainTask {
    uint64_t challenge_digest = 0;
    uint64_t solution_digest = 0;
};

using TaskSpec =
    std::variant<SolveTask, GenerateTask, VerifyTask, VoteTask, ExplainTask>;

struct PromptContext {
    std::string preamble;
    std::vector<Exemplar> exemplars;  // quality-descending
    std::string target_prompt;
    int round = 0;
    TaskSpec task = SolveTask{};

    std::string render() const;
    uint64_t digest() const;
};

// Remote invocation failure. The orchestrator maps these to abstentions so a
// failed agent never corrupts round state.
struct AgentError : std::runtime_error {
    enum class Kind { Unreachable, Malformed, Timeout };

    AgentError(Kind k, int attempts_made, const std::string& message)
        : std::runtime_error(message), kind(k), attempts(attempts_made) {}

    Kind kind;
    int attempts = 0;

    bool retryable() const { return kind != Kind::Malformed; }
};

// Thrown when a protocol phase cannot complete; run_round rolls state back.
struct RoundAbort : std::runtime_error {
    RoundAbort(std::string phase_name, const std::string& message)
        : std::runtime_error(message), phase(std::move(phase_name)) {}
    std::string phase;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& message)
        : std::runtime_error(message) {}
};

}  // namespace agora
