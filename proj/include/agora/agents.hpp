#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "agora/types.hpp"

namespace agora {

enum class BackendKind { Simulated, Remote };

struct AgentHandle {
    AgentId id;
    std::set<Role> roles;
    BackendKind backend = BackendKind::Simulated;

    bool has_role(Role r) const { return roles.count(r) > 0; }
};

// Parametric stand-in for a model's capability. Deterministic given
// (seed, inputs): every draw is keyed on the seed plus the content digest of
// whatever is being solved, verified or voted on.
struct SkillProfile {
    double latent_skill = 1.0;
    double verify_miss_rate = 0.10;
    double verify_false_reject_rate = 0.02;
    double style_quality = 0.0;
    uint64_t seed = 0;
};

// Knobs of the simulation physics shared by every simulated backend: how much
// few-shot exemplars help, how discerning voters are, and how flush-driven
// training moves latent skill.
struct SimParams {
    double icl_gain = 0.5;          // max effective-skill bonus from a full history
    double explain_factor = 0.5;    // exemplar weight when its explanation is missing
    int elite_k = 3;                // normalizer for the exemplar bonus
    double vote_discrimination = 0.8;  // P(vote goes to the higher-style solution)
    double style_miss_gain = 0.5;   // eloquent flawed traces fool verifiers more
    double train_gain = 0.05;       // skill scale per threshold-sized flush
    double difficulty_weight = 1.0; // harder material teaches more
    double poison_factor = 2.0;     // flawed entries subtract at this multiple
    double diversity_floor = 0.25;  // gain multiplier floor for repetitive data
};

class AgentBackend {
public:
    virtual ~AgentBackend() = default;

    virtual AgentResponse invoke(const PromptContext& ctx,
                                 const SamplingParams& sampling) = 0;
    virtual bool supports_logprobs() const = 0;

    // Simulated learning hook; remote backends train out of process.
    virtual void apply_training(double /*skill_delta*/) {}
    virtual std::optional<double> oracle_skill() const { return std::nullopt; }
    virtual std::optional<SkillProfile> profile() const { return std::nullopt; }
};

// The canonical answer every correct simulated solver emits for a generated
// challenge (derived from the challenge content, so peers agree).
std::string canonical_answer(uint64_t challenge_digest);
std::string wrong_answer(uint64_t challenge_digest, uint64_t draw_key);

// Correctness probability of the logistic solve model.
double solve_probability(double latent_skill, double difficulty);

// Standalone simulation ops (the backend routes through these).
Solution simulated_solve(const SkillProfile& profile, const Challenge& challenge,
                         double icl_bonus = 0.0, int round = 0,
                         int sample_index = 0, bool with_logprobs = false,
                         std::string_view answer_marker = "####");

// At style_miss_gain 0 (or an unstyled solution) the approval probabilities
// are exactly verify_miss_rate / 1 - verify_false_reject_rate. A positive
// gain scales the miss rate by exp(gain * author_style): polished flawed
// traces read as plausible.
bool simulated_verify(const SkillProfile& profile, const Solution& solution,
                      double style_miss_gain = 0.0);

class SimulatedBackend : public AgentBackend {
public:
    SimulatedBackend(SkillProfile profile, SimParams params,
                     std::string answer_marker = "####")
        : profile_(profile), params_(params),
          answer_marker_(std::move(answer_marker)) {}

    AgentResponse invoke(const PromptContext& ctx,
                         const SamplingParams& sampling) override;
    bool supports_logprobs() const override { return true; }
    void apply_training(double skill_delta) override {
        profile_.latent_skill += skill_delta;
    }
    std::optional<double> oracle_skill() const override {
        return profile_.latent_skill;
    }
    std::optional<SkillProfile> profile() const override { return profile_; }

    void set_skill(double skill) { profile_.latent_skill = skill; }

private:
    SkillProfile profile_;
    SimParams params_;
    std::string answer_marker_;
};

// The ensemble: handles plus their backends, index-aligned. Backends are
// invoked through the one dispatch point; callers never see the kind.
class Ensemble {
public:
    Ensemble() = default;

    size_t add(AgentHandle handle, std::unique_ptr<AgentBackend> backend);

    size_t size() const { return handles_.size(); }
    const AgentHandle& agent(size_t idx) const { return handles_.at(idx); }
    AgentBackend& backend(size_t idx) { return *backends_.at(idx); }
    const AgentBackend& backend(size_t idx) const { return *backends_.at(idx); }

    std::optional<size_t> index_of(const AgentId& id) const;

    std::vector<size_t> with_role(Role role) const;

    AgentResponse invoke(size_t idx, const PromptContext& ctx,
                         const SamplingParams& sampling);

private:
    std::vector<AgentHandle> handles_;
    std::vector<std::unique_ptr<AgentBackend>> backends_;
};

// agent_invoke: the uniform dispatch point named by the module contract.
inline AgentResponse agent_invoke(Ensemble& ensemble, size_t idx,
                                  const PromptContext& ctx,
                                  const SamplingParams& sampling) {
    return ensemble.invoke(idx, ctx, sampling);
}

// Number of simulated challenge templates built in (see agents.cpp).
int sim_template_count();
std::string sim_render_challenge(const GenerateTask& task, uint64_t gen_seed,
                                 int round);

}  // namespace agora
