#include "agora/agents.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace agora {

namespace {

// Parametric problem templates for the simulated Q-Group. {A} and {B} are
// payload slots filled from the generator's draw key.
constexpr std::array<const char*, 50> kTemplates = {
    "Compute the sum of all integers from {A} to {B} inclusive.",
    "Find the greatest common divisor of {A} and {B}.",
    "Find the least common multiple of {A} and {B}.",
    "What is {A} raised to the power 3, modulo {B}?",
    "How many positive divisors does {A} * {B} have?",
    "Compute the remainder when {A}! is divided by {B}.",
    "A sequence starts at {A} and each term adds {B}. What is the 20th term?",
    "What is the units digit of {A}^{B}?",
    "How many integers between {A} and {A}00 are divisible by {B}?",
    "Solve for x: {A}x + {B} = 0. Give x as a reduced fraction.",
    "Compute the sum of the first {A} odd numbers minus {B}.",
    "A rectangle has sides {A} and {B}. What is the length of its diagonal squared?",
    "What is the coefficient of x^2 in (x + {A})({B} + x)?",
    "Count the lattice paths from (0,0) to ({A} mod 7 + 2, {B} mod 5 + 2) moving only right or up.",
    "What is binomial({A} mod 20 + 5, 3) + {B}?",
    "Two dice labelled 1..{A} and 1..{B} are rolled. How many outcomes sum to an even number?",
    "Find the smallest prime greater than {A} + {B}.",
    "Compute ({A}^2 - {B}^2) / ({A} - {B}) for distinct {A}, {B}.",
    "What is the sum of digits of {A} * {B} * 99?",
    "An arithmetic series has first term {A}, common difference {B}, and 15 terms. Find its sum.",
    "A geometric sequence starts at {A} with ratio 2. What is the term closest to {B}00?",
    "How many trailing zeros does ({A} + {B})! have?",
    "Evaluate the floor of {A}00 / {B}.",
    "Find x with x = {A} (mod 5) and x = {B} (mod 7), 0 <= x < 35.",
    "What is the area of a triangle with legs {A} and {B}?",
    "Compute {A} * {B} - {A} - {B} + 1 and factor it; report the value.",
    "How many subsets of a {A} mod 10 + 3 element set have even size? Add {B}.",
    "What is the {B} mod 6 + 2 digit of pi times zero plus {A}? (Trick: anything times zero.)",
    "Sum the squares from {A} to {A}+{B} inclusive.",
    "A clock shows {A} mod 12 hours. What hour does it show {B}7 hours later?",
    "Compute the continued-fraction value [ {A}; {B}, 1 ] as a reduced fraction p/q and report p+q.",
    "How many edges does a complete graph on {A} mod 15 + 3 vertices have, plus {B}?",
    "Find the inverse of {A} modulo the smallest prime above {B}.",
    "What is the perimeter of a right triangle with legs {A} and {B} if the hypotenuse is an integer, else -1?",
    "Evaluate sum_{k=1}^{{A} mod 9 + 2} k * {B}.",
    "How many positive integers below {A}0 are coprime to {B}?",
    "Compute the determinant of [[{A}, 2], [3, {B}]].",
    "A bag has {A} red and {B} blue balls. How many ways to choose 2 of the same color?",
    "What is the sum of the interior angles of a polygon with {A} mod 12 + 3 sides, plus {B} degrees?",
    "Find the largest k with 2^k dividing {A} * {B} * 8.",
    "Compute the average of {A}, {B}, and {A}+{B}, times 3.",
    "What is the 3rd smallest positive multiple of {A} that is also a multiple of {B}?",
    "Count the integer solutions of |x - {A}| + |y - {B}| <= 2.",
    "Evaluate {A}^2 + {B}^2 - 2*{A}*{B} and identify the square; report the value.",
    "A worker paints {A} fences in {B} hours. How many fences in 3*{B} hours at the same rate?",
    "Compute the median of the multiset { {A}, {B}, {A}+1, {B}+1, {A}+{B} }.",
    "What is the smallest n with n^2 >= {A}00 + {B}?",
    "How many digits does {A}^{B} mod 11 + 2 have when written in base 2, plus {A}?",
    "Find the sum of the roots of x^2 - {A}x + {B} = 0.",
    "Compute gcd({A}^2 - 1, {A} + 1) + {B}.",
};

std::string instantiate(const char* tmpl, int a, int b) {
    std::string out;
    for (const char* p = tmpl; *p != '\0';) {
        if (p[0] == '{' && p[1] == 'A' && p[2] == '}') {
            out += std::to_string(a);
            p += 3;
        } else if (p[0] == '{' && p[1] == 'B' && p[2] == '}') {
            out += std::to_string(b);
            p += 3;
        } else {
            out.push_back(*p++);
        }
    }
    return out;
}

constexpr std::array<const char*, 4> kTraceSkeletons = {
    "Restating the problem to fix the quantities involved.",
    "Setting up the computation from the given values.",
    "Reducing the expression step by step.",
    "Checking the intermediate result against a quick estimate.",
};

constexpr std::array<const char*, 4> kExplainSkeletons = {
    "Key steps: translate the statement into a single expression, simplify, "
    "then verify the edge values.",
    "Key steps: identify the underlying structure, apply the standard identity, "
    "and confirm the arithmetic.",
    "Key steps: reduce the problem to a smaller case, solve it directly, and "
    "scale the result back up.",
    "Key steps: separate the given data from what is asked, compute in stages, "
    "and sanity-check the magnitude.",
};

}  // namespace

double solve_probability(double latent_skill, double difficulty) {
    return logistic(latent_skill - difficulty);
}

std::string canonical_answer(uint64_t challenge_digest) {
    return std::to_string(mix64(challenge_digest ^ 0x5eedbeefcafef00dull) % 9973);
}

std::string wrong_answer(uint64_t challenge_digest, uint64_t draw_key) {
    uint64_t canon = mix64(challenge_digest ^ 0x5eedbeefcafef00dull) % 9973;
    uint64_t offset = 1 + mix64(draw_key) % 7;
    return std::to_string((canon + offset) % 9973);
}

int sim_template_count() { return static_cast<int>(kTemplates.size()); }

std::string sim_render_challenge(const GenerateTask& task, uint64_t gen_seed,
                                 int round) {
    size_t index = 0;
    if (!task.fixed_template) {
        double u = HashStream{}
                       .u64(gen_seed)
                       .str("qgen-template")
                       .u64(static_cast<uint64_t>(round))
                       .u64(static_cast<uint64_t>(task.ordinal))
                       .u64(static_cast<uint64_t>(task.retry))
                       .uniform();
        index = static_cast<size_t>(u * kTemplates.size()) % kTemplates.size();
    }
    uint64_t payload = HashStream{}
                           .u64(gen_seed)
                           .str("qgen-payload")
                           .u64(static_cast<uint64_t>(round))
                           .u64(static_cast<uint64_t>(task.ordinal))
                           .u64(static_cast<uint64_t>(task.retry))
                           .digest();
    int a = 2 + static_cast<int>(payload % 89);
    int b = 2 + static_cast<int>(mix64(payload) % 89);

    std::ostringstream out;
    out << task.directive << "\n"
        << instantiate(kTemplates[index], a, b) << "\n"
        << "Show your reasoning and give the final answer after '####'.";
    return out.str();
}

Solution simulated_solve(const SkillProfile& profile, const Challenge& challenge,
                         double icl_bonus, int round, int sample_index,
                         bool with_logprobs, std::string_view answer_marker) {
    if (!std::isfinite(challenge.difficulty)) {
        throw std::invalid_argument("simulated_solve: non-finite difficulty");
    }
    uint64_t prompt_digest = fnv1a64(challenge.prompt);
    HashStream key;
    key.u64(profile.seed)
        .str("solve")
        .u64(static_cast<uint64_t>(round))
        .u64(static_cast<uint64_t>(sample_index))
        .u64(prompt_digest);
    double p = solve_probability(profile.latent_skill + icl_bonus,
                                 challenge.difficulty);
    bool correct = key.uniform() < p;

    std::string answer;
    if (correct) {
        answer = challenge.gold_answer.value_or(canonical_answer(prompt_digest));
    } else {
        answer = wrong_answer(prompt_digest, key.digest());
        if (challenge.gold_answer && answer == *challenge.gold_answer) {
            answer += "0";  // keep wrong answers wrong
        }
    }

    std::ostringstream text;
    size_t skeleton =
        mix64(key.digest() ^ 0x1234u) % kTraceSkeletons.size();
    text << kTraceSkeletons[skeleton] << "\n"
         << "Step 1: extract the given quantities.\n"
         << "Step 2: carry out the computation (work id "
         << hex64(key.digest()).substr(0, 8) << ").\n"
         << answer_marker << " " << answer;

    Solution solution;
    solution.challenge_id = challenge.id;
    solution.text = text.str();
    solution.answer = answer;
    solution.round = round;
    solution.digest = fnv1a64(solution.text);
    solution.oracle.correct = correct;
    solution.oracle.style = profile.style_quality;

    if (with_logprobs) {
        std::vector<TokenLogprob> lps;
        std::istringstream words(solution.text);
        std::string tok;
        int i = 0;
        while (words >> tok && i < 64) {
            double u = HashStream{}
                           .u64(profile.seed)
                           .str("logprob")
                           .u64(solution.digest)
                           .u64(static_cast<uint64_t>(i))
                           .uniform();
            lps.push_back({tok, -(0.02 + 1.5 * u)});
            ++i;
        }
        solution.token_logprobs = std::move(lps);
    }
    return solution;
}

bool simulated_verify(const SkillProfile& profile, const Solution& solution,
                      double style_miss_gain) {
    if (!solution.oracle.correct.has_value()) {
        // No ground truth available (non-simulated author); fall back to an
        // unbiased coin so mixed ensembles stay runnable.
        return HashStream{}
                   .u64(profile.seed)
                   .str("verify-blind")
                   .u64(solution.digest)
                   .uniform() < 0.5;
    }
    double approve_prob;
    if (*solution.oracle.correct) {
        approve_prob = 1.0 - profile.verify_false_reject_rate;
    } else {
        approve_prob = profile.verify_miss_rate;
        if (style_miss_gain != 0.0 && solution.oracle.style) {
            approve_prob = std::clamp(
                approve_prob * std::exp(style_miss_gain * *solution.oracle.style),
                0.0, 1.0);
        }
    }
    return HashStream{}
               .u64(profile.seed)
               .str("verify")
               .u64(solution.digest)
               .uniform() < approve_prob;
}

AgentResponse SimulatedBackend::invoke(const PromptContext& ctx,
                                       const SamplingParams& sampling) {
    AgentResponse response;

    if (const auto* solve = std::get_if<SolveTask>(&ctx.task)) {
        double bonus = 0.0;
        if (!ctx.exemplars.empty() && params_.elite_k > 0) {
            double weight = 0.0;
            for (const Exemplar& ex : ctx.exemplars) {
                weight += ex.explanation.empty() ? params_.explain_factor : 1.0;
            }
            bonus = params_.icl_gain *
                    std::min(weight / params_.elite_k, 1.0);
        }
        Solution sol = simulated_solve(profile_, solve->challenge, bonus,
                                       ctx.round, solve->sample_index,
                                       sampling.logprobs, answer_marker_);
        response.text = sol.text;
        response.token_logprobs = sol.token_logprobs;
        response.oracle = sol.oracle;
    } else if (const auto* gen = std::get_if<GenerateTask>(&ctx.task)) {
        response.text = sim_render_challenge(*gen, profile_.seed, ctx.round);
    } else if (const auto* verify = std::get_if<VerifyTask>(&ctx.task)) {
        Solution shim;
        shim.digest = verify->solution_digest;
        shim.oracle = verify->oracle;
        response.text = simulated_verify(profile_, shim, params_.style_miss_gain)
                            ? "APPROVE"
                            : "REJECT";
    } else if (const auto* vote = std::get_if<VoteTask>(&ctx.task)) {
        double u = HashStream{}
                       .u64(profile_.seed)
                       .str("vote")
                       .u64(vote->pair_digest)
                       .uniform();
        bool pick_a;
        if (vote->style_a && vote->style_b && *vote->style_a != *vote->style_b) {
            bool a_better = *vote->style_a > *vote->style_b;
            bool discerned = u < params_.vote_discrimination;
            pick_a = a_better == discerned;
        } else {
            pick_a = u < 0.5;
        }
        response.text = pick_a ? "A" : "B";
    } else if (const auto* explain = std::get_if<ExplainTask>(&ctx.task)) {
        size_t skeleton = HashStream{}
                              .u64(profile_.seed)
                              .str("explain")
                              .u64(explain->challenge_digest)
                              .u64(explain->solution_digest)
                              .digest() %
                          kExplainSkeletons.size();
        response.text = kExplainSkeletons[skeleton];
    }

    size_t prompt_len = ctx.render().size();
    response.usage.prompt_tokens = static_cast<int>(prompt_len / 4);
    response.usage.completion_tokens = static_cast<int>(response.text.size() / 4);
    return response;
}

size_t Ensemble::add(AgentHandle handle, std::unique_ptr<AgentBackend> backend) {
    if (handle.roles.empty()) {
        throw ConfigError("agent '" + handle.id + "' has an empty role set");
    }
    if (index_of(handle.id)) {
        throw ConfigError("duplicate agent id '" + handle.id + "'");
    }
    handles_.push_back(std::move(handle));
    backends_.push_back(std::move(backend));
    return handles_.size() - 1;
}

std::optional<size_t> Ensemble::index_of(const AgentId& id) const {
    for (size_t i = 0; i < handles_.size(); ++i) {
        if (handles_[i].id == id) return i;
    }
    return std::nullopt;
}

std::vector<size_t> Ensemble::with_role(Role role) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < handles_.size(); ++i) {
        if (handles_[i].has_role(role)) out.push_back(i);
    }
    return out;
}

AgentResponse Ensemble::invoke(size_t idx, const PromptContext& ctx,
                               const SamplingParams& sampling) {
    return backends_.at(idx)->invoke(ctx, sampling);
}

}  // namespace agora
