#include "agora/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace agora {

void AnchorState::observe(double mean_accuracy) {
    mu_bar = mean_accuracy;
    history.push_back(mean_accuracy);
    while (history.size() > window) history.pop_front();
    mu_star = *std::max_element(history.begin(), history.end());
    f = internal_surprise(mu_star, mu_bar, epsilon);
}

double internal_surprise(double mu_star, double mu_bar, double epsilon) {
    if (mu_star < 0.0) {
        throw std::invalid_argument("internal_surprise: mu_star must be >= 0");
    }
    double gap = (mu_star - mu_bar) / (mu_star + epsilon);
    return gap * gap;
}

double internal_surprise(AnchorState& state) {
    state.f = internal_surprise(state.mu_star, state.mu_bar, state.epsilon);
    return state.f;
}

namespace {

std::vector<std::string> tokenize_upper(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(char(std::toupper(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace

Verdict parse_verdict(std::string_view text) {
    for (const std::string& tok : tokenize_upper(text)) {
        if (tok == "APPROVE" || tok == "APPROVED") return Verdict::Approve;
        if (tok == "REJECT" || tok == "REJECTED") return Verdict::Reject;
    }
    return Verdict::Abstain;
}

std::optional<char> parse_vote(std::string_view text) {
    for (const std::string& tok : tokenize_upper(text)) {
        if (tok == "A") return 'A';
        if (tok == "B") return 'B';
    }
    return std::nullopt;
}

VerificationOutcome verify_unanimous(const Solution& solution,
                                     const std::vector<size_t>& peer_indices,
                                     Ensemble& ensemble,
                                     const SamplingParams& sampling,
                                     int round) {
    VerificationOutcome outcome;
    outcome.solution_id = solution.id;

    if (peer_indices.empty()) {
        // Never vacuously accepted.
        outcome.accepted = false;
        return outcome;
    }

    VerifyTask task;
    task.solution_id = solution.id;
    task.solution_digest = solution.digest;
    task.oracle = solution.oracle;

    std::ostringstream target;
    target << "Review the following reasoning trace and judge whether it is "
              "logically sound. Answer APPROVE or REJECT.\n\n"
           << solution.text;

    bool all_approved = true;
    for (size_t peer : peer_indices) {
        if (ensemble.agent(peer).id == solution.author) {
            throw std::invalid_argument(
                "verify_unanimous: author offered as its own verifier");
        }
        PromptContext ctx;
        ctx.preamble = "You are a careful reviewer of mathematical reasoning.";
        ctx.target_prompt = target.str();
        ctx.round = round;
        ctx.task = task;

        Verdict verdict = Verdict::Abstain;
        try {
            verdict = parse_verdict(ensemble.invoke(peer, ctx, sampling).text);
        } catch (const AgentError&) {
            verdict = Verdict::Abstain;  // failed peer abstains, which rejects
        }
        outcome.verdicts.emplace_back(ensemble.agent(peer).id, verdict);
        if (verdict != Verdict::Approve) all_approved = false;
    }
    outcome.accepted = all_approved;
    return outcome;
}

PairOutcome pair_vote(const Solution& a, const Solution& b,
                      const std::vector<size_t>& voter_indices,
                      Ensemble& ensemble, const SamplingParams& sampling,
                      int round) {
    PairOutcome outcome;
    outcome.solution_a = a.id;
    outcome.solution_b = b.id;

    if (voter_indices.empty()) {
        outcome.result = PairResult::Tie;
        return outcome;
    }

    VoteTask task;
    task.pair_digest = HashStream{}.u64(a.digest).u64(b.digest).digest();
    task.style_a = a.oracle.style;
    task.style_b = b.oracle.style;

    std::ostringstream target;
    target << "Two verified solutions to the same problem follow. Which shows "
              "the superior reasoning path? Answer with exactly A or B.\n\n"
           << "Solution A:\n" << a.text << "\n\nSolution B:\n" << b.text;

    for (size_t voter : voter_indices) {
        const AgentId& voter_id = ensemble.agent(voter).id;
        if (voter_id == a.author || voter_id == b.author) {
            throw std::invalid_argument(
                "pair_vote: author offered as voter on its own pair");
        }
        PromptContext ctx;
        ctx.preamble = "You are judging reasoning quality between peers.";
        ctx.target_prompt = target.str();
        ctx.round = round;
        ctx.task = task;

        try {
            auto vote = parse_vote(ensemble.invoke(voter, ctx, sampling).text);
            if (vote == 'A') ++outcome.votes_a;
            if (vote == 'B') ++outcome.votes_b;
        } catch (const AgentError&) {
            // Failed voter casts nothing.
        }
    }

    if (outcome.votes_a > outcome.votes_b) {
        outcome.result = PairResult::AWins;
    } else if (outcome.votes_b > outcome.votes_a) {
        outcome.result = PairResult::BWins;
    } else {
        outcome.result = PairResult::Tie;
    }
    return outcome;
}

double pass_at_k(const std::vector<int>& results, int k) {
    if (results.empty()) {
        throw std::invalid_argument("pass_at_k: empty results");
    }
    if (k <= 0 || static_cast<size_t>(k) != results.size()) {
        throw std::invalid_argument("pass_at_k: k must equal results length");
    }
    double sum = 0.0;
    for (int p : results) {
        if (p != 0 && p != 1) {
            throw std::invalid_argument("pass_at_k: results must be 0/1");
        }
        sum += p;
    }
    return sum / double(k);
}

std::optional<std::string> strict_majority(
    const std::vector<std::optional<std::string>>& answers) {
    std::map<std::string, int> counts;
    for (const auto& answer : answers) {
        if (answer) counts[normalize_answer(*answer)] += 1;
    }
    const std::string* best = nullptr;
    int best_count = 0;
    for (const auto& [answer, count] : counts) {
        if (count > best_count) {
            best_count = count;
            best = &answer;
        }
    }
    if (best != nullptr && best_count * 2 > static_cast<int>(answers.size())) {
        return *best;
    }
    return std::nullopt;
}

bool anchor_calibrate(std::vector<Rating>& ratings,
                      const std::vector<double>& accuracies, double lambda,
                      const TrueSkillParams& params) {
    if (accuracies.empty()) return false;
    if (ratings.size() != accuracies.size()) {
        throw std::invalid_argument(
            "anchor_calibrate: ratings/accuracies size mismatch");
    }
    double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
                  double(accuracies.size());
    double var = 0.0;
    for (double acc : accuracies) var += (acc - mean) * (acc - mean);
    double stddev = std::sqrt(var / double(accuracies.size()));
    double spread = std::max(stddev, 0.05);

    for (size_t i = 0; i < ratings.size(); ++i) {
        double target =
            params.mu0 + 2.0 * params.sigma0 * (accuracies[i] - mean) / spread;
        ratings[i].mu = lambda * ratings[i].mu + (1.0 - lambda) * target;
    }
    return true;
}

}  // namespace agora
