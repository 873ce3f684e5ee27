#pragma once

#include <deque>
#include <map>
#include <vector>

#include "agora/agents.hpp"
#include "agora/trueskill.hpp"
#include "agora/types.hpp"

namespace agora {

// Homeostasis signal state: the squared relative gap between recent peak and
// current average anchor accuracy.
struct AnchorState {
    double mu_star = 0.0;
    double mu_bar = 0.0;
    double epsilon = 1e-9;
    double f = 0.0;
    std::deque<double> history;  // trailing anchor-pass means
    size_t window = 10;

    // Record a new anchor-pass mean and refresh mu_star / f.
    void observe(double mean_accuracy);
};

double internal_surprise(double mu_star, double mu_bar, double epsilon);
double internal_surprise(AnchorState& state);

// Parse a verifier's verdict from free text. Looks for APPROVE / REJECT;
// anything unparseable counts as abstention (and abstention as rejection).
Verdict parse_verdict(std::string_view text);

// Parse a pairwise vote: the first standalone A or B token.
std::optional<char> parse_vote(std::string_view text);

// Every non-author peer checks the reasoning trace; acceptance requires all
// of them to approve. Unreachable peers abstain, which rejects.
VerificationOutcome verify_unanimous(const Solution& solution,
                                     const std::vector<size_t>& peer_indices,
                                     Ensemble& ensemble,
                                     const SamplingParams& sampling,
                                     int round);

// Strict-majority pairwise quality vote among eligible voters (authors of
// either side excluded by the caller). No votes, or equal counts, is a tie.
PairOutcome pair_vote(const Solution& a, const Solution& b,
                      const std::vector<size_t>& voter_indices,
                      Ensemble& ensemble, const SamplingParams& sampling,
                      int round);

// Mean correctness over exactly k per-problem results.
double pass_at_k(const std::vector<int>& results, int k);

// Self-consistency acceptance rule: the normalized answer held by a strict
// majority of ALL generated samples (answerless samples count against), or
// nothing. An exact half split is rejected.
std::optional<std::string> strict_majority(
    const std::vector<std::optional<std::string>>& answers);

// Blend each rating's mu toward an accuracy-derived target:
//   mu <- lambda * mu + (1 - lambda) * (mu0 + 2*sigma0*(acc - mean)/max(std, 0.05))
// Sigmas are untouched. Returns false (no-op) when accuracies are empty.
bool anchor_calibrate(std::vector<Rating>& ratings,
                      const std::vector<double>& accuracies, double lambda,
                      const TrueSkillParams& params);

}  // namespace agora
