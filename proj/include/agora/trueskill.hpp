#pragma once

#include <utility>

namespace agora {

// Bayesian two-player skill belief. The conservative estimate mu - 3*sigma is
// the ordering key for display and export.
struct Rating {
    double mu = 25.0;
    double sigma = 25.0 / 3.0;

    double conservative() const { return mu - 3.0 * sigma; }
};

struct TrueSkillParams {
    double mu0 = 25.0;
    double sigma0 = 25.0 / 3.0;
    double beta = 25.0 / 6.0;          // sigma0 / 2
    double tau = 25.0 / 300.0;         // sigma0 / 100
    double draw_probability = 0.10;
};

enum class MatchOutcome { Decisive, Draw };

// Two-player rating update. Dynamics noise tau is folded into both variances
// before the update; the draw margin is implied by draw_probability.
std::pair<Rating, Rating> trueskill_update(const Rating& winner,
                                           const Rating& loser,
                                           const TrueSkillParams& params,
                                           MatchOutcome outcome);

// Win probability of a vs b under the rating model (used for reporting only).
double trueskill_win_probability(const Rating& a, const Rating& b,
                                 const TrueSkillParams& params);

namespace detail {
double normal_pdf(double x);
double normal_cdf(double x);
double normal_inverse_cdf(double p);
double draw_margin(double draw_probability, double beta);
}  // namespace detail

}  // namespace agora
