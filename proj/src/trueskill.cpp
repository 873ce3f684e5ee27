#include "agora/trueskill.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace agora {
namespace detail {

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Acklam's rational approximation refined with one Halley step; good to
// ~1e-15 over (0, 1).
double normal_inverse_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_inverse_cdf: p outside (0,1)");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement.
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

// Margin within which a two-player game is scored as a draw.
double draw_margin(double draw_probability, double beta) {
    if (draw_probability <= 0.0) return 0.0;
    return normal_inverse_cdf(0.5 * (draw_probability + 1.0)) *
           std::sqrt(2.0) * beta;
}

namespace {

// Mean-truncation helpers for the win and draw cases.
double v_win(double t, double eps) {
    double x = t - eps;
    double denom = normal_cdf(x);
    if (denom < 1e-300) {
        // Mills-ratio asymptote of pdf/cdf for x -> -inf.
        return -x - 1.0 / x;
    }
    return normal_pdf(x) / denom;
}

double w_win(double t, double eps) {
    double v = v_win(t, eps);
    return v * (v + t - eps);
}

double v_draw(double t, double eps) {
    double at = std::abs(t);
    double denom = normal_cdf(eps - at) - normal_cdf(-eps - at);
    if (denom < 1e-300) {
        double x = eps + at;
        return t < 0.0 ? x : -x;
    }
    double num = normal_pdf(-eps - at) - normal_pdf(eps - at);
    return (t < 0.0 ? -num : num) / denom;
}

double w_draw(double t, double eps) {
    double at = std::abs(t);
    double denom = normal_cdf(eps - at) - normal_cdf(-eps - at);
    if (denom < 1e-300) return 1.0;
    double v = v_draw(t, eps);
    return v * v +
           ((eps - at) * normal_pdf(eps - at) + (eps + at) * normal_pdf(eps + at)) /
               denom;
}

}  // namespace
}  // namespace detail

std::pair<Rating, Rating> trueskill_update(const Rating& winner,
                                           const Rating& loser,
                                           const TrueSkillParams& params,
                                           MatchOutcome outcome) {
    if (!(std::isfinite(winner.mu) && std::isfinite(winner.sigma) &&
          std::isfinite(loser.mu) && std::isfinite(loser.sigma))) {
        throw std::invalid_argument("trueskill_update: non-finite rating");
    }
    if (winner.sigma <= 0.0 || loser.sigma <= 0.0) {
        throw std::invalid_argument("trueskill_update: sigma must be positive");
    }

    const double tau2 = params.tau * params.tau;
    const double var_w = winner.sigma * winner.sigma + tau2;
    const double var_l = loser.sigma * loser.sigma + tau2;
    const double c2 = var_w + var_l + 2.0 * params.beta * params.beta;
    const double c = std::sqrt(c2);
    const double t = (winner.mu - loser.mu) / c;
    const double eps = detail::draw_margin(params.draw_probability, params.beta) / c;

    double v, w;
    if (outcome == MatchOutcome::Decisive) {
        v = detail::v_win(t, eps);
        w = detail::w_win(t, eps);
    } else {
        v = detail::v_draw(t, eps);
        w = detail::w_draw(t, eps);
    }

    // Mu moves by the tau-inflated variance; sigma shrinks the original
    // variance by the information factor, so every update sharpens beliefs.
    Rating new_winner;
    Rating new_loser;
    new_winner.mu = winner.mu + var_w / c * v;
    new_loser.mu = loser.mu - var_l / c * v;
    new_winner.sigma =
        std::sqrt(winner.sigma * winner.sigma * (1.0 - var_w / c2 * w));
    new_loser.sigma =
        std::sqrt(loser.sigma * loser.sigma * (1.0 - var_l / c2 * w));
    return {new_winner, new_loser};
}

double trueskill_win_probability(const Rating& a, const Rating& b,
                                 const TrueSkillParams& params) {
    double c = std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma +
                         2.0 * params.beta * params.beta);
    return detail::normal_cdf((a.mu - b.mu) / c);
}

}  // namespace agora
