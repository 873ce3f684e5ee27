#include "agora/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace agora {

ControllerState update_difficulty(ControllerState state, double v_t) {
    if (!std::isfinite(v_t)) {
        throw std::invalid_argument("update_difficulty: non-finite pass rate");
    }
    if (v_t < 0.0 || v_t > 1.0) {
        throw std::invalid_argument("update_difficulty: pass rate outside [0,1]");
    }
    state.d = std::max(state.d_floor,
                       state.d + state.alpha * (v_t - state.v_target));
    state.pass_window.push_back(v_t);
    while (state.pass_window.size() > state.window_len) {
        state.pass_window.pop_front();
    }
    return state;
}

ControllerState update_target(ControllerState state) {
    if (state.pass_window.empty()) {
        return state;  // target retains its prior value
    }
    double mean = std::accumulate(state.pass_window.begin(),
                                  state.pass_window.end(), 0.0) /
                  double(state.pass_window.size());
    state.v_target = std::clamp(mean + state.margin, state.v_min, state.v_max);
    return state;
}

std::string difficulty_directive(double d, const DifficultyBuckets& buckets) {
    size_t idx = 0;
    while (idx < buckets.breakpoints.size() && d >= buckets.breakpoints[idx]) {
        ++idx;
    }
    const std::string& label =
        buckets.labels.at(std::min(idx, buckets.labels.size() - 1));
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "[difficulty: " << label << " (" << d << ")]";
    return out.str();
}

std::vector<Challenge> generate_challenges(
    const std::vector<size_t>& qgroup, Ensemble& ensemble,
    const ControllerState& state, int n, const std::vector<Exemplar>& exemplars,
    const GenerationOptions& options, const SamplingParams& sampling,
    std::set<uint64_t>& seen) {
    if (n < 1) {
        throw std::invalid_argument("generate_challenges: n must be >= 1");
    }
    if (qgroup.empty()) {
        throw RoundAbort("generation", "Q-Group is empty");
    }

    std::string directive = difficulty_directive(state.d, options.buckets);
    std::vector<Challenge> out;
    int failures = 0;
    int requests = 0;

    for (int ordinal = 0; ordinal < n; ++ordinal) {
        size_t gen_idx = qgroup[ordinal % qgroup.size()];
        bool produced = false;
        for (int retry = 0; retry <= options.retry_cap && !produced; ++retry) {
            PromptContext ctx;
            ctx.preamble = options.preamble;
            if (options.use_exemplars) ctx.exemplars = exemplars;
            ctx.round = options.round;
            GenerateTask task;
            task.difficulty = state.d;
            task.directive = directive;
            task.ordinal = ordinal;
            task.retry = retry;
            task.fixed_template = options.fixed_template;
            ctx.task = task;
            std::ostringstream target;
            target << directive
                   << " Generate one new problem at this difficulty."
                   << " Slot " << ordinal << ", attempt " << retry << ".";
            ctx.target_prompt = target.str();

            ++requests;
            std::string prompt;
            try {
                prompt = trim(ensemble.invoke(gen_idx, ctx, sampling).text);
            } catch (const AgentError&) {
                ++failures;
                continue;
            }
            if (prompt.empty()) {
                ++failures;
                continue;
            }
            uint64_t digest = fnv1a64(prompt);
            if (!seen.insert(digest).second) {
                continue;  // duplicate; retry this slot
            }
            Challenge challenge;
            challenge.id = "ch-" + std::to_string(options.round) + "-" +
                           std::to_string(ordinal);
            challenge.prompt = prompt;
            challenge.difficulty = state.d;
            challenge.generator = ensemble.agent(gen_idx).id;
            challenge.round = options.round;
            challenge.dedup_digest = digest;
            out.push_back(std::move(challenge));
            produced = true;
        }
        // A slot that exhausted its retries is dropped.
    }

    if (out.empty()) {
        std::ostringstream msg;
        msg << "challenge generation produced nothing (" << failures << "/"
            << requests << " requests failed)";
        throw RoundAbort("generation", msg.str());
    }
    return out;
}

}  // namespace agora
