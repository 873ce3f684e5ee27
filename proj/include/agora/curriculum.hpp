#pragma once

#include <deque>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "agora/agents.hpp"
#include "agora/types.hpp"

namespace agora {

// Dual-loop difficulty controller state. The inner loop moves d against the
// pass-rate error; the outer loop re-aims the target slightly above the
// windowed mean so the ensemble keeps chasing its own baseline.
struct ControllerState {
    double d = 1.0;
    double alpha = 0.05;
    double v_target = 0.5;
    double margin = 0.05;
    std::deque<double> pass_window;
    size_t window_len = 10;
    double d_floor = 0.0;
    double v_min = 0.1;
    double v_max = 0.9;
};

// Inner loop: d' = max(d_floor, d + alpha * (v_t - v_target)); v_t is pushed
// into the pass window. Rejects non-finite v_t.
ControllerState update_difficulty(ControllerState state, double v_t);

// Outer loop: v_target' = clamp(mean(window) + margin, v_min, v_max).
// Empty window leaves the state untouched.
ControllerState update_target(ControllerState state);

struct DifficultyBuckets {
    std::vector<double> breakpoints = {0.75, 1.5, 2.5, 4.0};
    std::vector<std::string> labels = {"warmup", "standard", "challenging",
                                       "hard", "expert"};
};

// Monotone difficulty -> prompt directive mapping (qualitative word plus a
// numeric hint).
std::string difficulty_directive(double d, const DifficultyBuckets& buckets);

struct GenerationOptions {
    int round = 0;
    int retry_cap = 5;
    bool fixed_template = false;   // "no stochastic template choice" ablation
    bool use_exemplars = true;
    DifficultyBuckets buckets;
    std::string preamble =
        "You are a problem setter for a peer group of reasoning models. "
        "Produce one self-contained problem.";
};

// Fan out n generation requests round-robin across the Q-Group, dedup by
// content digest against `seen` (which is updated), retry dropped slots up to
// the cap. Throws RoundAbort if every generator fails or nothing survives.
// `invoke` is called with (generator index, context) and may throw AgentError.
std::vector<Challenge> generate_challenges(
    const std::vector<size_t>& qgroup, Ensemble& ensemble,
    const ControllerState& state, int n, const std::vector<Exemplar>& exemplars,
    const GenerationOptions& options, const SamplingParams& sampling,
    std::set<uint64_t>& seen);

}  // namespace agora
