#include "agora/types.hpp"

#include <sstream>

namespace agora {

std::string to_string(Role role) {
    switch (role) {
        case Role::Generator: return "generator";
        case Role::Solver: return "solver";
        case Role::Verifier: return "verifier";
        case Role::Voter: return "voter";
    }
    return "unknown";
}

std::optional<Role> role_from_string(std::string_view name) {
    if (name == "generator") return Role::Generator;
    if (name == "solver") return Role::Solver;
    if (name == "verifier") return Role::Verifier;
    if (name == "voter") return Role::Voter;
    return std::nullopt;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Approve: return "approve";
        case Verdict::Reject: return "reject";
        case Verdict::Abstain: return "abstain";
    }
    return "unknown";
}

std::string to_string(PairResult r) {
    switch (r) {
        case PairResult::AWins: return "a_wins";
        case PairResult::BWins: return "b_wins";
        case PairResult::Tie: return "tie";
    }
    return "unknown";
}

std::string PromptContext::render() const {
    std::ostringstream out;
    if (!preamble.empty()) {
        out << preamble << "\n\n";
    }
    int n = 1;
    for (const Exemplar& ex : exemplars) {
        out << "### Example " << n++ << "\n";
        out << "Problem: " << ex.challenge_prompt << "\n";
        out << "Solution: " << ex.solution_text << "\n";
        if (!ex.explanation.empty()) {
            out << "Explanation: " << ex.explanation << "\n";
        }
        out << "\n";
    }
    out << "### Task\n" << target_prompt;
    return out.str();
}

uint64_t PromptContext::digest() const {
    HashStream h;
    h.str(render()).u64(static_cast<uint64_t>(round));
    if (const auto* solve = std::get_if<SolveTask>(&task)) {
        h.u64(static_cast<uint64_t>(solve->sample_index));
    }
    return h.digest();
}

}  // namespace agora
