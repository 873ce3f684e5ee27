#include "agora/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "agora/curriculum.hpp"
#include "agora/remote_client.hpp"

namespace agora {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
}

json challenge_to_json(const Challenge& c) {
    json out{{"id", c.id},          {"prompt", c.prompt},
             {"difficulty", c.difficulty}, {"generator", c.generator},
             {"round", c.round},    {"dedup_digest", c.dedup_digest}};
    if (c.gold_answer) out["gold_answer"] = *c.gold_answer;
    return out;
}

Challenge challenge_from_json(const json& in) {
    Challenge c;
    c.id = in.at("id").get<std::string>();
    c.prompt = in.at("prompt").get<std::string>();
    c.difficulty = in.at("difficulty").get<double>();
    c.generator = in.at("generator").get<std::string>();
    c.round = in.at("round").get<int>();
    c.dedup_digest = in.at("dedup_digest").get<uint64_t>();
    if (in.contains("gold_answer")) {
        c.gold_answer = in["gold_answer"].get<std::string>();
    }
    return c;
}

json solution_to_json(const Solution& s) {
    json out{{"id", s.id},       {"challenge_id", s.challenge_id},
             {"author", s.author}, {"text", s.text},
             {"round", s.round}, {"digest", s.digest}};
    if (s.answer) out["answer"] = *s.answer;
    if (s.oracle.correct) out["oracle_correct"] = *s.oracle.correct;
    if (s.oracle.style) out["oracle_style"] = *s.oracle.style;
    return out;
}

Solution solution_from_json(const json& in) {
    Solution s;
    s.id = in.at("id").get<std::string>();
    s.challenge_id = in.at("challenge_id").get<std::string>();
    s.author = in.at("author").get<std::string>();
    s.text = in.at("text").get<std::string>();
    s.round = in.at("round").get<int>();
    s.digest = in.at("digest").get<uint64_t>();
    if (in.contains("answer")) s.answer = in["answer"].get<std::string>();
    if (in.contains("oracle_correct")) {
        s.oracle.correct = in["oracle_correct"].get<bool>();
    }
    if (in.contains("oracle_style")) {
        s.oracle.style = in["oracle_style"].get<double>();
    }
    return s;
}

json record_to_json(const InteractionRecord& r) {
    return json{{"challenge", challenge_to_json(r.challenge)},
                {"solution", solution_to_json(r.solution)},
                {"author", r.author},
                {"explanation", r.explanation},
                {"quality_score", r.quality_score},
                {"round", r.round}};
}

InteractionRecord record_from_json(const json& in) {
    InteractionRecord r;
    r.challenge = challenge_from_json(in.at("challenge"));
    r.solution = solution_from_json(in.at("solution"));
    r.author = in.at("author").get<std::string>();
    r.explanation = in.at("explanation").get<std::string>();
    r.quality_score = in.at("quality_score").get<double>();
    r.round = in.at("round").get<int>();
    return r;
}

json buffer_entry_to_json(const BufferEntry& e) {
    json out{{"prompt", e.prompt},
             {"completion", e.completion},
             {"author", e.author},
             {"round", e.round},
             {"challenge_id", e.challenge_id},
             {"prompt_digest", e.prompt_digest},
             {"completion_digest", e.completion_digest},
             {"topic", e.topic},
             {"difficulty", e.difficulty}};
    if (e.oracle_correct) out["oracle_correct"] = *e.oracle_correct;
    return out;
}

BufferEntry buffer_entry_from_json(const json& in) {
    BufferEntry e;
    e.prompt = in.at("prompt").get<std::string>();
    e.completion = in.at("completion").get<std::string>();
    e.author = in.at("author").get<std::string>();
    e.round = in.at("round").get<int>();
    e.challenge_id = in.at("challenge_id").get<std::string>();
    e.prompt_digest = in.at("prompt_digest").get<uint64_t>();
    e.completion_digest = in.at("completion_digest").get<uint64_t>();
    e.topic = in.at("topic").get<uint64_t>();
    e.difficulty = in.at("difficulty").get<double>();
    if (in.contains("oracle_correct")) {
        e.oracle_correct = in["oracle_correct"].get<bool>();
    }
    return e;
}

std::vector<Exemplar> exemplars_from_history(const EliteHistory& history,
                                             const AblationFlags& flags) {
    std::vector<Exemplar> out;
    if (flags.without_elite_icl) return out;
    for (const InteractionRecord& record : history.records()) {
        Exemplar ex;
        ex.challenge_prompt = record.challenge.prompt;
        ex.solution_text = record.solution.text;
        if (!flags.without_explanation) ex.explanation = record.explanation;
        ex.quality = record.quality_score;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RoundMetrics / RunReport serialization

json RoundMetrics::canonical_json(const std::vector<AgentId>& ids) const {
    json mus = json::object();
    json sigmas = json::object();
    for (size_t i = 0; i < ids.size(); ++i) {
        mus[ids[i]] = mu.at(i);
        sigmas[ids[i]] = sigma.at(i);
    }
    return json{{"round", round},
                {"d", d},
                {"v", v},
                {"v_target", v_target},
                {"f", f},
                {"buffer_fill", buffer_fill},
                {"challenges", challenges},
                {"attempted", attempted},
                {"accepted", accepted},
                {"gated", gated},
                {"mu", mus},
                {"sigma", sigmas}};
}

json RoundMetrics::full_json(const std::vector<AgentId>& ids) const {
    json out = canonical_json(ids);
    out["contamination"] = contamination;
    if (mean_skill) out["mean_skill"] = *mean_skill;
    if (mean_self_loss) out["mean_self_loss"] = *mean_self_loss;
    json phases = json::object();
    for (const auto& [name, ms] : phase_ms) phases[name] = ms;
    out["phase_ms"] = phases;
    return out;
}

json RunReport::to_json() const {
    json ratings = json::array();
    for (const auto& [id, rating] : final_ratings) {
        ratings.push_back(json{{"id", id},
                               {"mu", rating.mu},
                               {"sigma", rating.sigma},
                               {"conservative", rating.conservative()}});
    }
    json eval_series = json::array();
    for (const EvalResult& e : evals) {
        eval_series.push_back(
            json{{"round", e.round}, {"ensemble", e.ensemble}});
    }
    return json{{"rounds_completed", rounds_completed},
                {"halted", halted},
                {"final_ratings", ratings},
                {"evals", eval_series},
                {"dataset_epochs", dataset_epochs},
                {"total_challenges", total_challenges},
                {"total_solutions", total_solutions},
                {"total_accepted", total_accepted},
                {"total_gated", total_gated},
                {"total_contamination", total_contamination},
                {"degraded", degraded}};
}

// ---------------------------------------------------------------------------
// Construction

Orchestrator::Orchestrator(RunConfig config, std::filesystem::path run_dir,
                           Mode mode, bool resume)
    : config_(std::move(config)),
      run_dir_(std::move(run_dir)),
      mode_(mode),
      controller_(config_.controller),
      history_(config_.evolution.elite_k),
      buffer_(config_.evolution.buffer_threshold) {
    std::filesystem::create_directories(run_dir_);

    build_ensemble();
    ratings_.assign(ensemble_.size(),
                    Rating{config_.trueskill.mu0, config_.trueskill.sigma0});
    anchor_state_.epsilon = config_.anchor.epsilon;
    anchor_state_.window = config_.anchor.window;
    next_anchor_round_ = config_.anchor.cadence;

    if (!config_.anchor.path.empty()) {
        anchor_problems_ = load_problem_file(config_.anchor.path);
    }
    if (!config_.eval.path.empty()) {
        eval_problems_ = load_problem_file(config_.eval.path);
    }
    if (mode_ == Mode::Isolated) {
        config_.require_isolated_pool();
        pool_problems_ = load_problem_file(config_.isolated.pool);
        iso_buffers_.assign(ensemble_.size(),
                            HQBuffer(config_.evolution.buffer_threshold));
    }

    open_outputs(resume);
    if (resume) {
        resume_from_checkpoint();
    } else {
        // Echo the effective configuration into the run directory.
        std::ofstream cfg_out(run_dir_ / "config.json",
                              std::ios::binary | std::ios::trunc);
        cfg_out << config_.to_json().dump(2) << '\n';
        write_now(json{
            {"type", "run_start"},
            {"version", 1},
            {"config_digest", hex64(config_.digest())},
            {"seed", config_.run.seed},
            {"mode", mode_ == Mode::Isolated ? "isolated" : "collaborative"}});
        if (config_.ablation.without_fem) {
            std::cerr << "warning: without_fem has no mapped pathway; "
                         "accepted for experiment-matrix parity\n";
        }
    }
}

Orchestrator::~Orchestrator() {
    try {
        poll_trainers(true);
    } catch (...) {
    }
}

void Orchestrator::build_ensemble() {
    config_.require_ensemble(false);
    SimParams sim = config_.sim;
    sim.elite_k = config_.evolution.elite_k;
    for (const AgentSpec& spec : config_.ensemble) {
        AgentHandle handle;
        handle.id = spec.id;
        handle.roles = spec.roles;
        handle.backend = spec.backend;
        std::unique_ptr<AgentBackend> backend;
        if (spec.backend == BackendKind::Simulated) {
            backend = std::make_unique<SimulatedBackend>(
                spec.profile, sim, config_.evolution.answer_marker);
        } else {
            has_remote_ = true;
            backend = std::make_unique<RemoteBackend>(spec.endpoint);
        }
        ensemble_.add(std::move(handle), std::move(backend));
    }
}

void Orchestrator::open_outputs(bool resume) {
    event_log_ = std::make_unique<EventLog>(run_dir_ / "events.jsonl", resume);
    auto mode = std::ios::binary | (resume ? std::ios::app : std::ios::trunc);
    auto open_stream = [&](std::ofstream& out, const char* name,
                           uint64_t& offset) {
        std::filesystem::path path = run_dir_ / name;
        out.open(path, mode);
        if (!out) {
            throw std::runtime_error("cannot open " + path.string());
        }
        offset = resume && std::filesystem::exists(path)
                     ? std::filesystem::file_size(path)
                     : 0;
    };
    open_stream(metrics_out_, "metrics.jsonl", metrics_offset_);
    open_stream(challenges_out_, "challenges.jsonl", challenges_offset_);
    open_stream(trainer_out_, "trainer.jsonl", trainer_offset_);
}

std::optional<double> Orchestrator::mean_skill() const {
    double sum = 0.0;
    int n = 0;
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        if (auto skill = ensemble_.backend(i).oracle_skill()) {
            sum += *skill;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

// ---------------------------------------------------------------------------
// Event plumbing

void Orchestrator::stage(json event) { staged_events_.push_back(std::move(event)); }

void Orchestrator::write_now(const json& event) {
    event_log_->append(event);
    event_log_->flush();
}

void Orchestrator::commit_round(const RoundMetrics& metrics) {
    for (const json& event : staged_events_) {
        event_log_->append(event);
    }
    event_log_->flush();
    staged_events_.clear();

    for (const json& record : staged_challenge_records_) {
        std::string line = record.dump();
        challenges_out_ << line << '\n';
        challenges_offset_ += line.size() + 1;
    }
    challenges_out_.flush();
    staged_challenge_records_.clear();

    std::vector<AgentId> ids;
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        ids.push_back(ensemble_.agent(i).id);
    }
    std::string line = metrics.full_json(ids).dump();
    metrics_out_ << line << '\n';
    metrics_out_.flush();
    metrics_offset_ += line.size() + 1;
}

void Orchestrator::log_trainer(const TrainerOutcome& outcome) {
    json line{{"epoch", outcome.epoch},
              {"status", to_string(outcome.status)},
              {"adapter_id", outcome.adapter_id},
              {"detail", outcome.detail}};
    std::string text = line.dump();
    trainer_out_ << text << '\n';
    trainer_out_.flush();
    trainer_offset_ += text.size() + 1;
}

// ---------------------------------------------------------------------------
// Rollback snapshot

struct Orchestrator::CoreState {
    ControllerState controller;
    std::vector<Rating> ratings;
    AnchorState anchor;
    std::vector<std::pair<InteractionRecord, uint64_t>> history_entries;
    uint64_t history_seq = 0;
    std::vector<BufferEntry> buffer_entries;
    int buffer_epoch = 0;
    std::vector<std::pair<std::vector<BufferEntry>, int>> iso_buffers;
    std::set<uint64_t> seen;
    int next_anchor_round = 0;
    long total_challenges = 0;
    long total_solutions = 0;
    long total_accepted = 0;
    long total_gated = 0;
    long total_contamination = 0;
    std::vector<std::optional<double>> skills;
};

Orchestrator::CoreState Orchestrator::snapshot_core() const {
    CoreState s;
    s.controller = controller_;
    s.ratings = ratings_;
    s.anchor = anchor_state_;
    const auto& records = history_.records();
    const auto& seqs = history_.sequences();
    for (size_t i = 0; i < records.size(); ++i) {
        s.history_entries.emplace_back(records[i], seqs[i]);
    }
    s.history_seq = history_.sequence();
    s.buffer_entries = buffer_.entries();
    s.buffer_epoch = buffer_.epoch();
    for (const HQBuffer& b : iso_buffers_) {
        s.iso_buffers.emplace_back(b.entries(), b.epoch());
    }
    s.seen = seen_digests_;
    s.next_anchor_round = next_anchor_round_;
    s.total_challenges = total_challenges_;
    s.total_solutions = total_solutions_;
    s.total_accepted = total_accepted_;
    s.total_gated = total_gated_;
    s.total_contamination = total_contamination_;
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        s.skills.push_back(ensemble_.backend(i).oracle_skill());
    }
    return s;
}

void Orchestrator::restore_core(const CoreState& s) {
    controller_ = s.controller;
    ratings_ = s.ratings;
    anchor_state_ = s.anchor;
    history_ = EliteHistory(config_.evolution.elite_k);
    history_.restore(s.history_entries, s.history_seq);
    buffer_.restore(s.buffer_entries, s.buffer_epoch);
    for (size_t i = 0; i < iso_buffers_.size(); ++i) {
        iso_buffers_[i].restore(s.iso_buffers[i].first, s.iso_buffers[i].second);
    }
    seen_digests_ = s.seen;
    next_anchor_round_ = s.next_anchor_round;
    total_challenges_ = s.total_challenges;
    total_solutions_ = s.total_solutions;
    total_accepted_ = s.total_accepted;
    total_gated_ = s.total_gated;
    total_contamination_ = s.total_contamination;
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        if (s.skills[i]) {
            double current = *ensemble_.backend(i).oracle_skill();
            ensemble_.backend(i).apply_training(*s.skills[i] - current);
        }
    }
}

// ---------------------------------------------------------------------------
// Phases

SamplingParams Orchestrator::round_sampling(int round_no) const {
    SamplingParams s = config_.sampling;
    if (!config_.ablation.without_dynamic_strategy) {
        double u = HashStream{}
                       .u64(config_.run.seed)
                       .str("jitter")
                       .u64(static_cast<uint64_t>(round_no))
                       .uniform();
        s.temperature = std::max(0.0, s.temperature + 0.2 * (u - 0.5));
    }
    return s;
}

std::vector<Challenge> Orchestrator::phase_generate(int round_no) {
    std::vector<size_t> qgroup = ensemble_.with_role(Role::Generator);
    if (qgroup.empty()) {
        throw RoundAbort("generation", "no generator-role agents configured");
    }
    GenerationOptions options;
    options.round = round_no;
    options.fixed_template = config_.ablation.without_random_qgen;
    options.use_exemplars = !config_.ablation.without_elite_icl;
    options.buckets = config_.buckets;
    std::vector<Exemplar> exemplars =
        exemplars_from_history(history_, config_.ablation);
    std::vector<Challenge> challenges = generate_challenges(
        qgroup, ensemble_, controller_, config_.run.challenges_per_round,
        exemplars, options, round_sampling(round_no), seen_digests_);
    for (const Challenge& c : challenges) {
        stage(json{{"type", "challenge"},
                   {"round", round_no},
                   {"id", c.id},
                   {"generator", c.generator},
                   {"difficulty", c.difficulty},
                   {"digest", hex64(c.dedup_digest)},
                   {"topic", hex64(topic_digest(c.prompt))}});
        staged_challenge_records_.push_back(
            json{{"id", c.id},
                 {"round", c.round},
                 {"difficulty", c.difficulty},
                 {"generator", c.generator},
                 {"prompt", c.prompt},
                 {"digest", hex64(c.dedup_digest)}});
    }
    return challenges;
}

std::vector<std::optional<Solution>> Orchestrator::phase_solve(
    int round_no, const std::vector<Challenge>& challenges,
    const std::vector<size_t>& solvers, const SamplingParams& sampling,
    RoundMetrics& metrics) {
    struct Task {
        size_t solver;
        size_t challenge;
    };
    std::vector<Task> tasks;
    for (size_t c = 0; c < challenges.size(); ++c) {
        for (size_t s : solvers) tasks.push_back({s, c});
    }

    auto solve_one = [&](const Task& task) -> std::optional<Solution> {
        const Challenge& challenge = challenges[task.challenge];
        PromptContext ctx = assemble_context(history_, challenge,
                                             config_.ablation, round_no);
        try {
            AgentResponse response = ensemble_.invoke(task.solver, ctx, sampling);
            Solution sol;
            sol.id = "sol-" + challenge.id + "-" + ensemble_.agent(task.solver).id;
            sol.challenge_id = challenge.id;
            sol.author = ensemble_.agent(task.solver).id;
            sol.text = response.text;
            sol.answer = extract_answer_span(response.text,
                                             config_.evolution.answer_marker);
            sol.round = round_no;
            sol.digest = fnv1a64(sol.text);
            sol.token_logprobs = response.token_logprobs;
            if (response.oracle) sol.oracle = *response.oracle;
            return sol;
        } catch (const AgentError&) {
            return std::nullopt;  // failed solver abstains this round
        }
    };

    std::vector<std::optional<Solution>> results(tasks.size());
    if (has_remote_) {
        std::vector<std::future<std::optional<Solution>>> futures;
        futures.reserve(tasks.size());
        for (const Task& task : tasks) {
            futures.push_back(std::async(std::launch::async, solve_one, task));
        }
        for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
        for (size_t i = 0; i < tasks.size(); ++i) results[i] = solve_one(tasks[i]);
    }

    metrics.attempted = static_cast<int>(tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) {
        if (!results[i]) {
            stage(json{{"type", "solution"},
                       {"round", round_no},
                       {"challenge", challenges[tasks[i].challenge].id},
                       {"author", ensemble_.agent(tasks[i].solver).id},
                       {"failed", true}});
            continue;
        }
        const Solution& sol = *results[i];
        stage(json{{"type", "solution"},
                   {"round", round_no},
                   {"challenge", sol.challenge_id},
                   {"author", sol.author},
                   {"digest", hex64(sol.digest)},
                   {"has_answer", sol.answer.has_value()}});
    }
    return results;
}

// ---------------------------------------------------------------------------
// Collaborative round

std::optional<RoundMetrics> Orchestrator::run_round() {
    if (mode_ == Mode::Isolated) return run_isolated_round();
    return run_collaborative_round();
}

std::optional<RoundMetrics> Orchestrator::run_collaborative_round() {
    CoreState saved = snapshot_core();
    staged_events_.clear();
    staged_challenge_records_.clear();

    const int round_no = round_ + 1;
    RoundMetrics metrics;
    metrics.round = round_no;

    try {
        if (config_.sim_skill_drift_per_round != 0.0) {
            for (size_t i = 0; i < ensemble_.size(); ++i) {
                ensemble_.backend(i).apply_training(
                    config_.sim_skill_drift_per_round);
            }
        }

        stage(json{{"type", "round_start"},
                   {"round", round_no},
                   {"d", controller_.d},
                   {"v_target", controller_.v_target}});

        // Gating snapshot: ensemble mean mu before this round's updates, so
        // the gate never reacts to votes it just caused.
        std::vector<double> gate_mu;
        for (const Rating& r : ratings_) gate_mu.push_back(r.mu);
        double gate_mean =
            std::accumulate(gate_mu.begin(), gate_mu.end(), 0.0) / gate_mu.size();

        SamplingParams sampling = round_sampling(round_no);

        // Phase I: challenge generation.
        auto t0 = Clock::now();
        std::vector<Challenge> challenges = phase_generate(round_no);
        metrics.challenges = static_cast<int>(challenges.size());
        total_challenges_ += challenges.size();
        metrics.phase_ms["generation"] = ms_since(t0);

        // Phase II: solution formulation.
        t0 = Clock::now();
        std::vector<size_t> solvers = ensemble_.with_role(Role::Solver);
        if (solvers.empty()) {
            throw RoundAbort("solving", "no solver-role agents configured");
        }
        std::vector<std::optional<Solution>> raw =
            phase_solve(round_no, challenges, solvers, sampling, metrics);
        std::vector<Solution> solutions;
        for (auto& maybe : raw) {
            if (maybe) solutions.push_back(std::move(*maybe));
        }
        total_solutions_ += solutions.size();
        metrics.phase_ms["solving"] = ms_since(t0);

        if (config_.sampling.logprobs) {
            double total = 0.0;
            int counted = 0;
            for (const Solution& sol : solutions) {
                if (!sol.token_logprobs || sol.token_logprobs->empty()) continue;
                std::vector<double> lps;
                for (const TokenLogprob& lp : *sol.token_logprobs) {
                    lps.push_back(lp.logprob);
                }
                total += sft_loss(lps).per_token_mean;
                ++counted;
            }
            if (counted > 0) metrics.mean_self_loss = total / counted;
        }

        // Phase III: quality evaluation.
        t0 = Clock::now();
        std::vector<bool> accepted(solutions.size(), false);
        if (config_.ablation.without_valid_vote) {
            std::fill(accepted.begin(), accepted.end(), true);
        } else {
            std::vector<size_t> verifiers = ensemble_.with_role(Role::Verifier);
            auto verify_one = [&](const Solution& sol) {
                std::vector<size_t> peers;
                for (size_t idx : verifiers) {
                    if (ensemble_.agent(idx).id != sol.author) peers.push_back(idx);
                }
                return verify_unanimous(sol, peers, ensemble_, sampling, round_no);
            };
            std::vector<VerificationOutcome> outcomes(solutions.size());
            if (has_remote_) {
                std::vector<std::future<VerificationOutcome>> futures;
                for (const Solution& sol : solutions) {
                    futures.push_back(
                        std::async(std::launch::async, verify_one, std::cref(sol)));
                }
                for (size_t i = 0; i < futures.size(); ++i) {
                    outcomes[i] = futures[i].get();
                }
            } else {
                for (size_t i = 0; i < solutions.size(); ++i) {
                    outcomes[i] = verify_one(solutions[i]);
                }
            }
            for (size_t i = 0; i < solutions.size(); ++i) {
                accepted[i] = outcomes[i].accepted;
                json verdicts = json::array();
                for (const auto& [peer, verdict] : outcomes[i].verdicts) {
                    verdicts.push_back(
                        json{{"agent", peer}, {"verdict", to_string(verdict)}});
                }
                stage(json{{"type", "verification"},
                           {"round", round_no},
                           {"challenge", solutions[i].challenge_id},
                           {"solution", solutions[i].id},
                           {"accepted", outcomes[i].accepted},
                           {"verdicts", verdicts}});
            }
        }
        int accepted_count =
            static_cast<int>(std::count(accepted.begin(), accepted.end(), true));
        metrics.accepted = accepted_count;
        total_accepted_ += accepted_count;
        metrics.v = metrics.attempted > 0
                        ? double(accepted_count) / double(metrics.attempted)
                        : 0.0;

        // Pairwise quality votes per challenge.
        // pair wins per solution id, for winner tie-breaking
        std::map<std::string, int> pair_wins;
        if (!config_.ablation.without_quality_vote) {
            for (const Challenge& challenge : challenges) {
                std::vector<const Solution*> pool;
                for (size_t i = 0; i < solutions.size(); ++i) {
                    if (accepted[i] && solutions[i].challenge_id == challenge.id) {
                        pool.push_back(&solutions[i]);
                    }
                }
                if (pool.size() < 2) continue;

                std::vector<std::pair<size_t, size_t>> pairs;
                for (size_t i = 0; i < pool.size(); ++i) {
                    for (size_t j = i + 1; j < pool.size(); ++j) {
                        pairs.emplace_back(i, j);
                    }
                }
                if (pool.size() > 4 && pairs.size() > 6) {
                    // Deterministic partial shuffle, then keep six pairs.
                    for (size_t k = 0; k < 6; ++k) {
                        uint64_t draw = HashStream{}
                                            .u64(config_.run.seed)
                                            .str("pair-sample")
                                            .u64(static_cast<uint64_t>(round_no))
                                            .u64(challenge.dedup_digest)
                                            .u64(k)
                                            .digest();
                        size_t idx = k + size_t(draw % (pairs.size() - k));
                        std::swap(pairs[k], pairs[idx]);
                    }
                    pairs.resize(6);
                }

                for (const auto& [ia, ib] : pairs) {
                    const Solution& a = *pool[ia];
                    const Solution& b = *pool[ib];
                    std::vector<size_t> voters;
                    for (size_t idx : ensemble_.with_role(Role::Voter)) {
                        const AgentId& id = ensemble_.agent(idx).id;
                        if (id != a.author && id != b.author) voters.push_back(idx);
                    }
                    PairOutcome outcome =
                        pair_vote(a, b, voters, ensemble_, sampling, round_no);
                    stage(json{{"type", "pair"},
                               {"round", round_no},
                               {"challenge", challenge.id},
                               {"a", a.id},
                               {"b", b.id},
                               {"votes_a", outcome.votes_a},
                               {"votes_b", outcome.votes_b},
                               {"result", to_string(outcome.result)}});
                    if (outcome.result == PairResult::Tie) continue;

                    const Solution& winner =
                        outcome.result == PairResult::AWins ? a : b;
                    const Solution& loser =
                        outcome.result == PairResult::AWins ? b : a;
                    pair_wins[winner.id] += 1;
                    size_t wi = *ensemble_.index_of(winner.author);
                    size_t li = *ensemble_.index_of(loser.author);
                    Rating pre_w = ratings_[wi];
                    Rating pre_l = ratings_[li];
                    auto [post_w, post_l] = trueskill_update(
                        pre_w, pre_l, config_.trueskill, MatchOutcome::Decisive);
                    ratings_[wi] = post_w;
                    ratings_[li] = post_l;
                    stage(json{{"type", "rating_update"},
                               {"round", round_no},
                               {"winner", winner.author},
                               {"loser", loser.author},
                               {"winner_mu_pre", pre_w.mu},
                               {"winner_mu_post", post_w.mu},
                               {"winner_sigma_pre", pre_w.sigma},
                               {"winner_sigma_post", post_w.sigma},
                               {"loser_mu_pre", pre_l.mu},
                               {"loser_mu_post", post_l.mu},
                               {"loser_sigma_pre", pre_l.sigma},
                               {"loser_sigma_post", post_l.sigma}});
                }
            }
        }
        metrics.phase_ms["evaluation"] = ms_since(t0);

        // Phase IV: model evolution.
        t0 = Clock::now();
        for (const Challenge& challenge : challenges) {
            std::vector<const Solution*> pool;
            for (size_t i = 0; i < solutions.size(); ++i) {
                if (accepted[i] && solutions[i].challenge_id == challenge.id) {
                    pool.push_back(&solutions[i]);
                }
            }
            if (pool.empty()) continue;

            // Winner: highest post-vote mu, then pairwise wins, then id.
            const Solution* winner = pool.front();
            auto mu_of = [&](const Solution* s) {
                return ratings_[*ensemble_.index_of(s->author)].mu;
            };
            for (const Solution* cand : pool) {
                double a = mu_of(cand);
                double b = mu_of(winner);
                if (a > b) {
                    winner = cand;
                } else if (a == b) {
                    int wa = pair_wins.count(cand->id) ? pair_wins[cand->id] : 0;
                    int wb = pair_wins.count(winner->id) ? pair_wins[winner->id] : 0;
                    if (wa > wb || (wa == wb && cand->id < winner->id)) {
                        winner = cand;
                    }
                }
            }

            std::string explanation;
            if (!config_.ablation.without_explanation) {
                PromptContext ctx;
                ctx.preamble =
                    "Your solution was selected as the round's best. Teach "
                    "your peers.";
                ctx.target_prompt =
                    "Explain the key steps of your solution.\n\nProblem: " +
                    challenge.prompt + "\n\nYour solution:\n" + winner->text;
                ctx.round = round_no;
                ExplainTask task;
                task.challenge_digest = challenge.dedup_digest;
                task.solution_digest = winner->digest;
                ctx.task = task;
                size_t author_idx = *ensemble_.index_of(winner->author);
                try {
                    explanation =
                        trim(ensemble_.invoke(author_idx, ctx, sampling).text);
                } catch (const AgentError&) {
                    explanation = "(explanation unavailable: author unreachable)";
                }
            }

            InteractionRecord record;
            record.challenge = challenge;
            record.solution = *winner;
            record.author = winner->author;
            record.explanation = explanation;
            record.quality_score = mu_of(winner);
            record.round = round_no;
            stage(json{{"type", "record"},
                       {"round", round_no},
                       {"challenge", challenge.id},
                       {"author", record.author},
                       {"quality", record.quality_score},
                       {"explanation_digest", hex64(fnv1a64(explanation))}});
            history_.update(record);

            size_t author_idx = *ensemble_.index_of(winner->author);
            int gate = indicator(true, gate_mu[author_idx], gate_mean);

            BufferEntry entry;
            entry.prompt = challenge.prompt;
            entry.completion = winner->text;
            entry.author = winner->author;
            entry.round = round_no;
            entry.challenge_id = challenge.id;
            entry.prompt_digest = fnv1a64(entry.prompt);
            entry.completion_digest = fnv1a64(entry.completion);
            entry.topic = topic_digest(entry.prompt);
            entry.difficulty = challenge.difficulty;
            entry.oracle_correct = winner->oracle.correct;

            std::optional<FlushEvent> flush = buffer_.push(entry, gate);
            if (gate == 1) {
                metrics.gated += 1;
                total_gated_ += 1;
                if (entry.oracle_correct && !*entry.oracle_correct) {
                    metrics.contamination += 1;
                    total_contamination_ += 1;
                }
            }
            stage(json{{"type", "gate"},
                       {"round", round_no},
                       {"challenge", challenge.id},
                       {"author", record.author},
                       {"accepted", true},
                       {"author_mu", gate_mu[author_idx]},
                       {"mean_mu", gate_mean},
                       {"gate", gate},
                       {"prompt_digest", hex64(entry.prompt_digest)},
                       {"completion_digest", hex64(entry.completion_digest)},
                       {"fill", buffer_.size()}});

            if (flush) {
                stage(json{{"type", "flush"},
                           {"round", round_no},
                           {"epoch", flush->epoch},
                           {"count", flush->entries.size()}});
                std::optional<DatasetFile> dataset;
                if (!config_.ablation.without_parametric) {
                    dataset = sft_export(*flush, run_dir_ / "datasets",
                                         config_.trainer.lora);
                    stage(json{{"type", "export"},
                               {"round", round_no},
                               {"epoch", flush->epoch},
                               {"count", dataset->count},
                               {"digest", dataset->digest},
                               {"path", dataset->path.filename().string()}});
                    dispatch_trainer(*flush, dataset);
                }
            }
        }

        // Controller updates (inner then outer loop).
        if (!config_.ablation.without_difficulty_control) {
            double d_pre = controller_.d;
            double target_pre = controller_.v_target;
            controller_ = update_difficulty(controller_, metrics.v);
            controller_ = update_target(controller_);
            stage(json{{"type", "controller"},
                       {"round", round_no},
                       {"v", metrics.v},
                       {"d_pre", d_pre},
                       {"d_post", controller_.d},
                       {"v_target_pre", target_pre},
                       {"v_target_post", controller_.v_target}});
        }

        // External anchoring on cadence or surprise alert.
        bool anchor_enabled = !anchor_problems_.empty() &&
                              !config_.ablation.without_external_anchor;
        if (anchor_enabled && round_no >= next_anchor_round_) {
            anchor_pass();
        }
        metrics.phase_ms["evolution"] = ms_since(t0);

        metrics.d = controller_.d;
        metrics.v_target = controller_.v_target;
        metrics.f = anchor_state_.f;
        metrics.buffer_fill = buffer_.size();
        for (const Rating& r : ratings_) {
            metrics.mu.push_back(r.mu);
            metrics.sigma.push_back(r.sigma);
        }
        metrics.mean_skill = mean_skill();

        std::vector<AgentId> ids;
        for (size_t i = 0; i < ensemble_.size(); ++i) {
            ids.push_back(ensemble_.agent(i).id);
        }
        json round_end = metrics.canonical_json(ids);
        round_end["type"] = "round_end";
        stage(round_end);

        commit_round(metrics);
        round_ = round_no;
        abort_streak_ = 0;
        poll_trainers(false);
        return metrics;
    } catch (const RoundAbort& abort) {
        restore_core(saved);
        staged_events_.clear();
        staged_challenge_records_.clear();
        ++abort_streak_;
        write_now(json{{"type", "round_abort"},
                       {"round", round_no},
                       {"phase", abort.phase},
                       {"reason", abort.what()},
                       {"streak", abort_streak_}});
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Isolated evolution (self-consistency baseline)

std::optional<RoundMetrics> Orchestrator::run_isolated_round() {
    CoreState saved = snapshot_core();
    staged_events_.clear();
    staged_challenge_records_.clear();

    const int round_no = round_ + 1;
    RoundMetrics metrics;
    metrics.round = round_no;

    try {
        if (config_.sim_skill_drift_per_round != 0.0) {
            for (size_t i = 0; i < ensemble_.size(); ++i) {
                ensemble_.backend(i).apply_training(
                    config_.sim_skill_drift_per_round);
            }
        }

        const Challenge& problem =
            pool_problems_[(round_no - 1) % pool_problems_.size()];
        metrics.challenges = 1;
        metrics.d = problem.difficulty;

        stage(json{{"type", "round_start"},
                   {"round", round_no},
                   {"mode", "isolated"},
                   {"problem", problem.id}});

        SamplingParams sampling = round_sampling(round_no);
        std::vector<size_t> solvers = ensemble_.with_role(Role::Solver);
        if (solvers.empty()) {
            throw RoundAbort("solving", "no solver-role agents configured");
        }

        const int n_samples = config_.isolated.samples_per_problem;
        int accepted_agents = 0;
        for (size_t solver : solvers) {
            std::vector<Solution> samples;
            for (int s = 0; s < n_samples; ++s) {
                PromptContext ctx;
                ctx.preamble =
                    "Solve the problem. Finish with the final answer after "
                    "'####'.";
                ctx.target_prompt = problem.prompt;
                ctx.round = round_no;
                SolveTask task;
                task.challenge = problem;
                task.sample_index = s;
                ctx.task = task;
                try {
                    AgentResponse response = ensemble_.invoke(solver, ctx, sampling);
                    Solution sol;
                    sol.id = "iso-" + std::to_string(round_no) + "-" +
                             ensemble_.agent(solver).id + "-" + std::to_string(s);
                    sol.challenge_id = problem.id;
                    sol.author = ensemble_.agent(solver).id;
                    sol.text = response.text;
                    sol.answer = extract_answer_span(
                        response.text, config_.evolution.answer_marker);
                    sol.round = round_no;
                    sol.digest = fnv1a64(sol.text);
                    if (response.oracle) sol.oracle = *response.oracle;
                    samples.push_back(std::move(sol));
                } catch (const AgentError&) {
                    // dropped sample
                }
            }
            metrics.attempted += static_cast<int>(samples.size());
            total_solutions_ += samples.size();

            // Strict majority over normalized final answers.
            std::vector<std::optional<std::string>> answers;
            for (const Solution& s : samples) answers.push_back(s.answer);
            std::optional<std::string> majority = strict_majority(answers);

            const Solution* trace = nullptr;
            if (majority) {
                for (const Solution& s : samples) {
                    if (s.answer && normalize_answer(*s.answer) == *majority) {
                        trace = &s;
                        break;
                    }
                }
            }

            stage(json{{"type", "self_consistency"},
                       {"round", round_no},
                       {"agent", ensemble_.agent(solver).id},
                       {"problem", problem.id},
                       {"samples", samples.size()},
                       {"has_majority", majority.has_value()},
                       {"accepted", trace != nullptr}});

            if (trace == nullptr) continue;
            ++accepted_agents;
            metrics.accepted += 1;
            total_accepted_ += 1;

            BufferEntry entry;
            entry.prompt = problem.prompt;
            entry.completion = trace->text;
            entry.author = trace->author;
            entry.round = round_no;
            entry.challenge_id = problem.id;
            entry.prompt_digest = fnv1a64(entry.prompt);
            entry.completion_digest = fnv1a64(entry.completion);
            entry.topic = topic_digest(entry.prompt);
            entry.difficulty = problem.difficulty;
            entry.oracle_correct = trace->oracle.correct;

            if (entry.oracle_correct && !*entry.oracle_correct) {
                metrics.contamination += 1;
                total_contamination_ += 1;
            }
            metrics.gated += 1;
            total_gated_ += 1;

            std::optional<FlushEvent> flush = iso_buffers_[solver].push(entry, 1);
            if (flush) {
                stage(json{{"type", "flush"},
                           {"round", round_no},
                           {"agent", ensemble_.agent(solver).id},
                           {"epoch", flush->epoch},
                           {"count", flush->entries.size()}});
                if (!config_.ablation.without_parametric) {
                    DatasetFile dataset = sft_export(
                        *flush,
                        run_dir_ / "datasets" / ensemble_.agent(solver).id,
                        config_.trainer.lora);
                    stage(json{{"type", "export"},
                               {"round", round_no},
                               {"agent", ensemble_.agent(solver).id},
                               {"epoch", flush->epoch},
                               {"count", dataset.count},
                               {"digest", dataset.digest},
                               {"path", dataset.path.filename().string()}});
                    if (config_.trainer.kind == TrainerConfig::Kind::Simulated) {
                        // Isolated: only the author's own model trains.
                        double sum = 0.0;
                        for (const BufferEntry& e : flush->entries) {
                            sum += entry_training_weight(e);
                        }
                        double delta = config_.sim.train_gain * sum /
                                       double(config_.evolution.buffer_threshold) *
                                       flush_diversity_factor(*flush);
                        ensemble_.backend(solver).apply_training(delta);
                        TrainerOutcome outcome;
                        outcome.status = TrainerOutcome::Status::Ok;
                        outcome.epoch = flush->epoch;
                        outcome.adapter_id = "sim-" + ensemble_.agent(solver).id +
                                             "-epoch-" + std::to_string(flush->epoch);
                        log_trainer(outcome);
                    } else {
                        dispatch_trainer(*flush, dataset);
                    }
                }
            }
        }

        metrics.v = solvers.empty()
                        ? 0.0
                        : double(accepted_agents) / double(solvers.size());
        metrics.v_target = controller_.v_target;
        size_t fill = 0;
        for (const HQBuffer& b : iso_buffers_) fill += b.size();
        metrics.buffer_fill = fill;
        for (const Rating& r : ratings_) {
            metrics.mu.push_back(r.mu);
            metrics.sigma.push_back(r.sigma);
        }
        metrics.mean_skill = mean_skill();

        std::vector<AgentId> ids;
        for (size_t i = 0; i < ensemble_.size(); ++i) {
            ids.push_back(ensemble_.agent(i).id);
        }
        json round_end = metrics.canonical_json(ids);
        round_end["type"] = "round_end";
        stage(round_end);

        commit_round(metrics);
        round_ = round_no;
        abort_streak_ = 0;
        poll_trainers(false);
        return metrics;
    } catch (const RoundAbort& abort) {
        restore_core(saved);
        staged_events_.clear();
        staged_challenge_records_.clear();
        ++abort_streak_;
        write_now(json{{"type", "round_abort"},
                       {"round", round_no},
                       {"phase", abort.phase},
                       {"reason", abort.what()},
                       {"streak", abort_streak_}});
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Anchoring, evals, trainers

void Orchestrator::anchor_pass() {
    if (anchor_problems_.empty()) {
        std::cerr << "warning: anchor pass requested with no anchor set\n";
        return;
    }
    const int round_no = round_ + 1;
    SamplingParams sampling = config_.sampling;

    std::vector<double> accuracies;
    json per_agent = json::array();
    for (size_t idx = 0; idx < ensemble_.size(); ++idx) {
        int correct = 0;
        for (const Challenge& problem : anchor_problems_) {
            PromptContext ctx;
            ctx.preamble =
                "Solve the problem. Finish with the final answer after '####'.";
            ctx.target_prompt = problem.prompt;
            ctx.round = round_no;
            SolveTask task;
            task.challenge = problem;
            ctx.task = task;
            try {
                AgentResponse response = ensemble_.invoke(idx, ctx, sampling);
                auto answer = extract_answer_span(response.text,
                                                  config_.evolution.answer_marker);
                if (answer && problem.gold_answer &&
                    normalize_answer(*answer) ==
                        normalize_answer(*problem.gold_answer)) {
                    ++correct;
                }
            } catch (const AgentError&) {
                // missed problem
            }
        }
        double acc = double(correct) / double(anchor_problems_.size());
        accuracies.push_back(acc);
        per_agent.push_back(
            json{{"agent", ensemble_.agent(idx).id}, {"accuracy", acc}});
    }

    double mean_acc =
        std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
        accuracies.size();
    anchor_state_.observe(mean_acc);

    bool calibrated = anchor_calibrate(ratings_, accuracies,
                                       config_.anchor.lambda, config_.trueskill);

    json mu_post = json::array();
    for (size_t idx = 0; idx < ensemble_.size(); ++idx) {
        mu_post.push_back(json{{"agent", ensemble_.agent(idx).id},
                               {"mu", ratings_[idx].mu}});
    }
    stage(json{{"type", "anchor"},
               {"round", round_no},
               {"accuracies", per_agent},
               {"mu_bar", anchor_state_.mu_bar},
               {"mu_star", anchor_state_.mu_star},
               {"f", anchor_state_.f},
               {"calibrated", calibrated},
               {"mu_post", mu_post}});

    // High surprise pulls the next pass forward to the very next round.
    next_anchor_round_ =
        round_no + (anchor_state_.f > config_.anchor.surprise_alert
                        ? 1
                        : config_.anchor.cadence);
}

EvalResult Orchestrator::benchmark_eval() {
    EvalResult result;
    result.round = round_;
    if (eval_problems_.empty()) return result;

    SamplingParams sampling = config_.sampling;
    json per_agent = json::array();
    for (size_t idx = 0; idx < ensemble_.size(); ++idx) {
        std::vector<int> outcomes;
        for (const Challenge& problem : eval_problems_) {
            PromptContext ctx;
            ctx.preamble =
                "Solve the problem. Finish with the final answer after '####'.";
            ctx.target_prompt = problem.prompt;
            ctx.round = round_;
            SolveTask task;
            task.challenge = problem;
            ctx.task = task;
            int got = 0;
            try {
                AgentResponse response = ensemble_.invoke(idx, ctx, sampling);
                auto answer = extract_answer_span(response.text,
                                                  config_.evolution.answer_marker);
                if (answer && problem.gold_answer &&
                    normalize_answer(*answer) ==
                        normalize_answer(*problem.gold_answer)) {
                    got = 1;
                }
            } catch (const AgentError&) {
                got = 0;
            }
            outcomes.push_back(got);
        }
        double score = pass_at_k(outcomes, int(outcomes.size()));
        result.per_agent.push_back(score);
        per_agent.push_back(
            json{{"agent", ensemble_.agent(idx).id}, {"score", score}});
    }
    result.ensemble =
        std::accumulate(result.per_agent.begin(), result.per_agent.end(), 0.0) /
        result.per_agent.size();
    evals_.push_back(result);
    write_now(json{{"type", "eval"},
                   {"round", round_},
                   {"per_agent", per_agent},
                   {"ensemble", result.ensemble}});
    return result;
}

// How instructive one dataset entry is: flawed traces poison; clean traces
// teach in proportion to difficulty, and to the author's clarity and
// reliability at that depth (the qualities that quality votes and anchor
// accuracy each partially observe).
double Orchestrator::entry_training_weight(const BufferEntry& e) const {
    double w = 1.0 + config_.sim.difficulty_weight * e.difficulty;
    if (e.oracle_correct && !*e.oracle_correct) {
        return -config_.sim.poison_factor * w;
    }
    double teacher = 0.5;
    if (auto idx = ensemble_.index_of(e.author)) {
        auto profile = ensemble_.backend(*idx).profile();
        auto skill = ensemble_.backend(*idx).oracle_skill();
        if (profile && skill) {
            teacher = logistic(profile->style_quality) *
                      solve_probability(*skill, e.difficulty);
        }
    }
    return w * teacher;
}

double Orchestrator::flush_diversity_factor(const FlushEvent& flush) const {
    std::set<uint64_t> topics;
    for (const BufferEntry& e : flush.entries) topics.insert(e.topic);
    double diversity = double(topics.size()) / double(flush.entries.size());
    return config_.sim.diversity_floor +
           (1.0 - config_.sim.diversity_floor) * diversity;
}

void Orchestrator::apply_simulated_training(const FlushEvent& flush) {
    double factor = flush_diversity_factor(flush);
    for (size_t idx = 0; idx < ensemble_.size(); ++idx) {
        const AgentId& id = ensemble_.agent(idx).id;
        double sum = 0.0;
        for (const BufferEntry& e : flush.entries) {
            if (config_.evolution.exclude_self && e.author == id) continue;
            sum += entry_training_weight(e);
        }
        double delta = config_.sim.train_gain * sum /
                       double(config_.evolution.buffer_threshold) * factor;
        ensemble_.backend(idx).apply_training(delta);
    }
}

void Orchestrator::dispatch_trainer(const FlushEvent& flush,
                                    const std::optional<DatasetFile>& dataset) {
    switch (config_.trainer.kind) {
        case TrainerConfig::Kind::None: {
            TrainerOutcome outcome;
            outcome.status = TrainerOutcome::Status::Skipped;
            outcome.epoch = flush.epoch;
            outcome.detail = "no trainer configured; dataset retained";
            log_trainer(outcome);
            return;
        }
        case TrainerConfig::Kind::Simulated: {
            // Synchronous by design: replay determinism matters more than
            // latency for desk-scale physics.
            apply_simulated_training(flush);
            TrainerOutcome outcome;
            outcome.status = TrainerOutcome::Status::Ok;
            outcome.epoch = flush.epoch;
            outcome.adapter_id = "sim-epoch-" + std::to_string(flush.epoch);
            log_trainer(outcome);
            return;
        }
        case TrainerConfig::Kind::Command:
        case TrainerConfig::Kind::Webhook: {
            if (!dataset) return;
            TrainerConfig trainer = config_.trainer;
            DatasetFile ds = *dataset;
            int epoch = flush.epoch;
            pending_trainers_.emplace_back(
                epoch, std::async(std::launch::async, [trainer, ds, epoch] {
                    return trainer_hook(trainer, ds, epoch);
                }));
            return;
        }
    }
}

void Orchestrator::poll_trainers(bool block) {
    // Drain in launch order so the trainer log stays deterministic.
    while (!pending_trainers_.empty()) {
        auto& [epoch, future] = pending_trainers_.front();
        if (!block &&
            future.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
            return;
        }
        TrainerOutcome outcome = future.get();
        if (outcome.status == TrainerOutcome::Status::Failed) {
            degraded_ = true;
        }
        log_trainer(outcome);
        pending_trainers_.erase(pending_trainers_.begin());
    }
}

// ---------------------------------------------------------------------------
// Experiment loop

RunReport Orchestrator::run_experiment() {
    bool eval_enabled = !eval_problems_.empty();
    if (eval_enabled && round_ == 0 && evals_.empty()) {
        benchmark_eval();  // baseline
    }

    bool halted = false;
    while (round_ < config_.run.rounds) {
        std::optional<RoundMetrics> metrics = run_round();
        if (!metrics) {
            if (abort_streak_ >= config_.run.halt_after_aborts) {
                halted = true;
                break;
            }
            continue;
        }
        if (eval_enabled && config_.run.eval_cadence > 0 &&
            round_ % config_.run.eval_cadence == 0 &&
            round_ < config_.run.rounds) {
            benchmark_eval();
        }
        if (config_.run.checkpoint_cadence > 0 &&
            round_ % config_.run.checkpoint_cadence == 0) {
            checkpoint_now();
        }
    }

    poll_trainers(true);
    if (eval_enabled && (evals_.empty() || evals_.back().round != round_)) {
        benchmark_eval();
    }
    checkpoint_now();
    write_now(json{
        {"type", "run_end"}, {"rounds_completed", round_}, {"halted", halted}});

    RunReport report;
    report.rounds_completed = round_;
    report.halted = halted;
    report.evals = evals_;
    report.dataset_epochs = buffer_.epoch();
    for (const HQBuffer& b : iso_buffers_) report.dataset_epochs += b.epoch();
    report.total_challenges = total_challenges_;
    report.total_solutions = total_solutions_;
    report.total_accepted = total_accepted_;
    report.total_gated = total_gated_;
    report.total_contamination = total_contamination_;
    report.degraded = degraded_;
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        report.final_ratings.emplace_back(ensemble_.agent(i).id, ratings_[i]);
    }
    std::sort(report.final_ratings.begin(), report.final_ratings.end(),
              [](const auto& a, const auto& b) {
                  if (a.second.conservative() != b.second.conservative()) {
                      return a.second.conservative() > b.second.conservative();
                  }
                  return a.first < b.first;
              });

    std::ofstream report_out(run_dir_ / "report.json",
                             std::ios::binary | std::ios::trunc);
    report_out << report.to_json().dump(2) << '\n';
    return report;
}

// ---------------------------------------------------------------------------
// Checkpointing

json Orchestrator::state_to_json() const {
    json controller{{"d", controller_.d},
                    {"alpha", controller_.alpha},
                    {"v_target", controller_.v_target},
                    {"margin", controller_.margin},
                    {"window", controller_.pass_window},
                    {"window_len", controller_.window_len},
                    {"d_floor", controller_.d_floor},
                    {"v_min", controller_.v_min},
                    {"v_max", controller_.v_max}};

    json ratings = json::array();
    for (const Rating& r : ratings_) {
        ratings.push_back(json{{"mu", r.mu}, {"sigma", r.sigma}});
    }

    json anchor{{"mu_star", anchor_state_.mu_star},
                {"mu_bar", anchor_state_.mu_bar},
                {"epsilon", anchor_state_.epsilon},
                {"f", anchor_state_.f},
                {"history", anchor_state_.history},
                {"window", anchor_state_.window}};

    json history_entries = json::array();
    const auto& records = history_.records();
    const auto& seqs = history_.sequences();
    for (size_t i = 0; i < records.size(); ++i) {
        history_entries.push_back(
            json{{"seq", seqs[i]}, {"record", record_to_json(records[i])}});
    }

    json buffer_entries = json::array();
    for (const BufferEntry& e : buffer_.entries()) {
        buffer_entries.push_back(buffer_entry_to_json(e));
    }

    json iso = json::array();
    for (const HQBuffer& b : iso_buffers_) {
        json entries = json::array();
        for (const BufferEntry& e : b.entries()) {
            entries.push_back(buffer_entry_to_json(e));
        }
        iso.push_back(json{{"epoch", b.epoch()}, {"entries", entries}});
    }

    json skills = json::array();
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        auto skill = ensemble_.backend(i).oracle_skill();
        skills.push_back(skill ? json(*skill) : json(nullptr));
    }

    json evals = json::array();
    for (const EvalResult& e : evals_) {
        evals.push_back(json{{"round", e.round},
                             {"per_agent", e.per_agent},
                             {"ensemble", e.ensemble}});
    }

    return json{
        {"round", round_},
        {"abort_streak", abort_streak_},
        {"next_anchor_round", next_anchor_round_},
        {"degraded", degraded_},
        {"controller", controller},
        {"ratings", ratings},
        {"anchor", anchor},
        {"history", {{"next_seq", history_.sequence()}, {"entries", history_entries}}},
        {"buffer", {{"epoch", buffer_.epoch()}, {"entries", buffer_entries}}},
        {"iso_buffers", iso},
        {"seen", seen_digests_},
        {"counters",
         {{"challenges", total_challenges_},
          {"solutions", total_solutions_},
          {"accepted", total_accepted_},
          {"gated", total_gated_},
          {"contamination", total_contamination_}}},
        {"skills", skills},
        {"evals", evals},
        {"offsets",
         {{"events", event_log_->offset()},
          {"metrics", metrics_offset_},
          {"challenges", challenges_offset_},
          {"trainer", trainer_offset_}}},
    };
}

void Orchestrator::state_from_json(const json& s) {
    round_ = s.at("round").get<int>();
    abort_streak_ = s.at("abort_streak").get<int>();
    next_anchor_round_ = s.at("next_anchor_round").get<int>();
    degraded_ = s.at("degraded").get<bool>();

    const json& c = s.at("controller");
    controller_.d = c.at("d").get<double>();
    controller_.alpha = c.at("alpha").get<double>();
    controller_.v_target = c.at("v_target").get<double>();
    controller_.margin = c.at("margin").get<double>();
    controller_.pass_window.clear();
    for (double v : c.at("window")) controller_.pass_window.push_back(v);
    controller_.window_len = c.at("window_len").get<size_t>();
    controller_.d_floor = c.at("d_floor").get<double>();
    controller_.v_min = c.at("v_min").get<double>();
    controller_.v_max = c.at("v_max").get<double>();

    ratings_.clear();
    for (const json& r : s.at("ratings")) {
        ratings_.push_back(
            Rating{r.at("mu").get<double>(), r.at("sigma").get<double>()});
    }
    if (ratings_.size() != ensemble_.size()) {
        throw ConfigError("checkpoint ensemble size mismatch");
    }

    const json& a = s.at("anchor");
    anchor_state_.mu_star = a.at("mu_star").get<double>();
    anchor_state_.mu_bar = a.at("mu_bar").get<double>();
    anchor_state_.epsilon = a.at("epsilon").get<double>();
    anchor_state_.f = a.at("f").get<double>();
    anchor_state_.history.clear();
    for (double v : a.at("history")) anchor_state_.history.push_back(v);
    anchor_state_.window = a.at("window").get<size_t>();

    std::vector<std::pair<InteractionRecord, uint64_t>> entries;
    for (const json& e : s.at("history").at("entries")) {
        entries.emplace_back(record_from_json(e.at("record")),
                             e.at("seq").get<uint64_t>());
    }
    history_ = EliteHistory(config_.evolution.elite_k);
    history_.restore(std::move(entries),
                     s.at("history").at("next_seq").get<uint64_t>());

    std::vector<BufferEntry> buffer_entries;
    for (const json& e : s.at("buffer").at("entries")) {
        buffer_entries.push_back(buffer_entry_from_json(e));
    }
    buffer_.restore(std::move(buffer_entries),
                    s.at("buffer").at("epoch").get<int>());

    const json& iso = s.at("iso_buffers");
    if (!iso.empty()) {
        if (iso.size() != iso_buffers_.size()) {
            throw ConfigError("checkpoint isolated-buffer count mismatch");
        }
        for (size_t i = 0; i < iso_buffers_.size(); ++i) {
            std::vector<BufferEntry> es;
            for (const json& e : iso[i].at("entries")) {
                es.push_back(buffer_entry_from_json(e));
            }
            iso_buffers_[i].restore(std::move(es), iso[i].at("epoch").get<int>());
        }
    }

    seen_digests_.clear();
    for (uint64_t v : s.at("seen")) seen_digests_.insert(v);

    const json& counters = s.at("counters");
    total_challenges_ = counters.at("challenges").get<long>();
    total_solutions_ = counters.at("solutions").get<long>();
    total_accepted_ = counters.at("accepted").get<long>();
    total_gated_ = counters.at("gated").get<long>();
    total_contamination_ = counters.at("contamination").get<long>();

    const json& skills = s.at("skills");
    for (size_t i = 0; i < ensemble_.size(); ++i) {
        if (!skills.at(i).is_null()) {
            double target = skills.at(i).get<double>();
            double current = ensemble_.backend(i).oracle_skill().value_or(0.0);
            ensemble_.backend(i).apply_training(target - current);
        }
    }

    evals_.clear();
    for (const json& e : s.at("evals")) {
        EvalResult r;
        r.round = e.at("round").get<int>();
        for (double v : e.at("per_agent")) r.per_agent.push_back(v);
        r.ensemble = e.at("ensemble").get<double>();
        evals_.push_back(std::move(r));
    }
}

std::filesystem::path Orchestrator::checkpoint_now() {
    poll_trainers(false);
    event_log_->flush();
    metrics_out_.flush();
    challenges_out_.flush();
    trainer_out_.flush();

    json snapshot{{"version", 1},
                  {"config_digest", hex64(config_.digest())},
                  {"mode", mode_ == Mode::Isolated ? "isolated" : "collaborative"},
                  {"state", state_to_json()}};
    snapshot["digest"] = hex64(fnv1a64(snapshot["state"].dump()));

    std::filesystem::path dir = run_dir_ / "checkpoints";
    std::filesystem::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_%06d.json", round_);
    std::filesystem::path path = dir / name;
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << snapshot.dump() << '\n';
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("checkpoint write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
    return path;
}

std::filesystem::path Orchestrator::latest_checkpoint(
    const std::filesystem::path& run_dir) {
    std::filesystem::path dir = run_dir / "checkpoints";
    std::filesystem::path best;
    if (!std::filesystem::exists(dir)) return best;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        if (best.empty() || entry.path().filename() > best.filename()) {
            best = entry.path();
        }
    }
    return best;
}

void Orchestrator::resume_from_checkpoint() {
    std::filesystem::path path = latest_checkpoint(run_dir_);
    if (path.empty()) {
        throw ConfigError("no checkpoint found under " + run_dir_.string());
    }
    json snapshot;
    {
        std::ifstream in(path, std::ios::binary);
        try {
            in >> snapshot;
        } catch (const json::exception& e) {
            throw ConfigError("checkpoint " + path.string() +
                              " is corrupt: " + e.what());
        }
    }
    if (!snapshot.contains("version") || snapshot["version"].get<int>() != 1) {
        throw ConfigError("checkpoint " + path.string() +
                          " has an unsupported version");
    }
    if (snapshot.at("config_digest").get<std::string>() !=
        hex64(config_.digest())) {
        throw ConfigError("checkpoint " + path.string() +
                          " was produced by a different configuration");
    }
    std::string expected = snapshot.at("digest").get<std::string>();
    if (hex64(fnv1a64(snapshot.at("state").dump())) != expected) {
        throw ConfigError("checkpoint " + path.string() +
                          " failed its integrity check");
    }
    std::string mode = snapshot.at("mode").get<std::string>();
    if ((mode == "isolated") != (mode_ == Mode::Isolated)) {
        throw ConfigError("checkpoint mode does not match requested mode");
    }

    state_from_json(snapshot.at("state"));

    // Drop anything written after the snapshot so the continuation replays
    // cleanly.
    const json& offsets = snapshot.at("state").at("offsets");
    event_log_->truncate_to(offsets.at("events").get<uint64_t>());

    auto reopen = [&](std::ofstream& out, const char* name, uint64_t offset,
                      uint64_t& tracked) {
        out.close();
        std::filesystem::path p = run_dir_ / name;
        std::filesystem::resize_file(p, offset);
        out.open(p, std::ios::binary | std::ios::app);
        tracked = offset;
    };
    reopen(metrics_out_, "metrics.jsonl", offsets.at("metrics").get<uint64_t>(),
           metrics_offset_);
    reopen(challenges_out_, "challenges.jsonl",
           offsets.at("challenges").get<uint64_t>(), challenges_offset_);
    reopen(trainer_out_, "trainer.jsonl", offsets.at("trainer").get<uint64_t>(),
           trainer_offset_);
}

}  // namespace agora
