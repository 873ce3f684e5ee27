// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit status is nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "agora/orchestrator.hpp"
#include "helpers.hpp"
#include "oracles/trueskill_reference.hpp"
#include "stub_server.hpp"

using namespace agora;
using nlohmann::json;

namespace {

struct Check {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void note(const std::string& text) { notes.push_back(text); }
};

double trailing_mean(const std::vector<double>& xs, size_t window) {
    size_t n = std::min(window, xs.size());
    double sum = 0.0;
    for (size_t i = xs.size() - n; i < xs.size(); ++i) sum += xs[i];
    return sum / double(n);
}

// ---------------------------------------------------------------------------
// Shared configs

RunConfig tracking_config(uint64_t seed) {
    RunConfig cfg;
    cfg.run.seed = seed;
    cfg.run.rounds = 500;
    cfg.run.challenges_per_round = 5;
    cfg.run.eval_cadence = 0;
    cfg.run.checkpoint_cadence = 0;
    cfg.controller.alpha = 0.25;
    cfg.evolution.buffer_threshold = 1 << 20;  // static skills: never flush
    cfg.trainer.kind = TrainerConfig::Kind::None;
    double skills[5] = {3.6, 3.45, 3.3, 3.15, 3.0};
    for (int i = 0; i < 5; ++i) {
        cfg.ensemble.push_back(testutil::sim_agent(
            "agent" + std::to_string(i), skills[i], 0.0, 0.0,
            0.2 * i - 0.4, seed * 31 + i));
    }
    return cfg;
}

// A deliberately adversarial desk for the ablation matrix: competence and
// clarity are split across members, flaw-prone verifiers, moderate skills.
RunConfig matrix_config(uint64_t seed, const std::filesystem::path& dir) {
    RunConfig cfg;
    cfg.run.seed = seed;
    cfg.run.rounds = 300;
    cfg.run.challenges_per_round = 4;
    cfg.run.eval_cadence = 0;  // baseline and final only
    cfg.run.checkpoint_cadence = 0;
    cfg.controller.alpha = 0.1;
    cfg.controller.v_max = 0.7;
    cfg.evolution.buffer_threshold = 32;
    cfg.trainer.kind = TrainerConfig::Kind::Simulated;
    cfg.anchor.path = (dir / "anchor.jsonl").string();
    cfg.anchor.cadence = 25;
    cfg.anchor.lambda = 0.6;
    cfg.eval.path = (dir / "eval.jsonl").string();

    struct Member {
        double skill;
        double style;
    };
    // a0 is able but opaque, a3 is eloquent but weak, a1 is the best teacher.
    Member members[5] = {
        {2.3, -1.5}, {2.2, 1.2}, {1.8, 0.0}, {1.2, 2.0}, {1.5, -0.5}};
    for (int i = 0; i < 5; ++i) {
        cfg.ensemble.push_back(testutil::sim_agent(
            "agent" + std::to_string(i), members[i].skill, 0.20, 0.02,
            members[i].style, seed * 61 + i));
    }

    testutil::write_problem_file(dir / "anchor.jsonl", 32, {1.5});
    testutil::write_problem_file(dir / "eval.jsonl", 200,
                                 {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5});
    return cfg;
}

// ---------------------------------------------------------------------------
// Criteria

void criterion_controller_tracking(Check& check) {
    testutil::TempDir dir("acc-tracking");
    RunConfig cfg = tracking_config(20250810);
    Orchestrator engine(cfg, dir.path());
    RunReport report = engine.run_experiment();
    check.require(report.rounds_completed == 500, "run did not complete");

    std::vector<double> v_series;
    double final_target = 0.0;
    for (const json& row : read_jsonl(dir.path() / "metrics.jsonl")) {
        v_series.push_back(row.at("v").get<double>());
        final_target = row.at("v_target").get<double>();
    }
    double trail = trailing_mean(v_series, 20);
    std::ostringstream note;
    note << "trailing-20 pass rate " << trail << " vs target " << final_target;
    check.note(note.str());
    check.require(std::abs(trail - final_target) <= 0.05,
                  "trailing-20 mean pass rate off target: " + note.str());
}

void criterion_controller_fixed_point(Check& check) {
    ControllerState state;
    state.d = 1.0;
    state.alpha = 0.05;
    state.v_target = 0.6;
    const double d0 = state.d;
    for (int i = 0; i < 100; ++i) {
        state = update_difficulty(state, state.v_target);
        state = update_target(state);
    }
    check.require(state.d == d0, "difficulty drifted under v == v_target");
}

void criterion_consensus_soundness(Check& check) {
    Ensemble verifiers;
    for (int i = 0; i < 4; ++i) {
        AgentHandle handle;
        handle.id = "v" + std::to_string(i);
        handle.roles = {Role::Verifier};
        verifiers.add(handle, std::make_unique<SimulatedBackend>(
                                  SkillProfile{1.0, 0.1, 0.0, 0.0,
                                               uint64_t(9000 + i)},
                                  SimParams{}));
    }
    const int trials = 100000;
    int accepted = 0;
    for (int i = 0; i < trials; ++i) {
        Solution s;
        s.id = "s" + std::to_string(i);
        s.author = "author";
        s.text = "flawed trace " + std::to_string(i);
        s.digest = fnv1a64(s.text);
        s.oracle.correct = false;
        if (verify_unanimous(s, {0, 1, 2, 3}, verifiers, {}, 1).accepted) {
            ++accepted;
        }
    }
    double rate = double(accepted) / trials;
    double expected = std::pow(0.1, 4);
    double se = std::sqrt(expected * (1.0 - expected) / trials);
    std::ostringstream note;
    note << "acceptance rate " << rate << " vs analytic " << expected << " (3se "
         << 3.0 * se << ")";
    check.note(note.str());
    check.require(std::abs(rate - expected) <= 3.0 * se, note.str());
}

void criterion_trueskill_parity(Check& check) {
    TrueSkillParams params;

    Rating a, b;
    auto [oracle_w, oracle_l] = tsref::update(a, b, params, MatchOutcome::Decisive);
    auto [impl_w, impl_l] = trueskill_update(a, b, params, MatchOutcome::Decisive);
    check.require(std::abs(oracle_w.mu - 29.40) < 0.005,
                  "oracle default winner mu not ~29.40");
    check.require(std::abs(oracle_l.mu - 20.60) < 0.005,
                  "oracle default loser mu not ~20.60");
    check.require(std::abs(impl_w.mu - oracle_w.mu) < 1e-6 &&
                      std::abs(impl_l.mu - oracle_l.mu) < 1e-6 &&
                      std::abs(impl_w.sigma - oracle_w.sigma) < 1e-6 &&
                      std::abs(impl_l.sigma - oracle_l.sigma) < 1e-6,
                  "default-prior update diverges from the oracle");

    std::mt19937_64 rng(613);
    std::uniform_real_distribution<double> mu_dist(0.0, 50.0);
    std::uniform_real_distribution<double> sigma_dist(1.0, 15.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Rating x{mu_dist(rng), sigma_dist(rng)};
        Rating y{mu_dist(rng), sigma_dist(rng)};
        MatchOutcome outcome =
            coin(rng) < 0.8 ? MatchOutcome::Decisive : MatchOutcome::Draw;
        auto [iw, il] = trueskill_update(x, y, params, outcome);
        auto [ow, ol] = tsref::update(x, y, params, outcome);
        worst = std::max({worst, std::abs(iw.mu - ow.mu), std::abs(il.mu - ol.mu),
                          std::abs(iw.sigma - ow.sigma),
                          std::abs(il.sigma - ol.sigma)});
        if (outcome == MatchOutcome::Decisive) {
            check.require(iw.mu > x.mu && il.mu < y.mu && iw.sigma < x.sigma &&
                              il.sigma < y.sigma,
                          "decisive update not strictly monotone");
        }
    }
    std::ostringstream note;
    note << "worst |impl - oracle| = " << worst;
    check.note(note.str());
    check.require(worst < 1e-6, note.str());
}

void criterion_rank_recovery(Check& check) {
    TrueSkillParams params;
    std::vector<double> quality = {-1.0, -0.5, 0.0, 0.5, 1.0};
    int good = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed * 104729);
        std::uniform_int_distribution<int> pick(0, 4);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::vector<Rating> ratings(5);
        int decided = 0;
        while (decided < 2000) {
            int i = pick(rng);
            int j = pick(rng);
            if (i == j) continue;
            double p = 1.0 / (1.0 + std::exp(-(quality[i] - quality[j])));
            int winner = coin(rng) < p ? i : j;
            int loser = winner == i ? j : i;
            auto [w, l] = trueskill_update(ratings[winner], ratings[loser],
                                           params, MatchOutcome::Decisive);
            ratings[winner] = w;
            ratings[loser] = l;
            ++decided;
        }
        std::vector<double> mus;
        for (const Rating& r : ratings) mus.push_back(r.mu);
        if (testutil::spearman(mus, quality) >= 0.9) ++good;
    }
    std::ostringstream note;
    note << good << "/20 seeds recover the ranking";
    check.note(note.str());
    check.require(good >= 19, note.str());
}

void criterion_surprise(Check& check) {
    check.require(internal_surprise(0.7, 0.7, 1e-9) == 0.0,
                  "surprise nonzero at mu* == mu_bar");
    double by_hand = std::pow((0.8 - 0.6) / (0.8 + 1e-9), 2.0);
    check.require(std::abs(internal_surprise(0.8, 0.6, 1e-9) - by_hand) < 1e-12,
                  "surprise diverges from the hand-computed value");
    check.require(std::abs(internal_surprise(0.8, 0.6, 1e-9) - 0.0625) < 1e-8,
                  "surprise not ~0.0625 at 0.8/0.6");
}

void criterion_gate_audit(Check& check) {
    testutil::TempDir dir("acc-gate");
    RunConfig cfg = matrix_config(11, dir.path());
    Orchestrator engine(cfg, dir.path() / "run");
    RunReport report = engine.run_experiment();
    check.require(report.dataset_epochs >= 1, "no dataset was ever exported");

    // Index gate events by (round, author, prompt digest, completion digest).
    std::map<std::string, json> gates;
    for (const json& e : read_jsonl(dir.path() / "run" / "events.jsonl")) {
        if (e.value("type", "") != "gate") continue;
        std::string key = std::to_string(e.at("round").get<int>()) + "/" +
                          e.at("author").get<std::string>() + "/" +
                          e.at("prompt_digest").get<std::string>() + "/" +
                          e.at("completion_digest").get<std::string>();
        gates[key] = e;
    }

    size_t audited = 0;
    size_t violations = 0;
    for (const auto& file : std::filesystem::directory_iterator(
             dir.path() / "run" / "datasets")) {
        if (file.path().extension() != ".jsonl") continue;
        for (const BufferEntry& e : load_dataset(file.path())) {
            ++audited;
            std::string key = std::to_string(e.round) + "/" + e.author + "/" +
                              hex64(e.prompt_digest) + "/" +
                              hex64(e.completion_digest);
            auto it = gates.find(key);
            if (it == gates.end()) {
                ++violations;
                continue;
            }
            const json& g = it->second;
            bool accepted = g.at("accepted").get<bool>();
            double author_mu = g.at("author_mu").get<double>();
            double mean_mu = g.at("mean_mu").get<double>();
            if (g.at("gate").get<int>() != 1 ||
                indicator(accepted, author_mu, mean_mu) != 1) {
                ++violations;
            }
        }
    }
    std::ostringstream note;
    note << audited << " exported records audited, " << violations
         << " violations";
    check.note(note.str());
    check.require(audited > 0, "nothing to audit");
    check.require(violations == 0, note.str());
}

void criterion_buffer_arithmetic(Check& check) {
    HQBuffer buffer(1024);
    int flushes = 0;
    size_t exported = 0;
    for (int i = 0; i < 3000; ++i) {
        BufferEntry e;
        e.prompt = "p" + std::to_string(i);
        e.completion = "c";
        e.author = "a";
        e.round = i;
        if (auto flush = buffer.push(e, 1)) {
            ++flushes;
            exported += flush->entries.size();
        }
    }
    check.require(flushes == 2, "expected exactly 2 flushes");
    check.require(exported == 2048, "expected 2048 exported records");
    check.require(buffer.size() == 952, "expected 952 residual entries");
}

void criterion_elite_history_oracle(Check& check) {
    std::mt19937_64 rng(90210);
    std::uniform_int_distribution<int> score(0, 19);
    std::uniform_int_distribution<int> kdist(1, 5);
    int bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int k = kdist(rng);
        EliteHistory history(k);
        struct Seen {
            double quality;
            int seq;
            std::string id;
        };
        std::vector<Seen> all;
        int n = 5 + int(rng() % 60);
        for (int i = 0; i < n; ++i) {
            double q = double(score(rng));
            std::string id = std::to_string(trial) + "-" + std::to_string(i);
            InteractionRecord record;
            record.challenge.id = id;
            record.challenge.prompt = "p" + id;
            record.solution.id = "s" + id;
            record.solution.text = "t" + id;
            record.author = "author";
            record.explanation = "e";
            record.quality_score = q;
            record.round = i;
            history.update(record);
            all.push_back({q, i, id});
        }
        std::stable_sort(all.begin(), all.end(),
                         [](const Seen& a, const Seen& b) {
                             if (a.quality != b.quality) {
                                 return a.quality > b.quality;
                             }
                             return a.seq > b.seq;
                         });
        size_t expect = std::min<size_t>(k, all.size());
        if (history.records().size() != expect) {
            ++bad;
            continue;
        }
        for (size_t i = 0; i < expect; ++i) {
            if (history.records()[i].challenge.id != all[i].id) {
                ++bad;
                break;
            }
        }
    }
    std::ostringstream note;
    note << bad << "/1000 cases diverged from the brute-force oracle";
    check.note(note.str());
    check.require(bad == 0, note.str());
}

void criterion_ablation_directionality(Check& check) {
    testutil::TempDir dir("acc-matrix");
    RunConfig base = matrix_config(7, dir.path());

    auto final_score = [&](const RunConfig& cfg,
                           const std::string& name) -> std::pair<double, long> {
        Orchestrator engine(cfg, dir.path() / name);
        RunReport report = engine.run_experiment();
        double score = report.evals.empty() ? 0.0 : report.evals.back().ensemble;
        return {score, report.total_contamination};
    };

    auto [full_score, full_contamination] = final_score(base, "full");
    std::ostringstream note;
    note << "full " << full_score;

    static const std::vector<std::string> flags = {
        "without_valid_vote",      "without_parametric",
        "without_quality_vote",    "without_elite_icl",
        "without_random_qgen",     "without_difficulty_control",
        "without_external_anchor", "without_explanation",
        "without_dynamic_strategy", "without_fem"};

    for (const std::string& flag : flags) {
        RunConfig cfg = base;
        AblationFlags& f = cfg.ablation;
        if (flag == "without_valid_vote") f.without_valid_vote = true;
        if (flag == "without_parametric") f.without_parametric = true;
        if (flag == "without_quality_vote") f.without_quality_vote = true;
        if (flag == "without_elite_icl") f.without_elite_icl = true;
        if (flag == "without_random_qgen") f.without_random_qgen = true;
        if (flag == "without_difficulty_control") {
            f.without_difficulty_control = true;
        }
        if (flag == "without_external_anchor") f.without_external_anchor = true;
        if (flag == "without_explanation") f.without_explanation = true;
        if (flag == "without_dynamic_strategy") f.without_dynamic_strategy = true;
        if (flag == "without_fem") f.without_fem = true;

        auto [score, contamination] = final_score(cfg, flag);
        note << ", " << flag << " " << score;

        check.require(full_score >= score,
                      flag + " outscored the full configuration (" +
                          std::to_string(score) + " > " +
                          std::to_string(full_score) + ")");
        if (flag == "without_valid_vote") {
            check.require(contamination > 0,
                          "without_valid_vote produced no buffer contamination");
            check.require(score < full_score,
                          "without_valid_vote did not strictly lower the score");
        }
    }
    check.note(note.str());
}

void criterion_isolated_vs_collaborative(Check& check) {
    // Self-consistency boundary: an exact half split is rejected.
    std::vector<std::optional<std::string>> split;
    for (int i = 0; i < 16; ++i) split.push_back(std::string("a"));
    for (int i = 0; i < 16; ++i) split.push_back(std::string("b"));
    check.require(!strict_majority(split).has_value(),
                  "a 16-16 split was accepted");
    split.push_back(std::string("a"));
    check.require(strict_majority(split).has_value(),
                  "a 17-16 majority was rejected");

    // Collaborative training data mixes authors.
    {
        testutil::TempDir dir("acc-collab");
        RunConfig cfg = testutil::desk_config(2024);
        cfg.run.rounds = 40;
        cfg.evolution.buffer_threshold = 8;
        Orchestrator engine(cfg, dir.path());
        engine.run_experiment();

        // Every agent trains on the same shared snapshots, so its cumulative
        // training data is the union of exported epochs.
        int epochs = 0;
        std::set<std::string> authors;
        for (const auto& file :
             std::filesystem::directory_iterator(dir.path() / "datasets")) {
            if (file.path().extension() != ".jsonl") continue;
            ++epochs;
            for (const BufferEntry& e : load_dataset(file.path())) {
                authors.insert(e.author);
            }
        }
        check.require(epochs >= 1, "collaborative run exported nothing");
        check.require(authors.size() >= 2,
                      "collaborative training data had a single author");
    }

    // Isolated training data is strictly self-authored.
    {
        testutil::TempDir dir("acc-isolated");
        RunConfig cfg = testutil::desk_config(2025);
        cfg.run.rounds = 24;
        cfg.evolution.buffer_threshold = 4;
        cfg.isolated.pool =
            testutil::write_problem_file(dir.path() / "pool.jsonl", 8, {0.4})
                .string();
        cfg.isolated.samples_per_problem = 32;
        Orchestrator engine(cfg, dir.path(), Orchestrator::Mode::Isolated);
        engine.run_experiment();

        int files = 0;
        for (size_t i = 0; i < engine.ensemble().size(); ++i) {
            const AgentId& owner = engine.ensemble().agent(i).id;
            std::filesystem::path agent_dir = dir.path() / "datasets" / owner;
            if (!std::filesystem::exists(agent_dir)) continue;
            for (const auto& file :
                 std::filesystem::directory_iterator(agent_dir)) {
                if (file.path().extension() != ".jsonl") continue;
                ++files;
                std::set<std::string> authors;
                for (const BufferEntry& e : load_dataset(file.path())) {
                    authors.insert(e.author);
                }
                check.require(authors.size() == 1 && *authors.begin() == owner,
                              "an isolated dataset was not single-author");
            }
        }
        check.require(files >= 1, "isolated run exported nothing");
    }
}

void criterion_determinism_resume(Check& check) {
    auto read_file = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };

    RunConfig cfg = testutil::desk_config(424242);
    cfg.run.rounds = 14;
    cfg.run.checkpoint_cadence = 7;

    testutil::TempDir a("acc-det-a");
    testutil::TempDir b("acc-det-b");
    Orchestrator(cfg, a.path()).run_experiment();
    Orchestrator(cfg, b.path()).run_experiment();
    check.require(read_file(a.path() / "events.jsonl") ==
                      read_file(b.path() / "events.jsonl"),
                  "same seed produced different event logs");

    testutil::TempDir c("acc-det-c");
    {
        Orchestrator engine(cfg, c.path());
        for (int i = 0; i < 7; ++i) engine.run_round();
        engine.checkpoint_now();
    }
    {
        Orchestrator engine(cfg, c.path(), Orchestrator::Mode::Collaborative,
                            /*resume=*/true);
        engine.run_experiment();
    }
    check.require(read_file(a.path() / "events.jsonl") ==
                      read_file(c.path() / "events.jsonl"),
                  "checkpoint resume diverged from the uninterrupted run");
}

void criterion_wire_conformance(Check& check) {
    ::setenv("AGORA_API_KEY", "acceptance-token", 1);

    {
        testutil::StubServer server;
        server.set_completion("canned acceptance completion");
        EndpointConfig cfg;
        cfg.base_url = server.base_url();
        cfg.model = "stub";
        cfg.max_retries = 3;
        cfg.retry_backoff_ms = 0;
        RemoteClient client(cfg);
        AgentResponse r = client.chat("system", "user", SamplingParams{});
        check.require(r.text == "canned acceptance completion",
                      "round-trip completion mismatch");
        json req = server.last_request();
        check.require(req.value("model", "") == "stub" &&
                          req.contains("messages") &&
                          req.contains("temperature") && req.contains("top_p") &&
                          req.contains("max_tokens"),
                      "request omitted wire fields");
        check.require(server.last_auth() == "Bearer acceptance-token",
                      "bearer auth header missing");
    }
    {
        testutil::StubServer server;
        server.fail_next(2);
        EndpointConfig cfg;
        cfg.base_url = server.base_url();
        cfg.model = "stub";
        cfg.max_retries = 3;
        cfg.retry_backoff_ms = 0;
        RemoteClient client(cfg);
        AgentResponse r = client.chat("s", "u", SamplingParams{});
        check.require(!r.text.empty() && server.requests() == 3,
                      "retry path did not recover after two 500s");
    }
    {
        testutil::StubServer server;
        server.fail_next(99);
        EndpointConfig cfg;
        cfg.base_url = server.base_url();
        cfg.model = "stub";
        cfg.max_retries = 3;
        cfg.retry_backoff_ms = 0;
        RemoteClient client(cfg);
        bool threw = false;
        try {
            client.chat("s", "u", SamplingParams{});
        } catch (const AgentError& e) {
            threw = e.kind == AgentError::Kind::Unreachable && e.attempts == 3;
        }
        check.require(threw, "persistent failure did not surface correctly");
    }
    {
        testutil::StubServer server;
        server.include_logprobs(true);
        EndpointConfig cfg;
        cfg.base_url = server.base_url();
        cfg.model = "stub";
        cfg.max_retries = 3;
        cfg.retry_backoff_ms = 0;
        RemoteClient client(cfg);
        SamplingParams sampling;
        sampling.logprobs = true;
        AgentResponse r = client.chat("s", "u", sampling);
        check.require(r.token_logprobs.has_value() &&
                          r.token_logprobs->size() == 3 &&
                          (*r.token_logprobs)[1].logprob < 0.0,
                      "logprob path failed to parse");
    }
}

struct Criterion {
    int id;
    const char* title;
    std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    bool verbose = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else if (std::strcmp(argv[i], "--verbose") == 0) {
            verbose = true;
        }
    }

    std::vector<Criterion> criteria = {
        {1, "controller tracking", criterion_controller_tracking},
        {2, "controller fixed point", criterion_controller_fixed_point},
        {3, "consensus soundness", criterion_consensus_soundness},
        {4, "trueskill oracle parity", criterion_trueskill_parity},
        {5, "rank recovery", criterion_rank_recovery},
        {6, "surprise metric", criterion_surprise},
        {7, "gate audit", criterion_gate_audit},
        {8, "buffer arithmetic", criterion_buffer_arithmetic},
        {9, "elite-history oracle", criterion_elite_history_oracle},
        {10, "ablation directionality", criterion_ablation_directionality},
        {11, "isolated vs collaborative", criterion_isolated_vs_collaborative},
        {12, "determinism and resumability", criterion_determinism_resume},
        {13, "wire conformance", criterion_wire_conformance},
    };

    // Stated runtime budgets, in seconds, where the criteria carry one.
    std::map<int, double> budget = {{1, 60.0}, {3, 30.0}, {5, 60.0}};

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        if (only != 0 && criterion.id != only) continue;
        Check check;
        auto start = std::chrono::steady_clock::now();
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (budget.count(criterion.id) && seconds > budget[criterion.id]) {
            check.failures.push_back("runtime " + std::to_string(seconds) +
                                     "s exceeds " +
                                     std::to_string(budget[criterion.id]) + "s");
        }
        bool ok = check.failures.empty();
        if (!ok) ++failures;
        std::printf("%s  %2d  %-28s (%.1fs)\n", ok ? "PASS" : "FAIL",
                    criterion.id, criterion.title, seconds);
        if (verbose) {
            for (const std::string& note : check.notes) {
                std::printf("      note: %s\n", note.c_str());
            }
        }
        for (const std::string& failure : check.failures) {
            std::printf("      reason: %s\n", failure.c_str());
        }
    }
    if (failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria failed\n", failures);
    }
    return failures == 0 ? 0 : 1;
}
