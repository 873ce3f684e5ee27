#include <fstream>
#include <map>
#include <set>

#include "doctest.h"

#include "agora/orchestrator.hpp"
#include "agora/report.hpp"
#include "helpers.hpp"

using namespace agora;
using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

std::vector<json> events_of(const std::filesystem::path& run_dir) {
    return read_jsonl(run_dir / "events.jsonl");
}

// Type of the first differing event (looking at the baseline log), or "none".
// The run_start config digest differs per flag by construction and is ignored.
std::string first_diff_type(const std::vector<json>& base,
                            const std::vector<json>& other) {
    auto scrub = [](json e) {
        e.erase("config_digest");
        return e;
    };
    size_t n = std::min(base.size(), other.size());
    for (size_t i = 0; i < n; ++i) {
        if (scrub(base[i]) != scrub(other[i])) return base[i].value("type", "?");
    }
    if (base.size() == other.size()) return "none";
    return base.size() > other.size() ? base[n].value("type", "?")
                                      : other[n].value("type", "?");
}

}  // namespace

TEST_CASE("a desk run commits well-formed rounds in phase order") {
    testutil::TempDir dir("smoke");
    RunConfig cfg = testutil::desk_config(11);
    cfg.run.rounds = 8;
    Orchestrator engine(cfg, dir.path());
    RunReport report = engine.run_experiment();

    CHECK(report.rounds_completed == 8);
    CHECK_FALSE(report.halted);
    CHECK(report.total_challenges == 8 * 4);
    CHECK(report.total_solutions == 8 * 4 * 5);

    std::vector<json> events = events_of(dir.path());
    REQUIRE_FALSE(events.empty());
    CHECK(events.front()["type"] == "run_start");
    CHECK(events.back()["type"] == "run_end");

    // Per round: one round_start, then generation, solving, evaluation,
    // evolution events, one round_end; no interleaving across rounds.
    std::map<int, std::vector<std::string>> per_round;
    for (const json& e : events) {
        if (e.contains("round") && e.contains("type")) {
            per_round[e["round"].get<int>()].push_back(e["type"]);
        }
    }
    static const std::map<std::string, int> phase_of = {
        {"round_start", 0}, {"challenge", 1},    {"solution", 2},
        {"verification", 3}, {"pair", 4},        {"rating_update", 4},
        {"record", 5},      {"gate", 5},         {"flush", 5},
        {"export", 5},      {"controller", 6},   {"anchor", 7},
        {"round_end", 8}};
    for (const auto& [round_no, types] : per_round) {
        int last_phase = -1;
        int starts = 0, ends = 0;
        for (const std::string& t : types) {
            auto it = phase_of.find(t);
            if (it == phase_of.end()) continue;
            CHECK(it->second >= last_phase);
            last_phase = std::max(last_phase, it->second);
            if (t == "round_start") ++starts;
            if (t == "round_end") ++ends;
        }
        CHECK(starts == 1);
        CHECK(ends == 1);
    }

    // Challenge record file mirrors the generation events.
    std::vector<json> challenges = read_jsonl(dir.path() / "challenges.jsonl");
    CHECK(challenges.size() == size_t(report.total_challenges));
    for (const json& c : challenges) {
        CHECK(c.contains("prompt"));
        CHECK(c.contains("difficulty"));
    }

    // Metrics rows carry one record per committed round.
    std::vector<json> metrics = read_jsonl(dir.path() / "metrics.jsonl");
    CHECK(metrics.size() == 8);
    for (const json& row : metrics) {
        double v = row["v"].get<double>();
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(row.contains("phase_ms"));
    }
}

TEST_CASE("fixed seed reproduces the event log byte for byte") {
    RunConfig cfg = testutil::desk_config(99);
    cfg.run.rounds = 6;

    testutil::TempDir dir_a("det-a");
    testutil::TempDir dir_b("det-b");
    Orchestrator(cfg, dir_a.path()).run_experiment();
    Orchestrator(cfg, dir_b.path()).run_experiment();

    CHECK(read_file(dir_a.path() / "events.jsonl") ==
          read_file(dir_b.path() / "events.jsonl"));
    CHECK(read_file(dir_a.path() / "challenges.jsonl") ==
          read_file(dir_b.path() / "challenges.jsonl"));

    // Metrics rows are identical modulo wall-clock timing.
    std::vector<json> ma = read_jsonl(dir_a.path() / "metrics.jsonl");
    std::vector<json> mb = read_jsonl(dir_b.path() / "metrics.jsonl");
    REQUIRE(ma.size() == mb.size());
    for (size_t i = 0; i < ma.size(); ++i) {
        ma[i].erase("phase_ms");
        mb[i].erase("phase_ms");
        CHECK(ma[i] == mb[i]);
    }
}

TEST_CASE("checkpoint resume replays the uninterrupted run exactly") {
    RunConfig cfg = testutil::desk_config(1234);
    cfg.run.rounds = 16;
    cfg.run.checkpoint_cadence = 4;

    testutil::TempDir dir_a("resume-a");
    Orchestrator(cfg, dir_a.path()).run_experiment();

    testutil::TempDir dir_b("resume-b");
    {
        Orchestrator engine(cfg, dir_b.path());
        for (int i = 0; i < 8; ++i) engine.run_round();
        engine.checkpoint_now();
        // Simulated crash: the engine goes away mid-run.
    }
    {
        Orchestrator engine(cfg, dir_b.path(),
                            Orchestrator::Mode::Collaborative, /*resume=*/true);
        CHECK(engine.round() == 8);
        engine.run_experiment();
    }

    CHECK(read_file(dir_a.path() / "events.jsonl") ==
          read_file(dir_b.path() / "events.jsonl"));
    CHECK(read_file(dir_a.path() / "challenges.jsonl") ==
          read_file(dir_b.path() / "challenges.jsonl"));
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
    RunConfig cfg = testutil::desk_config(555);
    cfg.run.rounds = 5;

    testutil::TempDir dir("ckpt");
    std::filesystem::path ck_path;
    {
        Orchestrator engine(cfg, dir.path());
        for (int i = 0; i < 5; ++i) engine.run_round();
        ck_path = engine.checkpoint_now();
    }
    std::string first = read_file(ck_path);

    SUBCASE("save, load, save is idempotent") {
        Orchestrator engine(cfg, dir.path(), Orchestrator::Mode::Collaborative,
                            true);
        std::filesystem::path again = engine.checkpoint_now();
        CHECK(read_file(again) == first);
    }

    SUBCASE("a truncated snapshot is rejected cleanly") {
        std::ofstream out(ck_path, std::ios::binary | std::ios::trunc);
        out << first.substr(0, first.size() / 2);
        out.close();
        CHECK_THROWS_AS(Orchestrator(cfg, dir.path(),
                                     Orchestrator::Mode::Collaborative, true),
                        ConfigError);
    }

    SUBCASE("a version bump is rejected") {
        json snapshot = json::parse(first);
        snapshot["version"] = 2;
        std::ofstream out(ck_path, std::ios::binary | std::ios::trunc);
        out << snapshot.dump() << "\n";
        out.close();
        CHECK_THROWS_AS(Orchestrator(cfg, dir.path(),
                                     Orchestrator::Mode::Collaborative, true),
                        ConfigError);
    }

    SUBCASE("a different configuration is rejected") {
        RunConfig other = cfg;
        other.run.seed = 556;
        CHECK_THROWS_AS(Orchestrator(other, dir.path(),
                                     Orchestrator::Mode::Collaborative, true),
                        ConfigError);
    }
}

TEST_CASE("three consecutive aborted rounds halt the run") {
    RunConfig cfg = testutil::desk_config(77);
    cfg.run.rounds = 10;
    for (AgentSpec& spec : cfg.ensemble) {
        spec.roles.erase(Role::Generator);  // a dead Q-Group
    }

    testutil::TempDir dir("abort");
    Orchestrator engine(cfg, dir.path());
    double d_before = engine.controller().d;
    RunReport report = engine.run_experiment();

    CHECK(report.halted);
    CHECK(report.rounds_completed == 0);
    CHECK(engine.controller().d == d_before);  // state rolled back each time

    int aborts = 0;
    for (const json& e : events_of(dir.path())) {
        if (e["type"] == "round_abort") ++aborts;
    }
    CHECK(aborts == 3);
}

TEST_CASE("rating ledger replays to the final ratings") {
    RunConfig cfg = testutil::desk_config(31);
    cfg.run.rounds = 12;

    testutil::TempDir dir("ledger");
    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    std::map<std::string, double> mu;
    for (const AgentSpec& spec : cfg.ensemble) {
        mu[spec.id] = cfg.trueskill.mu0;
    }
    for (const json& e : events_of(dir.path())) {
        if (e["type"] == "rating_update") {
            mu[e["winner"].get<std::string>()] = e["winner_mu_post"].get<double>();
            mu[e["loser"].get<std::string>()] = e["loser_mu_post"].get<double>();
        } else if (e["type"] == "anchor") {
            for (const json& entry : e["mu_post"]) {
                mu[entry["agent"].get<std::string>()] = entry["mu"].get<double>();
            }
        }
    }
    for (size_t i = 0; i < engine.ensemble().size(); ++i) {
        CHECK(engine.ratings()[i].mu ==
              doctest::Approx(mu[engine.ensemble().agent(i).id]).epsilon(1e-12));
    }
}

TEST_CASE("benchmark eval recovers a known solve rate") {
    testutil::TempDir dir("bench");
    RunConfig cfg;
    cfg.run.seed = 4096;
    cfg.run.rounds = 0;
    // One solver whose logistic success on difficulty-1.0 problems is 0.6.
    AgentSpec agent = testutil::sim_agent("solo", 1.0 + std::log(1.5), 0.0, 0.0,
                                          0.0, 2718);
    cfg.ensemble.push_back(agent);
    cfg.eval.path = testutil::write_problem_file(dir.path() / "eval.jsonl", 500,
                                                 {1.0})
                        .string();

    Orchestrator engine(cfg, dir.path());
    RunReport report = engine.run_experiment();
    REQUIRE(report.evals.size() == 1);  // budget 0: baseline only
    CHECK(std::abs(report.evals.front().ensemble - 0.6) < 0.05);
}

TEST_CASE("each ablation flag touches only its own pathway") {
    testutil::TempDir scratch("ablate-diff");
    RunConfig base = testutil::desk_config(2025);
    base.run.rounds = 8;
    base.evolution.buffer_threshold = 6;
    base.anchor.path =
        testutil::write_problem_file(scratch.path() / "anchor.jsonl", 8,
                                     {0.8, 1.2})
            .string();
    base.anchor.cadence = 3;

    testutil::TempDir base_dir("ablate-base");
    Orchestrator(base, base_dir.path()).run_experiment();
    std::vector<json> base_events = events_of(base_dir.path());

    // The baseline horizon must actually exercise every pathway we diff.
    std::set<std::string> kinds;
    for (const json& e : base_events) kinds.insert(e.value("type", "?"));
    REQUIRE(kinds.count("export") == 1);
    REQUIRE(kinds.count("anchor") == 1);
    REQUIRE(kinds.count("pair") == 1);

    auto run_with = [&](auto&& set_flag) {
        RunConfig cfg = base;
        set_flag(cfg.ablation);
        testutil::TempDir flag_dir("ablate-flag");
        Orchestrator(cfg, flag_dir.path()).run_experiment();
        return events_of(flag_dir.path());
    };

    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_fem = true;
                          })) == "none");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_dynamic_strategy = true;
                          })) == "none");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_valid_vote = true;
                          })) == "verification");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_quality_vote = true;
                          })) == "pair");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_random_qgen = true;
                          })) == "challenge");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_difficulty_control = true;
                          })) == "controller");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_external_anchor = true;
                          })) == "anchor");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_explanation = true;
                          })) == "record");
    CHECK(first_diff_type(base_events, run_with([](AblationFlags& f) {
                              f.without_parametric = true;
                          })) == "export");

    // Elite ICL: the first divergence is in the solving phase (round 1 is
    // identical because the history starts empty; later challenges may then
    // drift through the controller, which is closed-loop feedback, not a
    // pathway leak).
    std::vector<json> no_icl = run_with(
        [](AblationFlags& f) { f.without_elite_icl = true; });
    std::string icl_diff = first_diff_type(base_events, no_icl);
    CHECK((icl_diff == "solution" || icl_diff == "verification"));
    auto round1_challenges = [](const std::vector<json>& events) {
        std::vector<json> out;
        for (const json& e : events) {
            if (e["type"] == "challenge" && e["round"] == 1) out.push_back(e);
        }
        return out;
    };
    CHECK(round1_challenges(base_events) == round1_challenges(no_icl));
}

TEST_CASE("isolated mode keeps every buffer single-author") {
    testutil::TempDir dir("isolated");
    RunConfig cfg = testutil::desk_config(808);
    cfg.run.rounds = 12;
    cfg.evolution.buffer_threshold = 4;
    cfg.isolated.pool = testutil::write_problem_file(dir.path() / "pool.jsonl",
                                                     6, {0.4})
                            .string();
    cfg.isolated.samples_per_problem = 16;

    Orchestrator engine(cfg, dir.path(), Orchestrator::Mode::Isolated);
    RunReport report = engine.run_experiment();
    CHECK(report.rounds_completed == 12);
    CHECK(report.total_accepted > 0);

    bool saw_entries = false;
    for (size_t i = 0; i < engine.isolated_buffers().size(); ++i) {
        const AgentId& owner = engine.ensemble().agent(i).id;
        for (const BufferEntry& e : engine.isolated_buffers()[i].entries()) {
            saw_entries = true;
            CHECK(e.author == owner);
        }
    }
    // Exported per-agent datasets stay self-authored too.
    for (size_t i = 0; i < engine.ensemble().size(); ++i) {
        const AgentId& owner = engine.ensemble().agent(i).id;
        std::filesystem::path dataset_dir = dir.path() / "datasets" / owner;
        if (!std::filesystem::exists(dataset_dir)) continue;
        for (const auto& file :
             std::filesystem::directory_iterator(dataset_dir)) {
            if (file.path().extension() != ".jsonl") continue;
            for (const BufferEntry& e : load_dataset(file.path())) {
                saw_entries = true;
                CHECK(e.author == owner);
            }
        }
    }
    CHECK(saw_entries);

    int sc_events = 0;
    for (const json& e : events_of(dir.path())) {
        if (e["type"] == "self_consistency") ++sc_events;
    }
    CHECK(sc_events == 12 * 5);
}

TEST_CASE("collaborative datasets mix authors") {
    testutil::TempDir dir("collab-mix");
    RunConfig cfg = testutil::desk_config(606);
    cfg.run.rounds = 16;
    cfg.evolution.buffer_threshold = 8;

    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    std::set<std::string> authors;
    std::filesystem::path dataset_dir = dir.path() / "datasets";
    REQUIRE(std::filesystem::exists(dataset_dir));
    for (const auto& file : std::filesystem::directory_iterator(dataset_dir)) {
        if (file.path().extension() != ".jsonl") continue;
        for (const BufferEntry& e : load_dataset(file.path())) {
            authors.insert(e.author);
        }
    }
    CHECK(authors.size() >= 2);
}

TEST_CASE("difficulty tracks scripted skill growth") {
    testutil::TempDir dir("coupling");
    RunConfig cfg = testutil::desk_config(313);
    cfg.run.rounds = 300;
    cfg.controller.alpha = 0.25;
    cfg.trainer.kind = TrainerConfig::Kind::None;
    cfg.evolution.buffer_threshold = 1 << 20;
    cfg.sim_skill_drift_per_round = 0.01;  // external improvement schedule
    for (AgentSpec& spec : cfg.ensemble) {
        spec.profile.verify_miss_rate = 0.0;
        spec.profile.verify_false_reject_rate = 0.0;
        spec.profile.latent_skill += 1.0;
    }

    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    std::vector<double> d_series, skill_series;
    for (const json& row : read_jsonl(dir.path() / "metrics.jsonl")) {
        d_series.push_back(row.at("d").get<double>());
        skill_series.push_back(row.at("mean_skill").get<double>());
    }
    REQUIRE(d_series.size() == 300);
    CHECK(testutil::pearson(d_series, skill_series) > 0.9);
    CHECK(d_series.back() > d_series.front());
}

TEST_CASE("saturated solvers pin the pass rate and push difficulty up") {
    testutil::TempDir dir("saturated");
    RunConfig cfg = testutil::desk_config(99);
    cfg.run.rounds = 12;
    cfg.trainer.kind = TrainerConfig::Kind::None;
    for (AgentSpec& spec : cfg.ensemble) {
        spec.profile.latent_skill = 30.0;  // skill far above any difficulty
        spec.profile.verify_miss_rate = 0.0;
        spec.profile.verify_false_reject_rate = 0.0;
    }

    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    double prev_d = cfg.controller.d;
    for (const json& row : read_jsonl(dir.path() / "metrics.jsonl")) {
        CHECK(row.at("v").get<double>() == 1.0);
        CHECK(row.at("v_target").get<double>() < 1.0);
        double d = row.at("d").get<double>();
        CHECK(d > prev_d);  // forced by the positive error term
        prev_d = d;
    }
}

TEST_CASE("a failing external trainer degrades the run without stopping it") {
    testutil::TempDir dir("degraded");
    std::filesystem::path script = dir.path() / "broken.sh";
    {
        std::ofstream out(script);
        out << "#!/bin/sh\nexit 9\n";
    }
    std::filesystem::permissions(script, std::filesystem::perms::owner_all);

    RunConfig cfg = testutil::desk_config(515);
    cfg.run.rounds = 20;
    cfg.evolution.buffer_threshold = 6;
    cfg.trainer.kind = TrainerConfig::Kind::Command;
    cfg.trainer.command = {script.string()};

    Orchestrator engine(cfg, dir.path() / "run");
    RunReport report = engine.run_experiment();
    CHECK(report.rounds_completed == 20);
    CHECK_FALSE(report.halted);
    CHECK(report.degraded);
    CHECK(report.dataset_epochs >= 1);

    bool saw_failure = false;
    for (const json& line : read_jsonl(dir.path() / "run" / "trainer.jsonl")) {
        if (line.value("status", "") == "failed") saw_failure = true;
    }
    CHECK(saw_failure);
}

TEST_CASE("exclude_self trains each agent on peer data only") {
    RunConfig cfg = testutil::desk_config(616);
    cfg.run.rounds = 30;
    cfg.evolution.buffer_threshold = 8;

    testutil::TempDir a("self-incl");
    Orchestrator incl(cfg, a.path());
    incl.run_experiment();

    cfg.evolution.exclude_self = true;
    testutil::TempDir b("self-excl");
    Orchestrator excl(cfg, b.path());
    excl.run_experiment();

    // The flag must change training: after the first flush the two runs'
    // skill trajectories separate (ordering claims stop being meaningful once
    // the trajectories diverge, so only the effect is asserted).
    bool some_different = false;
    for (size_t i = 0; i < incl.ensemble().size(); ++i) {
        double with_self = *incl.ensemble().backend(i).oracle_skill();
        double without_self = *excl.ensemble().backend(i).oracle_skill();
        if (std::abs(without_self - with_self) > 1e-9) some_different = true;
    }
    CHECK(some_different);
}

TEST_CASE("report artifacts are deterministic") {
    testutil::TempDir dir("report-idem");
    RunConfig cfg = testutil::desk_config(717);
    cfg.run.rounds = 10;
    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    ReportArtifacts first = write_report(dir.path());
    std::string series1 = read_file(first.series_csv);
    std::string summary1 = read_file(first.summary_txt);
    CHECK(first.rows == 10);

    ReportArtifacts second = write_report(dir.path());
    CHECK(read_file(second.series_csv) == series1);
    CHECK(read_file(second.summary_txt) == summary1);

    // Corrupt metrics lines are skipped and counted.
    {
        std::ofstream out(dir.path() / "metrics.jsonl", std::ios::app);
        out << "{not json at all\n";
    }
    ReportArtifacts third = write_report(dir.path());
    CHECK(third.rows == 10);
    CHECK(third.skipped_lines == 1);
}

TEST_CASE("sampled logprobs feed the per-round reference loss") {
    testutil::TempDir dir("self-loss");
    RunConfig cfg = testutil::desk_config(818);
    cfg.run.rounds = 4;
    cfg.sampling.logprobs = true;

    Orchestrator engine(cfg, dir.path());
    engine.run_experiment();

    for (const json& row : read_jsonl(dir.path() / "metrics.jsonl")) {
        REQUIRE(row.contains("mean_self_loss"));
        CHECK(row["mean_self_loss"].get<double>() > 0.0);
    }
}
