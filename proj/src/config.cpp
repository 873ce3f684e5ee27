#include "agora/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "agora/event_log.hpp"

namespace agora {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError("config error at '" + path + "': " + message);
}

void require_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (allowed.count(key) == 0) {
            fail(path.empty() ? key : path + "." + key, "unknown key");
        }
    }
}

double get_number(const json& obj, const std::string& path,
                  const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key,
            int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) fail(path + "." + key, "expected an integer");
    return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) fail(path + "." + key, "expected a boolean");
    return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& path,
                       const std::string& key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) fail(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

AgentSpec parse_agent(const json& obj, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    require_keys(obj, path, {"id", "roles", "backend", "profile", "endpoint"});

    AgentSpec spec;
    spec.id = get_string(obj, path, "id", "");
    if (spec.id.empty()) fail(path + ".id", "agent id is required");

    if (!obj.contains("roles") || !obj["roles"].is_array() ||
        obj["roles"].empty()) {
        fail(path + ".roles", "non-empty role list is required");
    }
    for (const auto& role_json : obj["roles"]) {
        if (!role_json.is_string()) fail(path + ".roles", "roles must be strings");
        auto role = role_from_string(role_json.get<std::string>());
        if (!role) {
            fail(path + ".roles",
                 "unknown role '" + role_json.get<std::string>() + "'");
        }
        spec.roles.insert(*role);
    }

    std::string backend = get_string(obj, path, "backend", "simulated");
    if (backend == "simulated") {
        spec.backend = BackendKind::Simulated;
    } else if (backend == "remote") {
        spec.backend = BackendKind::Remote;
    } else {
        fail(path + ".backend", "expected 'simulated' or 'remote'");
    }

    if (obj.contains("profile")) {
        const json& p = obj["profile"];
        std::string ppath = path + ".profile";
        if (!p.is_object()) fail(ppath, "expected an object");
        require_keys(p, ppath,
                     {"latent_skill", "verify_miss_rate",
                      "verify_false_reject_rate", "style_quality", "seed"});
        spec.profile.latent_skill =
            get_number(p, ppath, "latent_skill", spec.profile.latent_skill);
        spec.profile.verify_miss_rate =
            get_number(p, ppath, "verify_miss_rate", spec.profile.verify_miss_rate);
        spec.profile.verify_false_reject_rate =
            get_number(p, ppath, "verify_false_reject_rate",
                       spec.profile.verify_false_reject_rate);
        spec.profile.style_quality =
            get_number(p, ppath, "style_quality", spec.profile.style_quality);
        if (p.contains("seed")) {
            if (!p["seed"].is_number_integer()) fail(ppath + ".seed", "expected an integer");
            spec.profile.seed = p["seed"].get<uint64_t>();
        }
        auto check_rate = [&](double rate, const char* key) {
            if (rate < 0.0 || rate > 1.0) {
                fail(ppath + "." + key, "rate must lie in [0,1]");
            }
        };
        check_rate(spec.profile.verify_miss_rate, "verify_miss_rate");
        check_rate(spec.profile.verify_false_reject_rate,
                   "verify_false_reject_rate");
    }

    if (obj.contains("endpoint")) {
        const json& e = obj["endpoint"];
        std::string epath = path + ".endpoint";
        if (!e.is_object()) fail(epath, "expected an object");
        require_keys(e, epath,
                     {"base_url", "path", "model", "api_key_env", "max_retries",
                      "timeout_ms", "retry_backoff_ms"});
        spec.endpoint.base_url = get_string(e, epath, "base_url", "");
        spec.endpoint.path = get_string(e, epath, "path", spec.endpoint.path);
        spec.endpoint.model = get_string(e, epath, "model", "");
        spec.endpoint.api_key_env =
            get_string(e, epath, "api_key_env", spec.endpoint.api_key_env);
        spec.endpoint.max_retries =
            get_int(e, epath, "max_retries", spec.endpoint.max_retries);
        spec.endpoint.timeout_ms =
            get_int(e, epath, "timeout_ms", spec.endpoint.timeout_ms);
        spec.endpoint.retry_backoff_ms =
            get_int(e, epath, "retry_backoff_ms", spec.endpoint.retry_backoff_ms);
    }
    if (spec.backend == BackendKind::Remote && spec.endpoint.base_url.empty()) {
        fail(path + ".endpoint.base_url", "remote backend requires a base_url");
    }
    return spec;
}

json parse_override_value(const std::string& text) {
    // Typed when it parses as JSON, raw string otherwise.
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

void apply_override(json& root, const std::string& spec) {
    size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + spec + "' is not of the form key.path=value");
    }
    std::string path = spec.substr(0, eq);
    json value = parse_override_value(spec.substr(eq + 1));

    json* node = &root;
    std::istringstream segments(path);
    std::string segment;
    std::vector<std::string> parts;
    while (std::getline(segments, segment, '.')) parts.push_back(segment);
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
        if (!node->is_object() && !node->is_null()) {
            throw ConfigError("override '" + spec + "' descends into a non-object");
        }
    }
    (*node)[parts.back()] = std::move(value);
}

}  // namespace

RunConfig parse_config_json(json root) {
    if (root.is_null()) root = json::object();
    if (!root.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    require_keys(root, "",
                 {"run", "ensemble", "controller", "trueskill", "evolution",
                  "sampling", "anchor", "eval", "trainer", "sim", "ablation",
                  "isolated"});

    RunConfig cfg;

    if (root.contains("run")) {
        const json& r = root["run"];
        require_keys(r, "run",
                     {"seed", "rounds", "challenges_per_round", "eval_cadence",
                      "checkpoint_cadence", "halt_after_aborts"});
        if (r.contains("seed")) {
            if (!r["seed"].is_number_integer()) fail("run.seed", "expected an integer");
            cfg.run.seed = r["seed"].get<uint64_t>();
        }
        cfg.run.rounds = get_int(r, "run", "rounds", cfg.run.rounds);
        cfg.run.challenges_per_round =
            get_int(r, "run", "challenges_per_round", cfg.run.challenges_per_round);
        cfg.run.eval_cadence = get_int(r, "run", "eval_cadence", cfg.run.eval_cadence);
        cfg.run.checkpoint_cadence =
            get_int(r, "run", "checkpoint_cadence", cfg.run.checkpoint_cadence);
        cfg.run.halt_after_aborts =
            get_int(r, "run", "halt_after_aborts", cfg.run.halt_after_aborts);
    }

    if (root.contains("ensemble")) {
        if (!root["ensemble"].is_array()) fail("ensemble", "expected an array");
        int i = 0;
        for (const auto& agent_json : root["ensemble"]) {
            cfg.ensemble.push_back(
                parse_agent(agent_json, "ensemble[" + std::to_string(i) + "]"));
            ++i;
        }
    }

    if (root.contains("controller")) {
        const json& c = root["controller"];
        require_keys(c, "controller",
                     {"initial_difficulty", "learning_rate", "initial_target",
                      "margin", "window", "target_min", "target_max",
                      "difficulty_floor", "bucket_breakpoints",
                      "bucket_labels"});
        cfg.controller.d =
            get_number(c, "controller", "initial_difficulty", cfg.controller.d);
        cfg.controller.alpha =
            get_number(c, "controller", "learning_rate", cfg.controller.alpha);
        cfg.controller.v_target =
            get_number(c, "controller", "initial_target", cfg.controller.v_target);
        cfg.controller.margin =
            get_number(c, "controller", "margin", cfg.controller.margin);
        cfg.controller.window_len = static_cast<size_t>(
            get_int(c, "controller", "window", int(cfg.controller.window_len)));
        cfg.controller.v_min =
            get_number(c, "controller", "target_min", cfg.controller.v_min);
        cfg.controller.v_max =
            get_number(c, "controller", "target_max", cfg.controller.v_max);
        cfg.controller.d_floor =
            get_number(c, "controller", "difficulty_floor", cfg.controller.d_floor);
        if (c.contains("bucket_breakpoints")) {
            if (!c["bucket_breakpoints"].is_array()) {
                fail("controller.bucket_breakpoints", "expected an array");
            }
            cfg.buckets.breakpoints.clear();
            for (const auto& v : c["bucket_breakpoints"]) {
                if (!v.is_number()) {
                    fail("controller.bucket_breakpoints", "expected numbers");
                }
                cfg.buckets.breakpoints.push_back(v.get<double>());
            }
        }
        if (c.contains("bucket_labels")) {
            if (!c["bucket_labels"].is_array()) {
                fail("controller.bucket_labels", "expected an array");
            }
            cfg.buckets.labels.clear();
            for (const auto& v : c["bucket_labels"]) {
                if (!v.is_string()) {
                    fail("controller.bucket_labels", "expected strings");
                }
                cfg.buckets.labels.push_back(v.get<std::string>());
            }
        }
    }

    if (root.contains("trueskill")) {
        const json& t = root["trueskill"];
        require_keys(t, "trueskill",
                     {"mu0", "sigma0", "beta", "tau", "draw_probability"});
        cfg.trueskill.mu0 = get_number(t, "trueskill", "mu0", cfg.trueskill.mu0);
        cfg.trueskill.sigma0 =
            get_number(t, "trueskill", "sigma0", cfg.trueskill.sigma0);
        cfg.trueskill.beta =
            get_number(t, "trueskill", "beta", cfg.trueskill.sigma0 / 2.0);
        cfg.trueskill.tau =
            get_number(t, "trueskill", "tau", cfg.trueskill.sigma0 / 100.0);
        cfg.trueskill.draw_probability = get_number(
            t, "trueskill", "draw_probability", cfg.trueskill.draw_probability);
    }

    if (root.contains("evolution")) {
        const json& e = root["evolution"];
        require_keys(e, "evolution",
                     {"buffer_threshold", "elite_k", "exclude_self",
                      "answer_marker"});
        int threshold = get_int(e, "evolution", "buffer_threshold",
                                int(cfg.evolution.buffer_threshold));
        if (threshold <= 0) fail("evolution.buffer_threshold", "must be positive");
        cfg.evolution.buffer_threshold = static_cast<size_t>(threshold);
        cfg.evolution.elite_k = get_int(e, "evolution", "elite_k", cfg.evolution.elite_k);
        cfg.evolution.exclude_self =
            get_bool(e, "evolution", "exclude_self", cfg.evolution.exclude_self);
        cfg.evolution.answer_marker =
            get_string(e, "evolution", "answer_marker", cfg.evolution.answer_marker);
    }

    if (root.contains("sampling")) {
        const json& s = root["sampling"];
        require_keys(s, "sampling",
                     {"temperature", "top_p", "max_tokens", "logprobs"});
        cfg.sampling.temperature =
            get_number(s, "sampling", "temperature", cfg.sampling.temperature);
        cfg.sampling.top_p = get_number(s, "sampling", "top_p", cfg.sampling.top_p);
        cfg.sampling.max_tokens =
            get_int(s, "sampling", "max_tokens", cfg.sampling.max_tokens);
        cfg.sampling.logprobs =
            get_bool(s, "sampling", "logprobs", cfg.sampling.logprobs);
    }

    if (root.contains("anchor")) {
        const json& a = root["anchor"];
        require_keys(a, "anchor",
                     {"path", "cadence", "lambda", "surprise_alert", "epsilon",
                      "window"});
        cfg.anchor.path = get_string(a, "anchor", "path", cfg.anchor.path);
        cfg.anchor.cadence = get_int(a, "anchor", "cadence", cfg.anchor.cadence);
        cfg.anchor.lambda = get_number(a, "anchor", "lambda", cfg.anchor.lambda);
        cfg.anchor.surprise_alert =
            get_number(a, "anchor", "surprise_alert", cfg.anchor.surprise_alert);
        cfg.anchor.epsilon = get_number(a, "anchor", "epsilon", cfg.anchor.epsilon);
        cfg.anchor.window = static_cast<size_t>(
            get_int(a, "anchor", "window", int(cfg.anchor.window)));
    }

    if (root.contains("eval")) {
        const json& e = root["eval"];
        require_keys(e, "eval", {"path"});
        cfg.eval.path = get_string(e, "eval", "path", cfg.eval.path);
    }

    if (root.contains("trainer")) {
        const json& t = root["trainer"];
        require_keys(t, "trainer",
                     {"kind", "command", "url", "lora_rank", "lora_alpha",
                      "lora_dropout"});
        std::string kind = get_string(t, "trainer", "kind", "none");
        if (kind == "none") {
            cfg.trainer.kind = TrainerConfig::Kind::None;
        } else if (kind == "simulated") {
            cfg.trainer.kind = TrainerConfig::Kind::Simulated;
        } else if (kind == "command") {
            cfg.trainer.kind = TrainerConfig::Kind::Command;
        } else if (kind == "webhook") {
            cfg.trainer.kind = TrainerConfig::Kind::Webhook;
        } else {
            fail("trainer.kind", "expected none|simulated|command|webhook");
        }
        if (t.contains("command")) {
            if (!t["command"].is_array()) fail("trainer.command", "expected an array");
            for (const auto& part : t["command"]) {
                if (!part.is_string()) fail("trainer.command", "parts must be strings");
                cfg.trainer.command.push_back(part.get<std::string>());
            }
        }
        cfg.trainer.url = get_string(t, "trainer", "url", cfg.trainer.url);
        cfg.trainer.lora.rank =
            get_int(t, "trainer", "lora_rank", cfg.trainer.lora.rank);
        cfg.trainer.lora.alpha =
            get_int(t, "trainer", "lora_alpha", cfg.trainer.lora.alpha);
        cfg.trainer.lora.dropout =
            get_number(t, "trainer", "lora_dropout", cfg.trainer.lora.dropout);
        if (cfg.trainer.kind == TrainerConfig::Kind::Command &&
            cfg.trainer.command.empty()) {
            fail("trainer.command", "command trainer requires argv parts");
        }
        if (cfg.trainer.kind == TrainerConfig::Kind::Webhook &&
            cfg.trainer.url.empty()) {
            fail("trainer.url", "webhook trainer requires a url");
        }
    }

    if (root.contains("sim")) {
        const json& s = root["sim"];
        require_keys(s, "sim",
                     {"icl_gain", "explain_factor", "vote_discrimination",
                      "style_miss_gain", "train_gain", "difficulty_weight",
                      "poison_factor", "diversity_floor",
                      "skill_drift_per_round"});
        cfg.sim.icl_gain = get_number(s, "sim", "icl_gain", cfg.sim.icl_gain);
        cfg.sim.explain_factor =
            get_number(s, "sim", "explain_factor", cfg.sim.explain_factor);
        cfg.sim.vote_discrimination = get_number(s, "sim", "vote_discrimination",
                                                 cfg.sim.vote_discrimination);
        cfg.sim.style_miss_gain =
            get_number(s, "sim", "style_miss_gain", cfg.sim.style_miss_gain);
        cfg.sim.train_gain =
            get_number(s, "sim", "train_gain", cfg.sim.train_gain);
        cfg.sim.difficulty_weight =
            get_number(s, "sim", "difficulty_weight", cfg.sim.difficulty_weight);
        cfg.sim.poison_factor =
            get_number(s, "sim", "poison_factor", cfg.sim.poison_factor);
        cfg.sim.diversity_floor =
            get_number(s, "sim", "diversity_floor", cfg.sim.diversity_floor);
        cfg.sim_skill_drift_per_round =
            get_number(s, "sim", "skill_drift_per_round", 0.0);
    }
    cfg.sim.elite_k = cfg.evolution.elite_k;

    if (root.contains("ablation")) {
        const json& a = root["ablation"];
        require_keys(a, "ablation",
                     {"without_valid_vote", "without_parametric",
                      "without_quality_vote", "without_elite_icl",
                      "without_random_qgen", "without_difficulty_control",
                      "without_external_anchor", "without_explanation",
                      "without_dynamic_strategy", "without_fem"});
        AblationFlags& f = cfg.ablation;
        f.without_valid_vote =
            get_bool(a, "ablation", "without_valid_vote", false);
        f.without_parametric =
            get_bool(a, "ablation", "without_parametric", false);
        f.without_quality_vote =
            get_bool(a, "ablation", "without_quality_vote", false);
        f.without_elite_icl = get_bool(a, "ablation", "without_elite_icl", false);
        f.without_random_qgen =
            get_bool(a, "ablation", "without_random_qgen", false);
        f.without_difficulty_control =
            get_bool(a, "ablation", "without_difficulty_control", false);
        f.without_external_anchor =
            get_bool(a, "ablation", "without_external_anchor", false);
        f.without_explanation =
            get_bool(a, "ablation", "without_explanation", false);
        f.without_dynamic_strategy =
            get_bool(a, "ablation", "without_dynamic_strategy", false);
        f.without_fem = get_bool(a, "ablation", "without_fem", false);
    }

    if (root.contains("isolated")) {
        const json& iso = root["isolated"];
        require_keys(iso, "isolated", {"pool", "samples_per_problem"});
        cfg.isolated.pool = get_string(iso, "isolated", "pool", cfg.isolated.pool);
        cfg.isolated.samples_per_problem = get_int(
            iso, "isolated", "samples_per_problem", cfg.isolated.samples_per_problem);
    }

    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& file,
                       const std::vector<std::string>& overrides) {
    json root = json::object();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) {
            throw ConfigError("cannot open config file " + file.string());
        }
        try {
            in >> root;
        } catch (const json::exception& e) {
            throw ConfigError("config file " + file.string() +
                              " is not valid JSON: " + e.what());
        }
    }
    for (const std::string& spec : overrides) {
        apply_override(root, spec);
    }
    return parse_config_json(std::move(root));
}

void RunConfig::validate() const {
    if (trueskill.sigma0 <= 0.0) fail("trueskill.sigma0", "must be > 0");
    if (trueskill.beta <= 0.0) fail("trueskill.beta", "must be > 0");
    if (trueskill.tau < 0.0) fail("trueskill.tau", "must be >= 0");
    if (trueskill.draw_probability < 0.0 || trueskill.draw_probability >= 1.0) {
        fail("trueskill.draw_probability", "must lie in [0,1)");
    }
    if (controller.alpha < 0.0) fail("controller.learning_rate", "must be >= 0");
    if (controller.v_min >= controller.v_max) {
        fail("controller.target_min", "must be < target_max");
    }
    if (controller.v_min <= 0.0 || controller.v_max >= 1.0) {
        fail("controller.target_min", "clamp must lie strictly inside (0,1)");
    }
    if (controller.window_len == 0) fail("controller.window", "must be >= 1");
    if (buckets.labels.size() != buckets.breakpoints.size() + 1) {
        fail("controller.bucket_labels",
             "need exactly one more label than breakpoints");
    }
    if (!std::is_sorted(buckets.breakpoints.begin(), buckets.breakpoints.end())) {
        fail("controller.bucket_breakpoints", "must be ascending");
    }
    if (sampling.temperature < 0.0) fail("sampling.temperature", "must be >= 0");
    if (sampling.top_p <= 0.0 || sampling.top_p > 1.0) {
        fail("sampling.top_p", "must lie in (0,1]");
    }
    if (sampling.max_tokens <= 0) fail("sampling.max_tokens", "must be positive");
    if (anchor.lambda < 0.0 || anchor.lambda > 1.0) {
        fail("anchor.lambda", "must lie in [0,1]");
    }
    if (evolution.elite_k < 0) fail("evolution.elite_k", "must be >= 0");
    if (run.rounds < 0) fail("run.rounds", "must be >= 0");
    if (run.challenges_per_round < 1) {
        fail("run.challenges_per_round", "must be >= 1");
    }
    if (isolated.samples_per_problem < 1) {
        fail("isolated.samples_per_problem", "must be >= 1");
    }
    std::set<AgentId> ids;
    for (const AgentSpec& spec : ensemble) {
        if (!ids.insert(spec.id).second) {
            fail("ensemble", "duplicate agent id '" + spec.id + "'");
        }
    }
}

void RunConfig::require_ensemble(bool simulated_only) const {
    if (ensemble.empty()) {
        fail("ensemble", "an ensemble spec is required for this command");
    }
    if (simulated_only) {
        for (const AgentSpec& spec : ensemble) {
            if (spec.backend != BackendKind::Simulated) {
                fail("ensemble",
                     "agent '" + spec.id +
                         "' is remote; this command runs fully simulated");
            }
        }
    }
}

void RunConfig::require_isolated_pool() const {
    if (isolated.pool.empty()) {
        fail("isolated.pool", "isolated mode requires a seed problem pool");
    }
}

nlohmann::json RunConfig::to_json() const {
    json ensemble_json = json::array();
    for (const AgentSpec& spec : ensemble) {
        json roles = json::array();
        for (Role role : spec.roles) roles.push_back(to_string(role));
        json agent{{"id", spec.id}, {"roles", roles}};
        if (spec.backend == BackendKind::Simulated) {
            agent["backend"] = "simulated";
            agent["profile"] = {
                {"latent_skill", spec.profile.latent_skill},
                {"verify_miss_rate", spec.profile.verify_miss_rate},
                {"verify_false_reject_rate", spec.profile.verify_false_reject_rate},
                {"style_quality", spec.profile.style_quality},
                {"seed", spec.profile.seed},
            };
        } else {
            agent["backend"] = "remote";
            agent["endpoint"] = {
                {"base_url", spec.endpoint.base_url},
                {"path", spec.endpoint.path},
                {"model", spec.endpoint.model},
                {"api_key_env", spec.endpoint.api_key_env},
                {"max_retries", spec.endpoint.max_retries},
                {"timeout_ms", spec.endpoint.timeout_ms},
                {"retry_backoff_ms", spec.endpoint.retry_backoff_ms},
            };
        }
        ensemble_json.push_back(std::move(agent));
    }

    std::string trainer_kind = "none";
    if (trainer.kind == TrainerConfig::Kind::Simulated) trainer_kind = "simulated";
    if (trainer.kind == TrainerConfig::Kind::Command) trainer_kind = "command";
    if (trainer.kind == TrainerConfig::Kind::Webhook) trainer_kind = "webhook";

    return json{
        {"run",
         {{"seed", run.seed},
          {"rounds", run.rounds},
          {"challenges_per_round", run.challenges_per_round},
          {"eval_cadence", run.eval_cadence},
          {"checkpoint_cadence", run.checkpoint_cadence},
          {"halt_after_aborts", run.halt_after_aborts}}},
        {"ensemble", ensemble_json},
        {"controller",
         {{"initial_difficulty", controller.d},
          {"learning_rate", controller.alpha},
          {"initial_target", controller.v_target},
          {"margin", controller.margin},
          {"window", controller.window_len},
          {"target_min", controller.v_min},
          {"target_max", controller.v_max},
          {"difficulty_floor", controller.d_floor},
          {"bucket_breakpoints", buckets.breakpoints},
          {"bucket_labels", buckets.labels}}},
        {"trueskill",
         {{"mu0", trueskill.mu0},
          {"sigma0", trueskill.sigma0},
          {"beta", trueskill.beta},
          {"tau", trueskill.tau},
          {"draw_probability", trueskill.draw_probability}}},
        {"evolution",
         {{"buffer_threshold", evolution.buffer_threshold},
          {"elite_k", evolution.elite_k},
          {"exclude_self", evolution.exclude_self},
          {"answer_marker", evolution.answer_marker}}},
        {"sampling",
         {{"temperature", sampling.temperature},
          {"top_p", sampling.top_p},
          {"max_tokens", sampling.max_tokens},
          {"logprobs", sampling.logprobs}}},
        {"anchor",
         {{"path", anchor.path},
          {"cadence", anchor.cadence},
          {"lambda", anchor.lambda},
          {"surprise_alert", anchor.surprise_alert},
          {"epsilon", anchor.epsilon},
          {"window", anchor.window}}},
        {"eval", {{"path", eval.path}}},
        {"trainer",
         {{"kind", trainer_kind},
          {"command", trainer.command},
          {"url", trainer.url},
          {"lora_rank", trainer.lora.rank},
          {"lora_alpha", trainer.lora.alpha},
          {"lora_dropout", trainer.lora.dropout}}},
        {"sim",
         {{"icl_gain", sim.icl_gain},
          {"explain_factor", sim.explain_factor},
          {"vote_discrimination", sim.vote_discrimination},
          {"style_miss_gain", sim.style_miss_gain},
          {"train_gain", sim.train_gain},
          {"difficulty_weight", sim.difficulty_weight},
          {"poison_factor", sim.poison_factor},
          {"diversity_floor", sim.diversity_floor},
          {"skill_drift_per_round", sim_skill_drift_per_round}}},
        {"ablation",
         {{"without_valid_vote", ablation.without_valid_vote},
          {"without_parametric", ablation.without_parametric},
          {"without_quality_vote", ablation.without_quality_vote},
          {"without_elite_icl", ablation.without_elite_icl},
          {"without_random_qgen", ablation.without_random_qgen},
          {"without_difficulty_control", ablation.without_difficulty_control},
          {"without_external_anchor", ablation.without_external_anchor},
          {"without_explanation", ablation.without_explanation},
          {"without_dynamic_strategy", ablation.without_dynamic_strategy},
          {"without_fem", ablation.without_fem}}},
        {"isolated",
         {{"pool", isolated.pool},
          {"samples_per_problem", isolated.samples_per_problem}}},
    };
}

uint64_t RunConfig::digest() const { return fnv1a64(to_json().dump()); }

std::vector<Challenge> load_problem_file(const std::filesystem::path& path) {
    std::vector<Challenge> problems;
    int line_no = 0;
    for (const nlohmann::json& record : read_jsonl(path)) {
        ++line_no;
        Challenge problem;
        if (!record.contains("id") || !record.contains("prompt")) {
            throw ConfigError("problem file " + path.string() + " line " +
                              std::to_string(line_no) +
                              ": id and prompt are required");
        }
        problem.id = record["id"].is_string()
                         ? record["id"].get<std::string>()
                         : record["id"].dump();
        problem.prompt = record["prompt"].get<std::string>();
        if (record.contains("gold_answer")) {
            problem.gold_answer = record["gold_answer"].is_string()
                                      ? record["gold_answer"].get<std::string>()
                                      : record["gold_answer"].dump();
        }
        problem.difficulty = record.value("difficulty", 1.0);
        problem.dedup_digest = fnv1a64(problem.prompt);
        problems.push_back(std::move(problem));
    }
    if (problems.empty()) {
        throw ConfigError("problem file " + path.string() + " is empty");
    }
    return problems;
}

}  // namespace agora
