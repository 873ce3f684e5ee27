#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"

#include "agora/config.hpp"
#include "agora/curriculum.hpp"
#include "agora/evaluation.hpp"
#include "agora/evolution.hpp"
#include "agora/orchestrator.hpp"
#include "agora/trueskill.hpp"

namespace py = pybind11;
using namespace agora;

namespace {

// Run a full simulated experiment from a config JSON string; returns the
// final report as a dict.
py::dict run_simulation(const std::string& config_json, const std::string& outdir,
                        bool isolated) {
    RunConfig config = parse_config_json(nlohmann::json::parse(config_json));
    config.require_ensemble(/*simulated_only=*/true);
    Orchestrator engine(std::move(config), outdir,
                        isolated ? Orchestrator::Mode::Isolated
                                 : Orchestrator::Mode::Collaborative);
    RunReport report = engine.run_experiment();
    py::module_ json_mod = py::module_::import("json");
    return json_mod.attr("loads")(report.to_json().dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core operations of the agora ensemble orchestration engine";

    py::class_<ControllerState>(m, "ControllerState")
        .def(py::init<>())
        .def_readwrite("d", &ControllerState::d)
        .def_readwrite("alpha", &ControllerState::alpha)
        .def_readwrite("v_target", &ControllerState::v_target)
        .def_readwrite("margin", &ControllerState::margin)
        .def_readwrite("window_len", &ControllerState::window_len)
        .def_readwrite("d_floor", &ControllerState::d_floor)
        .def_readwrite("v_min", &ControllerState::v_min)
        .def_readwrite("v_max", &ControllerState::v_max)
        .def_property_readonly("pass_window", [](const ControllerState& s) {
            return std::vector<double>(s.pass_window.begin(), s.pass_window.end());
        });

    m.def("update_difficulty", &update_difficulty, py::arg("state"),
          py::arg("pass_rate"),
          "Inner-loop difficulty update from a round's pass rate.");
    m.def("update_target", &update_target, py::arg("state"),
          "Outer-loop target update from the trailing pass window.");

    py::class_<Rating>(m, "Rating")
        .def(py::init<>())
        .def(py::init([](double mu, double sigma) {
                 return Rating{mu, sigma};
             }),
             py::arg("mu"), py::arg("sigma"))
        .def_readwrite("mu", &Rating::mu)
        .def_readwrite("sigma", &Rating::sigma)
        .def("conservative", &Rating::conservative)
        .def("__repr__", [](const Rating& r) {
            return "Rating(mu=" + std::to_string(r.mu) +
                   ", sigma=" + std::to_string(r.sigma) + ")";
        });

    py::class_<TrueSkillParams>(m, "TrueSkillParams")
        .def(py::init<>())
        .def_readwrite("mu0", &TrueSkillParams::mu0)
        .def_readwrite("sigma0", &TrueSkillParams::sigma0)
        .def_readwrite("beta", &TrueSkillParams::beta)
        .def_readwrite("tau", &TrueSkillParams::tau)
        .def_readwrite("draw_probability", &TrueSkillParams::draw_probability);

    m.def(
        "trueskill_update",
        [](const Rating& winner, const Rating& loser, const TrueSkillParams& p,
           bool draw) {
            return trueskill_update(
                winner, loser, p,
                draw ? MatchOutcome::Draw : MatchOutcome::Decisive);
        },
        py::arg("winner"), py::arg("loser"),
        py::arg("params") = TrueSkillParams{}, py::arg("draw") = false,
        "Two-player rating update; returns (winner, loser).");

    m.def("internal_surprise",
          py::overload_cast<double, double, double>(&internal_surprise),
          py::arg("mu_star"), py::arg("mu_bar"), py::arg("epsilon") = 1e-9,
          "Squared relative gap between peak and average performance.");

    m.def("pass_at_k", &pass_at_k, py::arg("results"), py::arg("k"),
          "Mean correctness over exactly k per-problem results.");

    m.def("indicator", &indicator, py::arg("consensus_accepted"),
          py::arg("author_mu"), py::arg("ensemble_mean_mu"),
          "Quality gate: accepted and author mu strictly above the mean.");

    m.def(
        "sft_loss",
        [](const std::vector<double>& logprobs) {
            SftLoss loss = sft_loss(logprobs);
            return py::make_tuple(loss.total, loss.per_token_mean);
        },
        py::arg("token_logprobs"),
        "Negative logprob sum over completion tokens: (total, per-token mean).");

    m.def("strict_majority", &strict_majority, py::arg("answers"),
          "Self-consistency majority answer, or None on a split.");

    m.def("solve_probability", &solve_probability, py::arg("latent_skill"),
          py::arg("difficulty"),
          "Logistic success model of the simulated solver.");

    py::class_<InteractionRecord>(m, "InteractionRecord")
        .def(py::init([](const std::string& challenge_id,
                         const std::string& author, double quality, int round) {
                 InteractionRecord r;
                 r.challenge.id = challenge_id;
                 r.challenge.prompt = challenge_id;
                 r.author = author;
                 r.quality_score = quality;
                 r.round = round;
                 return r;
             }),
             py::arg("challenge_id"), py::arg("author"), py::arg("quality"),
             py::arg("round") = 0)
        .def_property_readonly(
            "challenge_id",
            [](const InteractionRecord& r) { return r.challenge.id; })
        .def_readonly("author", &InteractionRecord::author)
        .def_readonly("quality", &InteractionRecord::quality_score)
        .def_readonly("round", &InteractionRecord::round);

    py::class_<EliteHistory>(m, "EliteHistory")
        .def(py::init<int>(), py::arg("capacity") = 3)
        .def("update", &EliteHistory::update, py::arg("record"))
        .def("records", &EliteHistory::records)
        .def("capacity", &EliteHistory::capacity);

    py::class_<HQBuffer>(m, "HQBuffer")
        .def(py::init<size_t>(), py::arg("threshold") = 1024)
        .def(
            "push",
            [](HQBuffer& buffer, const std::string& prompt,
               const std::string& completion, const std::string& author,
               int round, int gate) -> py::object {
                BufferEntry e;
                e.prompt = prompt;
                e.completion = completion;
                e.author = author;
                e.round = round;
                e.prompt_digest = fnv1a64(prompt);
                e.completion_digest = fnv1a64(completion);
                e.topic = topic_digest(prompt);
                auto flush = buffer.push(e, gate);
                if (!flush) return py::none();
                py::list entries;
                for (const BufferEntry& entry : flush->entries) {
                    py::dict d;
                    d["prompt"] = entry.prompt;
                    d["completion"] = entry.completion;
                    d["author"] = entry.author;
                    d["round"] = entry.round;
                    entries.append(d);
                }
                py::dict out;
                out["epoch"] = flush->epoch;
                out["entries"] = entries;
                return out;
            },
            py::arg("prompt"), py::arg("completion"), py::arg("author"),
            py::arg("round"), py::arg("gate"),
            "Gated push; returns a flush dict when the threshold fills.")
        .def("size", &HQBuffer::size)
        .def("epoch", &HQBuffer::epoch)
        .def("threshold", &HQBuffer::threshold);

    m.def("run_simulation", &run_simulation, py::arg("config_json"),
          py::arg("outdir"), py::arg("isolated") = false,
          "Run a fully simulated experiment; returns the report as a dict.");

#ifdef AGORA_VERSION_INFO
    m.attr("__version__") = AGORA_VERSION_INFO;
#else
    m.attr("__version__") = "dev";
#endif
}
