#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "agora/config.hpp"

namespace testutil {

// Scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path() / "agora-tests";
        std::filesystem::create_directories(base);
        static std::atomic<int> counter{0};
        path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

inline std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<size_t> order(xs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> out(xs.size());
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        double avg = 0.5 * (i + j) + 1.0;  // average rank for ties
        for (size_t k = i; k <= j; ++k) out[order[k]] = avg;
        i = j + 1;
    }
    return out;
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
    std::vector<double> ra = ranks(a);
    std::vector<double> rb = ranks(b);
    double ma = mean(ra), mb = mean(rb);
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
    double ma = mean(a), mb = mean(b);
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

// Write a line-delimited problem file; difficulties cycle through the given
// list. Gold answers are short numeric strings.
inline std::filesystem::path write_problem_file(
    const std::filesystem::path& path, int count,
    const std::vector<double>& difficulties) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (int i = 0; i < count; ++i) {
        nlohmann::json record{
            {"id", "p" + std::to_string(i)},
            {"prompt", "Problem " + std::to_string(i) +
                           ": compute the checked quantity."},
            {"gold_answer", std::to_string(100 + i)},
            {"difficulty", difficulties[i % difficulties.size()]},
        };
        out << record.dump() << "\n";
    }
    return path;
}

inline agora::AgentSpec sim_agent(const std::string& id, double skill,
                                  double miss, double false_reject,
                                  double style, uint64_t seed) {
    agora::AgentSpec spec;
    spec.id = id;
    spec.roles = {agora::Role::Generator, agora::Role::Solver,
                  agora::Role::Verifier, agora::Role::Voter};
    spec.backend = agora::BackendKind::Simulated;
    spec.profile.latent_skill = skill;
    spec.profile.verify_miss_rate = miss;
    spec.profile.verify_false_reject_rate = false_reject;
    spec.profile.style_quality = style;
    spec.profile.seed = seed;
    return spec;
}

// A five-member simulated desk ensemble with mild skill spread.
inline agora::RunConfig desk_config(uint64_t seed = 42) {
    agora::RunConfig cfg;
    cfg.run.seed = seed;
    cfg.run.rounds = 20;
    cfg.run.challenges_per_round = 4;
    cfg.run.eval_cadence = 0;
    cfg.run.checkpoint_cadence = 0;
    cfg.evolution.buffer_threshold = 32;
    cfg.trainer.kind = agora::TrainerConfig::Kind::Simulated;
    double skills[5] = {1.6, 1.4, 1.2, 1.0, 0.8};
    double styles[5] = {1.0, 0.5, 0.0, -0.5, -1.0};
    for (int i = 0; i < 5; ++i) {
        cfg.ensemble.push_back(sim_agent("agent" + std::to_string(i), skills[i],
                                         0.15, 0.02, styles[i],
                                         seed * 100 + i));
    }
    return cfg;
}

}  // namespace testutil
