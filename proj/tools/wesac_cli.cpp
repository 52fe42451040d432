#include "wesac/entropy.hpp"
#include "wesac/envs.hpp"
#include "wesac/harness.hpp"
#include "wesac/mdp_io.hpp"
#include "wesac/soft_solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wesac;

namespace {

json report_json(const SolveReport& r) {
    return {{"iterations", r.iterations},
            {"final_sup_norm_delta", r.final_sup_norm_delta},
            {"objective_trace", r.objective_trace},
            {"converged", r.converged}};
}

json verdict_json(const LemmaVerdict& v) {
    return {{"trials", v.trials},
            {"condition_hits", v.condition_hits},
            {"violations", v.violations},
            {"worst_violation", v.worst_violation}};
}

TabularMdp mdp_arg(const std::string& arg) {
    if (fs::exists(arg)) return load_mdp(arg);
    if (auto m = env::tabular_model(arg)) return *m;
    throw std::invalid_argument("--mdp: no file or tabular env named '" + arg + "'");
}

WeightTable weights_arg(const std::string& arg, const TabularMdp& m, std::uint64_t seed) {
    const auto s = static_cast<Eigen::Index>(m.n_states);
    const auto a = static_cast<Eigen::Index>(m.n_actions);
    if (arg == "ones") return WeightTable::ones(m.n_states, m.n_actions);
    WeightTable w;
    if (arg == "random") {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        w.w.resize(s, a);
        for (Eigen::Index i = 0; i < w.w.size(); ++i) w.w.data()[i] = u(rng);
    } else {
        std::ifstream in(arg);
        if (!in) throw std::invalid_argument("--weights: cannot open '" + arg + "'");
        w.w = table_from_json(json::parse(in));
    }
    if (w.w.rows() != s || w.w.cols() != a) throw std::invalid_argument("--weights: table shape differs from the MDP");
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted-entropy soft actor-critic toolkit"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "Run training jobs from a JSON config");
    std::string config_path, out_dir = "runs";
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "Output directory");
    train->add_option("--threads", threads, "Worker threads for multi-seed configs");

    auto* cmp = app.add_subcommand("compare", "Percent improvement of run set b over run set a");
    std::string dir_a, dir_b, cmp_json;
    cmp->add_option("--a", dir_a, "Baseline run directory")->required();
    cmp->add_option("--b", dir_b, "Candidate run directory")->required();
    cmp->add_option("--json", cmp_json, "Also write the report as JSON");

    auto* solve = app.add_subcommand("solve-tabular", "Weighted soft policy iteration on a tabular MDP");
    std::string mdp_path, weights = "ones";
    double alpha = 1.0, tol = 1e-10;
    std::uint64_t wseed = 0;
    solve->add_option("--mdp", mdp_path, "MDP JSON file or tabular env name")->required();
    solve->add_option("--alpha", alpha, "Temperature")->check(CLI::NonNegativeNumber);
    solve->add_option("--weights", weights, "ones | random | table JSON file");
    solve->add_option("--tol", tol, "Policy-change tolerance");
    solve->add_option("--seed", wseed, "Seed for --weights random");

    auto* verify = app.add_subcommand("verify", "Brute-force policy-improvement lemma check");
    int lemma = 2;
    std::size_t trials = 1000;
    std::uint64_t vseed = 0;
    verify->add_option("--lemma", lemma, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    verify->add_option("--trials", trials, "Trials (lemma 2) or premise-satisfying candidates (lemma 1)");
    verify->add_option("--seed", vseed, "Seed");

    auto* went = app.add_subcommand("max-went", "Maximum weighted entropy distribution");
    std::vector<double> wvec;
    double went_tol = 1e-10;
    went->add_option("--weights", wvec, "Comma separated positive weights")->required()->delimiter(',');
    went->add_option("--tol", went_tol, "Normalization tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto configs = harness::load_configs(config_path);
            const auto results = harness::run_experiments(configs, out_dir, threads);
            for (const auto& r : results) {
                std::cout << r.csv_path.string() << "  " << harness::to_json(r.summary).dump() << "\n";
            }
        } else if (*cmp) {
            const auto report = harness::compare(dir_a, dir_b);
            std::cout << harness::format_report(report);
            if (!cmp_json.empty()) {
                std::ofstream out(cmp_json);
                out << harness::to_json(report).dump(2) << "\n";
            }
        } else if (*solve) {
            const auto m = mdp_arg(mdp_path);
            require_valid_mdp(m);
            const auto w = weights_arg(weights, m, wseed);
            const auto res = solve_weighted_soft_pi(m, w, alpha, tol);
            json out{{"policy", table_to_json(res.policy.pi)},
                     {"q", table_to_json(res.q.q)},
                     {"report", report_json(res.report)}};
            std::cout << out.dump(2) << "\n";
        } else if (*verify) {
            const auto v = lemma == 1 ? verify_lemma1(vseed, trials) : verify_lemma2(vseed, trials);
            std::cout << verdict_json(v).dump(2) << "\n";
            return v.violations == 0 ? 0 : 1;
        } else if (*went) {
            const auto s = max_weighted_entropy(wvec, went_tol);
            json out{{"p_star", s.p_star}, {"zeta", s.zeta}, {"value", s.value}};
            std::cout << out.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
