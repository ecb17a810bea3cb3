// robustlin: experiment runner, self-check and profile printer.

#include "robustlin/experiments.hpp"
#include "robustlin/problem_io.hpp"
#include "robustlin/robustlin.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw robustlin::config_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int default_jobs() {
    if (const char* env = std::getenv("ROBUSTLIN_JOBS")) {
        try {
            int j = std::stoi(env);
            if (j >= 1) return j;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid ROBUSTLIN_JOBS='" << env << "'\n";
    }
    return 1;
}

nlohmann::json profile_json(const robustlin::ProblemSpec& pb, const robustlin::AttackNorm& norm, double r, double eps) {
    using namespace robustlin;
    const TradeoffProfile tp = tradeoff_profile(pb, norm, r, eps);
    nlohmann::json j;
    j["norm"] = norm.describe();
    j["r"] = tp.r;
    j["eps"] = tp.eps;
    j["eps_fl"] = tp.eps_fl;
    j["lambda_opt"] = tp.lambda_opt;
    j["e_opt"] = tp.e_opt;
    j["e_opt_eps"] = tp.e_opt_eps;
    j["exact_adversarial_at_w_star"] = tp.exact_adversarial;
    j["proxy_bracket"] = {tp.e_opt_eps, kC2 * tp.e_opt_eps};
    j["free_lunch"] = tp.free_lunch;
    j["w_star"] = std::vector<double>(tp.w_star.data(), tp.w_star.data() + tp.w_star.size());
    const ConditionNumbers cn = condition_numbers(pb, norm);
    j["condition_numbers"] = {{"r0", cn.r0}, {"r1", cn.r1}, {"eta0", cn.eta0}};
    const Bracket br = two_sided_bounds(pb, norm, r, eps);
    j["order_bracket"] = {{"lower", br.lower}, {"upper", br.upper}};
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robustlin: accuracy/robustness tradeoffs for linear regression under test-time attacks"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment and write CSV rows");
    std::string experiment, config_path, out_path;
    std::uint64_t seed = 0;
    int replicates = 0, jobs = 0;
    double lam_scale = -1.0;
    bool print_config = false;
    run->add_option("--experiment", experiment, "experiment tag")
        ->check(CLI::IsMember(robustlin::experiment_tags()));
    run->add_option("--config", config_path, "TOML config file");
    run->add_option("--out", out_path, "CSV output path");
    auto* seed_opt = run->add_option("--seed", seed, "base seed");
    run->add_option("--replicates", replicates, "replicates per sweep point")->check(CLI::PositiveNumber);
    run->add_option("--jobs", jobs, "worker threads (default: ROBUSTLIN_JOBS or 1)")->check(CLI::PositiveNumber);
    run->add_option("--lam-scale", lam_scale, "Lasso penalty multiplier")->check(CLI::NonNegativeNumber);
    run->add_flag("--print-config", print_config, "print the effective config and exit");

    auto* check = app.add_subcommand("check", "run the bounds_check property suite");
    std::uint64_t check_seed = 1;
    check->add_option("--seed", check_seed, "base seed");

    auto* profile = app.add_subcommand("profile", "print a tradeoff profile as JSON");
    std::string problem_path, norm_spec = "l2";
    double r = 0.0, eps = 1.0;
    profile->add_option("--problem", problem_path, "problem TOML file")->required();
    profile->add_option("--norm", norm_spec, "attack norm: l2, linf, l<p>, lp(<p>)");
    profile->add_option("--r", r, "attack strength")->required();
    profile->add_option("--eps", eps, "excess-risk tolerance in [0, 1]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            robustlin::ExperimentConfig cfg;
            cfg.jobs = default_jobs();
            if (!config_path.empty()) cfg = robustlin::config_from_toml(read_file(config_path), cfg);
            if (!experiment.empty()) cfg.experiment = experiment;
            if (*seed_opt) cfg.seed = seed;
            if (replicates > 0) cfg.replicates = replicates;
            if (jobs > 0) cfg.jobs = jobs;
            if (lam_scale >= 0.0) cfg.lam_scale = lam_scale;
            if (!out_path.empty()) cfg.out = out_path;
            if (cfg.experiment.empty()) throw robustlin::config_error("no experiment given (--experiment or config)");
            cfg.validate();
            if (print_config) {
                std::cout << robustlin::config_to_toml(cfg);
                return 0;
            }
            const robustlin::RunResult res = robustlin::run_experiment(cfg);
            if (cfg.out.empty() || cfg.out == "-") {
                robustlin::write_csv(std::cout, res);
            } else {
                std::ofstream os(cfg.out, std::ios::binary);
                if (!os) throw robustlin::config_error("cannot write '" + cfg.out + "'");
                robustlin::write_csv(os, res);
                std::cout << robustlin::emit_summary(res);
            }
            if (res.failures) std::cerr << "warning: " << res.failures << " point(s) failed\n";
            return 0;
        }
        if (*check) {
            robustlin::ExperimentConfig cfg;
            cfg.experiment = "bounds_check";
            cfg.seed = check_seed;
            cfg.jobs = default_jobs();
            const robustlin::RunResult res = robustlin::run_experiment(cfg);
            int total = 0, failed = 0;
            for (const auto& row : res.rows) {
                ++total;
                if (row.status != "ok" || row.metric_value != 1.0) {
                    ++failed;
                    std::cout << "FAIL problem=" << row.sweep_value << " " << row.metric_name << "\n";
                }
            }
            std::cout << "bounds_check: " << total - failed << "/" << total << " checks passed\n";
            return failed ? 1 : 0;
        }
        if (*profile) {
            const robustlin::ProblemSpec pb = robustlin::problem_from_toml_text(read_file(problem_path));
            const robustlin::AttackNorm norm = robustlin::parse_norm(norm_spec);
            std::cout << profile_json(pb, norm, r, eps).dump(2) << "\n";
            return 0;
        }
    } catch (const robustlin::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const robustlin::toml::parse_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
