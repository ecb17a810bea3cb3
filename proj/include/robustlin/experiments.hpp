#pragma once

#include "robustlin/bounds.hpp"
#include "robustlin/estimators.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/problem.hpp"
#include "robustlin/random.hpp"
#include "robustlin/regimes.hpp"
#include "robustlin/risk.hpp"
#include "robustlin/rmt.hpp"
#include "robustlin/toml_lite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <exception>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace robustlin {

struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExperimentConfig {
    std::string experiment;
    std::vector<double> sweep;  // empty: experiment default
    int replicates = 1;
    std::uint64_t seed = 0;
    std::optional<double> lam_scale;
    std::string out;
    int jobs = 1;
    toml::Value params = toml::Value::make_table();

    void validate() const;
};

struct Row {
    double sweep_value = kNaN;
    int replicate = 0;
    std::uint64_t seed = 0;
    double n = kNaN, d = kNaN, s = kNaN, r = kNaN, eps = kNaN;
    std::string metric_name;
    double metric_value = kNaN;
    std::string status = "ok";
    std::vector<double> theory;
};

struct PointContext {
    double value = 0.0;
    std::size_t sweep_index = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    const toml::Value* params = nullptr;
    double lam_scale = 1.0;

    double param(const std::string& key, double fallback) const {
        const toml::Value* v = params ? params->find(key) : nullptr;
        return v ? v->as_double() : fallback;
    }
    std::vector<double> param_list(const std::string& key, std::vector<double> fallback) const {
        const toml::Value* v = params ? params->find(key) : nullptr;
        return v ? v->as_doubles() : fallback;
    }
};

struct Experiment {
    std::string tag;
    std::string sweep_var;
    std::vector<double> default_sweep;
    std::vector<std::string> theory_columns;
    std::vector<std::string> notes;
    std::function<std::vector<Row>(const PointContext&)> run;
};

// Replicate i starts from splitmix64(seed + i); the sweep index is mixed in afterwards.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t sweep_index, int replicate) {
    const std::uint64_t base = splitmix64(seed + static_cast<std::uint64_t>(replicate));
    return splitmix64(base ^ splitmix64(0xA24BAED4963EE407ull + sweep_index));
}

namespace experiments {

inline std::vector<double> lasso_curse_default_d() {
    std::vector<double> d;
    for (int v = 10; v <= 100; v += 10) d.push_back(v);
    for (int v = 150; v <= 750; v += 50) d.push_back(v);
    return d;
}

inline Vec gaussian_vector(Rng& rng, Eigen::Index d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = g(rng);
    return v;
}

inline Row base_row(const PointContext& ctx) {
    Row r;
    r.sweep_value = ctx.value;
    r.replicate = ctx.replicate;
    r.seed = ctx.seed;
    return r;
}

inline Experiment lasso_curse() {
    Experiment e;
    e.tag = "lasso_curse";
    e.sweep_var = "d";
    e.default_sweep = lasso_curse_default_d();
    e.theory_columns = {"log_d"};
    e.notes = {"Lasso penalty: lam_scale * sigma * sqrt(s log(e d/s) / n) (no cross-validation)",
               "E_opt(r) is the proxy optimum sigma^2 + F(r, r^2) of the l-infinity prox path"};
    e.run = [](const PointContext& ctx) {
        const int d = static_cast<int>(ctx.value);
        if (d < 1) throw config_error("lasso_curse: d must be >= 1");
        const auto n = static_cast<Eigen::Index>(ctx.param("n", 1500));
        const double sigma = ctx.param("sigma", 0.1);
        const int s = std::max(1, static_cast<int>(std::floor(std::sqrt(double(d)))));
        const double r = std::sqrt(std::log(double(d)) / s);

        Rng rng = make_rng(substream(ctx.seed, 0));
        Vec w0 = Vec::Zero(d);
        w0.head(s) = gaussian_vector(rng, s);
        const ProblemSpec pb = ProblemSpec::make(Vec::Ones(d), w0, sigma);
        const Dataset ds = sample_dataset(pb, n, substream(ctx.seed, 1));
        const double lam = ctx.lam_scale * lasso_theoretical_lambda(sigma, s, d, n);
        const AttackNorm norm = AttackNorm::linf();
        const ModelVector w = lasso(ds, lam);
        const double adv = adversarial_risk(pb, norm, w, r);
        const double e_opt = tradeoff_profile(pb, norm, r, 1.0).e_opt;

        std::vector<Row> rows;
        auto add = [&](const char* name, double v) {
            Row row = base_row(ctx);
            row.n = double(n);
            row.d = d;
            row.s = s;
            row.r = r;
            row.metric_name = name;
            row.metric_value = v;
            row.theory = {std::log(double(d))};
            rows.push_back(row);
        };
        add("std_risk_lasso", standard_risk(pb, w));
        add("adv_risk_lasso", adv);
        add("adv_risk_w0", adversarial_risk(pb, norm, w0, r));
        add("e_opt", e_opt);
        add("ratio", adv / e_opt);
        return rows;
    };
    return e;
}

inline Experiment overparam() {
    Experiment e;
    e.tag = "overparam";
    e.sweep_var = "n";
    e.default_sweep = {100, 150, 200, 300, 400, 500, 600, 700, 800, 900, 950,
                       1050, 1100, 1250, 1500, 2000, 3000, 5000, 10000};
    e.theory_columns = {"gamma", "hastie_excess"};
    e.notes = {"hastie_excess uses sigma_tilde^2 = sigma^2 / d (E||w0||^2 = d)"};
    e.run = [](const PointContext& ctx) {
        const auto d = static_cast<Eigen::Index>(ctx.param("d", 1000));
        const double sigma = ctx.param("sigma", 0.1);
        const std::vector<double> radii = ctx.param_list("radii", {0.0, 0.1, 0.5, 1.0});
        const auto n = static_cast<Eigen::Index>(ctx.value);
        if (n < 1) throw config_error("overparam: n must be >= 1");
        Rng rng = make_rng(substream(ctx.seed, 0));
        const Vec w0 = gaussian_vector(rng, d);
        const ProblemSpec pb = ProblemSpec::make(Vec::Ones(d), w0, sigma);
        const Dataset ds = sample_dataset(pb, n, substream(ctx.seed, 1));
        const ModelVector w = ols(ds);
        const AttackNorm norm = AttackNorm::l2();
        const double gamma = double(d) / double(n);
        double hastie = kNaN;
        if (gamma != 1.0) hastie = ols_asymptotic_excess(gamma, sigma * sigma / double(d));

        std::vector<Row> rows;
        auto add = [&](const std::string& name, double r, double v) {
            Row row = base_row(ctx);
            row.n = double(n);
            row.d = double(d);
            row.r = r;
            row.metric_name = name;
            row.metric_value = v;
            row.theory = {gamma, hastie};
            rows.push_back(row);
        };
        add("excess", kNaN, excess_risk(pb, w));
        for (double r : radii) {
            char name[64];
            std::snprintf(name, sizeof name, "adv_risk@r=%g", r);
            add(name, r, adversarial_risk(pb, norm, w, r));
        }
        return rows;
    };
    return e;
}

inline Experiment ols_vs_opt() {
    Experiment e;
    e.tag = "ols_vs_opt";
    e.sweep_var = "r";
    e.default_sweep = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    e.theory_columns = {"opt_proxy_l2", "opt_proxy_linf"};
    e.notes = {"OPT baseline: oracle tradeoff_profile at eps = 1 (exact adversarial risk of its w_star)"};
    e.run = [](const PointContext& ctx) {
        const auto n = static_cast<Eigen::Index>(ctx.param("n", 200));
        const auto d = static_cast<Eigen::Index>(ctx.param("d", 20));
        const double sigma = ctx.param("sigma", 0.1);
        const double r = ctx.value;
        Rng rng = make_rng(substream(ctx.seed, 0));
        const Vec w0 = gaussian_vector(rng, d);
        const ProblemSpec pb = ProblemSpec::make(Vec::Ones(d), w0, sigma);
        const Dataset ds = sample_dataset(pb, n, substream(ctx.seed, 1));
        const ModelVector w = ols(ds);
        const AttackNorm l2 = AttackNorm::l2(), linf = AttackNorm::linf();
        const TradeoffProfile p2 = tradeoff_profile(pb, l2, r, 1.0);
        const TradeoffProfile pinf = tradeoff_profile(pb, linf, r, 1.0);

        std::vector<Row> rows;
        auto add = [&](const char* name, double v) {
            Row row = base_row(ctx);
            row.n = double(n);
            row.d = double(d);
            row.r = r;
            row.metric_name = name;
            row.metric_value = v;
            row.theory = {p2.e_opt, pinf.e_opt};
            rows.push_back(row);
        };
        add("ols_std_risk", standard_risk(pb, w));
        add("ols_adv_l2", adversarial_risk(pb, l2, w, r));
        add("opt_adv_l2", p2.exact_adversarial);
        add("ols_adv_linf", adversarial_risk(pb, linf, w, r));
        add("opt_adv_linf", pinf.exact_adversarial);
        return rows;
    };
    return e;
}

inline Experiment polydecay() {
    Experiment e;
    e.tag = "polydecay";
    e.sweep_var = "r";
    e.default_sweep = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1};
    e.theory_columns = {"delta", "theory_eps_fl", "theory_lambda_opt", "theory_e_opt", "theory_e_opt_eps"};
    e.notes = {"numeric columns: oracle on a truncated spectrum; theory columns: table asymptotics with constant 1"};
    e.run = [](const PointContext& ctx) {
        const double beta = ctx.param("beta", 2.0);
        const auto d = static_cast<Eigen::Index>(ctx.param("d", 100000));
        const double eps = ctx.param("eps", 0.3);
        const double sigma = ctx.param("sigma", 0.0);
        const std::vector<double> deltas = ctx.param_list("deltas", {0.0, 0.5, 1.0, 2.0});
        const double r = ctx.value;
        Vec lam(d);
        for (Eigen::Index k = 0; k < d; ++k) lam[k] = std::pow(double(k + 1), -beta);
        std::vector<Row> rows;
        for (double delta : deltas) {
            Vec c(d);
            for (Eigen::Index k = 0; k < d; ++k) c[k] = std::pow(double(k + 1), -delta / 2.0);
            const ProblemSpec pb = ProblemSpec::make(lam, c, sigma);
            const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::l2(), r, eps);
            const RegimeProfile th = polydecay_profile(beta, delta, sigma * sigma, r, eps);
            auto add = [&](const char* what, double v) {
                Row row = base_row(ctx);
                row.d = double(d);
                row.r = r;
                row.eps = eps;
                char name[80];
                std::snprintf(name, sizeof name, "%s[delta=%g]", what, delta);
                row.metric_name = name;
                row.metric_value = v;
                row.theory = {delta, th.eps_fl, th.lambda_opt, th.e_opt, th.e_opt_eps};
                rows.push_back(row);
            };
            add("eps_fl", tp.eps_fl);
            add("lambda_opt", tp.lambda_opt);
            add("e_opt", tp.e_opt);
            add("e_opt_eps", tp.e_opt_eps);
            add("ratio", tp.e_opt_eps / tp.e_opt);
        }
        return rows;
    };
    return e;
}

inline Experiment at_pareto() {
    Experiment e;
    e.tag = "at_pareto";
    e.sweep_var = "eps";
    e.default_sweep = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
    e.theory_columns = {"eps2", "e_bar"};
    e.notes = {"adversarial training with strength s = eps/(1-eps) is ridge with t = s^2",
               "e_bar(t) is reported as an excess-risk limit (low-SNR normalization is ambiguous)"};
    e.run = [](const PointContext& ctx) {
        const auto d = static_cast<Eigen::Index>(ctx.param("d", 50));
        const auto n = static_cast<Eigen::Index>(ctx.param("n", 10000));
        const double sigma = ctx.param("sigma", 1.0);
        const double r = ctx.param("r", 0.5);
        const double eps = ctx.value;
        if (!(eps >= 0.0 && eps < 1.0)) throw config_error("at_pareto: eps must lie in [0, 1)");
        const double s = eps / (1.0 - eps);
        const double t = s * s;
        const ProblemSpec pb = ProblemSpec::make(Vec::Ones(d), Vec::Ones(d), sigma);
        const Dataset ds = sample_dataset(pb, n, substream(ctx.seed, 1));
        const ModelVector w = ridge_at(ds, t);
        const ModelVector ws = ridge_at(ds, s);
        const AttackNorm l2 = AttackNorm::l2();
        const double gamma = double(d) / double(n);
        double e_bar = kNaN;
        if (t > 0.0 || gamma < 1.0) e_bar = at_lowsnr_asymptotics(gamma, t, r, MpMethod::closed_form).e_bar;

        std::vector<Row> rows;
        auto add = [&](const char* name, double v) {
            Row row = base_row(ctx);
            row.n = double(n);
            row.d = double(d);
            row.r = r;
            row.eps = eps;
            row.metric_name = name;
            row.metric_value = v;
            row.theory = {eps * eps, e_bar};
            rows.push_back(row);
        };
        add("delta_hat", excess_risk(pb, w));
        add("adv_risk_hat", adversarial_risk(pb, l2, w, r));
        add("delta_hat_t_eq_s", excess_risk(pb, ws));
        add("e_opt_eps", tradeoff_profile(pb, l2, r, eps).e_opt_eps);
        return rows;
    };
    return e;
}

struct RandomCase {
    ProblemSpec problem;
    double r = 0.0;
    double eps = 0.0;
    ModelVector w;
};

// Random Euclidean-attack problem with spectrum in [0.25, 1], so eta0 <= 1.25.
inline RandomCase random_well_conditioned(Rng& rng, int d_max) {
    std::uniform_int_distribution<int> dim(2, std::max(2, d_max));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = dim(rng);
    Vec lam(d), c(d), w(d);
    for (int k = 0; k < d; ++k) lam[k] = 0.25 + 0.75 * u(rng);
    std::sort(lam.data(), lam.data() + d, std::greater<double>());
    for (int k = 0; k < d; ++k) c[k] = g(rng);
    for (int k = 0; k < d; ++k) w[k] = g(rng);
    RandomCase rc{ProblemSpec::make(lam, c, 0.5 * u(rng)), 0.05 + 1.95 * u(rng), u(rng), w};
    return rc;
}

inline Experiment bounds_check() {
    Experiment e;
    e.tag = "bounds_check";
    e.sweep_var = "problem";
    for (int i = 0; i < 100; ++i) e.default_sweep.push_back(i);
    e.theory_columns = {"eta0"};
    e.notes = {"metric_value is 1 when the check holds and 0 otherwise",
               "two-sided bounds are order brackets (no absolute constants); containment is checked within factor 4"};
    e.run = [](const PointContext& ctx) {
        const int d_max = static_cast<int>(ctx.param("d_max", 8));
        Rng rng = make_rng(substream(ctx.seed, 0));
        const RandomCase rc = random_well_conditioned(rng, d_max);
        const ProblemSpec& pb = rc.problem;
        const AttackNorm norm = AttackNorm::l2();
        const double r = rc.r, eps = rc.eps;
        const ConditionNumbers cn = condition_numbers(pb, norm);
        const RiskReport rep = risk_report(pb, norm, rc.w, r);
        const TradeoffProfile tp = tradeoff_profile(pb, norm, r, eps);
        const Bracket br = two_sided_bounds(pb, norm, r, eps);
        const ShrinkResult sh = e_shrink(pb, norm, r, eps);
        const GammaBounds gb = gamma_bounds(pb, norm, r);

        const double s_norm = std::sqrt(w0_sigma_norm2(pb));
        const double dual_w0 = dual_norm(norm, pb.coeffs);
        double grid_best = kInf;
        const int n_grid = 100000;
        for (int i = 0; i <= n_grid; ++i) {
            const double t = (1.0 - eps) + 2.0 * eps * double(i) / n_grid;
            const double k = std::abs(1.0 - t) * s_norm + r * std::abs(t) * dual_w0;
            grid_best = std::min(grid_best, pb.sigma2() + k * k);
        }

        const double tol = 1e-9;
        std::vector<std::pair<const char*, bool>> checks = {
            {"eta0_ge_1", cn.eta0 >= 1.0 - 1e-12},
            {"eta0_le_2", cn.eta0 <= 2.0},
            {"sandwich_tilde", rep.proxy_tilde <= kC1 * rep.adversarial * (1 + tol) &&
                                   rep.adversarial <= kC2 * rep.proxy_tilde * (1 + tol)},
            {"sandwich_bar", rep.proxy_bar <= rep.adversarial * (1 + tol) &&
                                 rep.adversarial <= kC2 * rep.proxy_bar * (1 + tol)},
            {"lambda_in_range", tp.lambda_opt >= 0.0 && tp.lambda_opt <= r * r * (1 + tol)},
            {"e_opt_le_e_opt_eps", tp.e_opt <= tp.e_opt_eps * (1 + tol)},
            {"excess_le_eps2", excess_risk(pb, tp.w_star) <= eps * eps + 1e-8},
            {"exact_in_proxy_bracket", tp.e_opt_eps <= tp.exact_adversarial * (1 + tol) &&
                                           tp.exact_adversarial <= kC2 * tp.e_opt_eps * (1 + tol)},
            {"bracket_ordered", br.lower <= br.upper * (1 + tol)},
            {"bracket_contains_factor4", br.lower / 4.0 <= tp.e_opt_eps && tp.e_opt_eps <= 4.0 * br.upper},
            {"e_shrink_matches_grid", std::abs(grid_best - sh.value) <= 1e-6 * sh.value},
            {"gamma_f_bracket", gb.f_lo <= gb.numeric * (1 + tol) && gb.numeric <= gb.f_hi * (1 + tol)},
            {"gamma_spectral_bracket", gb.spectral_lo / std::sqrt(2.0) <= gb.numeric * (1 + tol) &&
                                           gb.numeric <= std::sqrt(2.0) * gb.spectral_hi * (1 + tol)},
        };
        std::vector<Row> rows;
        for (const auto& [name, ok] : checks) {
            Row row = base_row(ctx);
            row.d = double(pb.dim());
            row.r = r;
            row.eps = eps;
            row.metric_name = std::string("check:") + name;
            row.metric_value = ok ? 1.0 : 0.0;
            row.theory = {cn.eta0};
            rows.push_back(row);
        }
        return rows;
    };
    return e;
}

}  // namespace experiments

inline const std::vector<std::string>& experiment_tags() {
    static const std::vector<std::string> tags = {"lasso_curse", "overparam", "ols_vs_opt",
                                                  "polydecay", "at_pareto", "bounds_check"};
    return tags;
}

inline Experiment find_experiment(const std::string& tag) {
    if (tag == "lasso_curse") return experiments::lasso_curse();
    if (tag == "overparam") return experiments::overparam();
    if (tag == "ols_vs_opt") return experiments::ols_vs_opt();
    if (tag == "polydecay") return experiments::polydecay();
    if (tag == "at_pareto") return experiments::at_pareto();
    if (tag == "bounds_check") return experiments::bounds_check();
    throw config_error("unknown experiment '" + tag + "'");
}

inline void ExperimentConfig::validate() const {
    find_experiment(experiment);
    if (replicates < 1) throw config_error("replicates must be >= 1");
    if (jobs < 1) throw config_error("jobs must be >= 1");
    if (lam_scale && !(*lam_scale >= 0.0)) throw config_error("lam_scale must be >= 0");
    if (!params.is_table()) throw config_error("[params] must be a table");
}

// Keys present in `text` override the fields of `base`.
inline ExperimentConfig config_from_toml(const std::string& text, ExperimentConfig base = {}) {
    toml::Value root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw config_error(e.what());
    }
    ExperimentConfig cfg = std::move(base);
    try {
        if (auto* v = root.find("experiment")) cfg.experiment = v->as_string();
        if (auto* v = root.find("sweep")) cfg.sweep = v->as_doubles();
        if (auto* v = root.find("replicates")) cfg.replicates = static_cast<int>(v->as_int());
        if (auto* v = root.find("seed")) cfg.seed = v->as_uint64();
        if (auto* v = root.find("lam_scale")) cfg.lam_scale = v->as_double();
        if (auto* v = root.find("out")) cfg.out = v->as_string();
        if (auto* v = root.find("jobs")) cfg.jobs = static_cast<int>(v->as_int());
        if (auto* v = root.find("params")) {
            if (!v->is_table()) throw config_error("params must be a table");
            cfg.params = *v;
        }
    } catch (const toml::parse_error& e) {
        throw config_error(e.what());
    }
    return cfg;
}

namespace detail {
inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string toml_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline void dump_toml_value(std::ostream& os, const toml::Value& v) {
    switch (v.type) {
        case toml::Value::Type::string: os << toml_string(v.str); break;
        case toml::Value::Type::integer:
        case toml::Value::Type::floating: os << v.str; break;
        case toml::Value::Type::boolean: os << (v.boolean ? "true" : "false"); break;
        case toml::Value::Type::array: {
            os << "[";
            bool first = true;
            for (const auto& x : *v.arr) {
                if (!first) os << ", ";
                first = false;
                dump_toml_value(os, x);
            }
            os << "]";
            break;
        }
        case toml::Value::Type::table: os << "{}"; break;
    }
}
}  // namespace detail

inline std::string config_to_toml(const ExperimentConfig& cfg) {
    std::ostringstream os;
    const Experiment ex = find_experiment(cfg.experiment);
    const std::vector<double>& sweep = cfg.sweep.empty() ? ex.default_sweep : cfg.sweep;
    os << "experiment = " << detail::toml_string(cfg.experiment) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "replicates = " << cfg.replicates << "\n";
    os << "jobs = " << cfg.jobs << "\n";
    os << "lam_scale = " << detail::fmt_num(cfg.lam_scale.value_or(1.0)) << "\n";
    if (!cfg.out.empty()) os << "out = " << detail::toml_string(cfg.out) << "\n";
    os << "sweep = [";
    for (std::size_t i = 0; i < sweep.size(); ++i) os << (i ? ", " : "") << detail::fmt_num(sweep[i]);
    os << "]\n";
    os << "\n[params]\n";
    for (const auto& [k, v] : cfg.params.as_table()) {
        if (v.is_table()) continue;
        os << k << " = ";
        detail::dump_toml_value(os, v);
        os << "\n";
    }
    return os.str();
}

struct RunResult {
    Experiment experiment;
    std::vector<Row> rows;
    int failures = 0;
};

// Runs every (sweep point, replicate) on `jobs` workers; rows come back in
// (sweep, replicate) order whatever the scheduling.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    RunResult res{find_experiment(cfg.experiment), {}, 0};
    const std::vector<double> sweep = cfg.sweep.empty() ? res.experiment.default_sweep : cfg.sweep;
    if (sweep.empty()) throw config_error("sweep must be non-empty");
    const std::size_t n_tasks = sweep.size() * static_cast<std::size_t>(cfg.replicates);
    std::vector<std::vector<Row>> out(n_tasks);
    std::vector<char> failed(n_tasks, 0);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) return;
            PointContext ctx;
            ctx.sweep_index = task / static_cast<std::size_t>(cfg.replicates);
            ctx.replicate = static_cast<int>(task % static_cast<std::size_t>(cfg.replicates));
            ctx.value = sweep[ctx.sweep_index];
            ctx.seed = replicate_seed(cfg.seed, ctx.sweep_index, ctx.replicate);
            ctx.params = &cfg.params;
            ctx.lam_scale = cfg.lam_scale.value_or(1.0);
            try {
                out[task] = res.experiment.run(ctx);
            } catch (const config_error&) {
                throw;
            } catch (const std::exception& e) {
                Row row = experiments::base_row(ctx);
                row.metric_name = "error";
                row.status = "failed";
                row.theory.assign(res.experiment.theory_columns.size(), kNaN);
                out[task] = {row};
                failed[task] = 1;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(n_tasks)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mu;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                try {
                    worker();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                    next = n_tasks;
                }
            });
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }
    for (std::size_t i = 0; i < n_tasks; ++i) {
        res.failures += failed[i];
        for (Row& r : out[i]) res.rows.push_back(std::move(r));
    }
    return res;
}

inline void write_csv(std::ostream& os, const RunResult& res) {
    const Experiment& ex = res.experiment;
    os << "experiment,sweep_var,sweep_value,replicate,seed,n,d,s,r,eps,metric_name,metric_value,status";
    for (const auto& c : ex.theory_columns) os << ',' << detail::csv_field(c);
    os << "\r\n";
    for (const Row& r : res.rows) {
        os << detail::csv_field(ex.tag) << ',' << detail::csv_field(ex.sweep_var) << ','
           << detail::fmt_num(r.sweep_value) << ',' << r.replicate << ',' << r.seed << ',' << detail::fmt_num(r.n)
           << ',' << detail::fmt_num(r.d) << ',' << detail::fmt_num(r.s) << ',' << detail::fmt_num(r.r) << ','
           << detail::fmt_num(r.eps) << ',' << detail::csv_field(r.metric_name) << ','
           << detail::fmt_num(r.metric_value) << ',' << r.status;
        for (std::size_t i = 0; i < ex.theory_columns.size(); ++i)
            os << ',' << detail::fmt_num(i < r.theory.size() ? r.theory[i] : kNaN);
        os << "\r\n";
    }
}

struct SummaryLine {
    std::string metric_name;
    double sweep_value = 0.0;
    int count = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Mean and standard error across replicates per (metric, sweep value), in first-seen order.
inline std::vector<SummaryLine> summarize(const std::vector<Row>& rows) {
    if (rows.empty()) throw std::invalid_argument("summary: no rows");
    std::vector<SummaryLine> lines;
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const Row& r : rows) {
        if (r.status != "ok" || std::isnan(r.metric_value)) continue;
        auto key = std::make_pair(r.metric_name, r.sweep_value);
        auto it = groups.find(key);
        if (it == groups.end()) {
            lines.push_back({r.metric_name, r.sweep_value, 0, 0.0, 0.0});
            it = groups.emplace(key, std::vector<double>{}).first;
        }
        it->second.push_back(r.metric_value);
    }
    for (auto& line : lines) {
        const auto& v = groups[{line.metric_name, line.sweep_value}];
        line.count = static_cast<int>(v.size());
        double m = 0.0;
        for (double x : v) m += x;
        m /= double(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        line.mean = m;
        line.stderr_ = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1) / double(v.size())) : 0.0;
    }
    return lines;
}

inline std::string emit_summary(const RunResult& res) {
    if (res.rows.empty()) throw std::invalid_argument("summary: no rows");
    std::ostringstream os;
    os << "# experiment: " << res.experiment.tag << "\n";
    for (const auto& note : res.experiment.notes) os << "# note: " << note << "\n";
    if (res.failures) os << "# warning: " << res.failures << " failed point(s)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %14s %6s %16s %16s\n", "metric", res.experiment.sweep_var.c_str(), "reps",
                  "mean", "stderr");
    os << buf;
    for (const SummaryLine& l : summarize(res.rows)) {
        std::snprintf(buf, sizeof buf, "%-28s %14.6g %6d %16.8e %16.8e\n", l.metric_name.c_str(), l.sweep_value,
                      l.count, l.mean, l.stderr_);
        os << buf;
    }
    return os.str();
}

}  // namespace robustlin
