#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mslds/harness.hpp"
#include "mslds/kalman.hpp"
#include "mslds/predictors.hpp"
#include "mslds/structural.hpp"
#include "mslds/systems.hpp"

namespace {

using namespace mslds;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON experiment config")
        ->required();
    cmd->add_option("--out-dir", opts.out_dir, "output directory override");
    cmd->add_option("--format", opts.format, "output format override")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", opts.seed, "seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--threads", opts.threads, "worker count (cells only)");
}

harness::ExperimentConfig load_config(const CommonOpts& opts) {
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigError("cannot open config: " + opts.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto cfg = harness::config_from_json(buf.str());
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (!opts.format.empty()) cfg.format = opts.format;
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.threads > 0) cfg.threads = opts.threads;
    if (const char* env = std::getenv("MARGINAL_LDS_THREADS"))
        cfg.threads = std::max(1, std::atoi(env));
    return cfg;
}

systems::SystemSpec config_system(const harness::ExperimentConfig& cfg) {
    if (cfg.system.has_value()) return *cfg.system;
    if (!cfg.jordan.has_value())
        throw ConfigError("config: one of 'system' or 'jordan' is required");
    auto sys = systems::build_jordan_system(*cfg.jordan, cfg.input_dim,
                                            cfg.obs_dim, cfg.bounds, cfg.noise);
    if (sys.noise.kind == systems::NoiseKind::gaussian) {
        if (sys.noise.sigma_x.rows() != sys.A.rows())
            sys.noise.sigma_x =
                (sys.noise.sigma_x.size() == 1 ? sys.noise.sigma_x(0, 0) : 1.0) *
                Matrix::Identity(sys.A.rows(), sys.A.rows());
        if (sys.C.has_value() && sys.noise.sigma_y.rows() != sys.C->rows())
            sys.noise.sigma_y =
                (sys.noise.sigma_y.size() == 1 ? sys.noise.sigma_y(0, 0) : 1.0) *
                Matrix::Identity(sys.C->rows(), sys.C->rows());
    }
    return sys;
}

systems::Trajectory simulate_for(const harness::ExperimentConfig& cfg,
                                 const systems::SystemSpec& sys, long T) {
    if (cfg.setting == harness::Setting::partial_stochastic)
        return systems::simulate_partial(sys, static_cast<std::size_t>(T),
                                         cfg.seed);
    auto inputs = sys.bounds.cu > 0
                      ? systems::bounded_random_inputs(sys.B.cols(),
                                                       sys.bounds.cu, cfg.seed)
                      : systems::zero_inputs(sys.B.cols());
    return systems::simulate_full(sys, inputs, static_cast<std::size_t>(T),
                                  cfg.seed);
}

void write_text(const std::string& path, const std::string& text) {
    std::filesystem::create_directories(
        std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string vec_csv(const Vector& v) {
    std::string s;
    for (Index i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += harness::format_double(v[i]);
    }
    return s;
}

int cmd_simulate(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto sys = config_system(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    for (long T : cfg.horizons) {
        auto traj = simulate_for(cfg, sys, T);
        std::ostringstream out;
        const Index d = sys.A.rows();
        out << "t";
        for (Index i = 0; i < d; ++i) out << ",x_" << (i + 1);
        for (Index i = 0; i < sys.B.cols(); ++i) out << ",u_" << (i + 1);
        if (!traj.observations.empty())
            for (Index i = 0; i < traj.observations[0].size(); ++i)
                out << ",y_" << (i + 1);
        out << '\n';
        for (std::size_t t = 0; t < traj.states.size(); ++t) {
            out << t << ',' << vec_csv(traj.states[t]);
            if (sys.B.cols() > 0) {
                Vector u = t < traj.inputs.size() ? traj.inputs[t]
                                                  : Vector(Vector::Zero(sys.B.cols()));
                out << ',' << vec_csv(u);
            }
            if (!traj.observations.empty())
                out << ',' << vec_csv(traj.observations[t]);
            out << '\n';
        }
        write_text(cfg.out_dir + "/trajectory_T" + std::to_string(T) + ".csv",
                   out.str());
    }
    write_text(cfg.out_dir + "/system.json", systems::to_json(sys) + "\n");
    return 0;
}

int cmd_predict(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto sys = config_system(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    const long T = cfg.horizons.back();
    auto traj = simulate_for(cfg, sys, T);

    std::ostringstream out;
    predictors::OlsState state;
    if (cfg.setting == harness::Setting::partial_stochastic) {
        auto kf = kalman::solve_dare(sys.A, sys.B, *sys.C, sys.noise.sigma_x,
                                     sys.noise.sigma_y);
        int ell = cfg.ell_rule.kind == harness::EllRule::Kind::explicit_value
                      ? cfg.ell_rule.value
                      : kalman::sufficient_length(kf, cfg.ell_rule.eps).length;
        predictors::ArConfig arc{ell, sys.B.cols(), sys.C->rows()};
        double mu = harness::choose_mu(cfg.mu_rule, cfg.setting,
                                       static_cast<double>(T), sys.r,
                                       arc.feature_dim());
        state = predictors::ols_init(arc.feature_dim(), sys.C->rows(), mu);
        out << "t,prediction,actual,loss\n";
        for (long t = 0; t < T; ++t) {
            Vector pred = predictors::ar_learner_step(state, traj, t, arc);
            double loss = (pred - traj.observations[t + 1]).squaredNorm();
            out << (t + 1) << ",\"" << vec_csv(pred) << "\",\""
                << vec_csv(traj.observations[t + 1]) << "\","
                << harness::format_double(loss) << '\n';
        }
    } else {
        const Index m = sys.A.rows() + sys.B.cols();
        double mu = harness::choose_mu(cfg.mu_rule, cfg.setting,
                                       static_cast<double>(T), sys.r, m);
        state = predictors::ols_init(m, sys.A.rows(), mu);
        out << "t,prediction,actual,loss\n";
        for (long t = 0; t < T; ++t) {
            Vector pred = predictors::lds_learner_step(state, traj, t);
            double loss = (pred - traj.states[t + 1]).squaredNorm();
            out << (t + 1) << ",\"" << vec_csv(pred) << "\",\""
                << vec_csv(traj.states[t + 1]) << "\","
                << harness::format_double(loss) << '\n';
        }
    }
    write_text(cfg.out_dir + "/predictions.csv", out.str());
    write_text(cfg.out_dir + "/learner_checkpoint.txt",
               predictors::checkpoint(state));
    return 0;
}

int cmd_regret_sweep(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto result = harness::run_experiment(cfg);
    for (const auto& v : result.violations) std::cerr << v << '\n';
    std::cout << "wrote " << result.runs_csv_path << " ("
              << result.rows.size() << " rows)\n";
    return result.violations.empty() ? 0 : 2;
}

int cmd_diagnose(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto sys = config_system(cfg);
    const long T = cfg.horizons.back();
    auto traj = simulate_for(cfg, sys, T);

    auto outliers = structural::outlier_indices(traj.states);
    auto leverage = structural::leverage_diagnostics(traj.states, 1.0);
    double c = std::max(2.5, 0.5 * traj.max_state_norm());
    auto anomaly = structural::certify_anomaly_free(traj.states, 4, cfg.seed,
                                                    c, 0.4, 0.1, 1.0);
    Vector coeffs = structural::char_poly(sys.A);
    auto residuals = structural::ch_recurrence_residual(traj.states, coeffs);

    nlohmann::json j;
    j["config_hash"] = harness::config_hash(cfg);
    j["T"] = T;
    j["outliers"] = {{"indices", outliers.indices},
                     {"threshold", outliers.threshold},
                     {"norms", outliers.norms}};
    nlohmann::json lev = nlohmann::json::array();
    bool leverage_ok = true, b_ok = true;
    for (const auto& rec : leverage) {
        lev.push_back({{"t", rec.t},
                       {"leverage_sum", rec.leverage_sum},
                       {"b_sq_sum", rec.b_sq_sum},
                       {"bound", rec.bound}});
        leverage_ok = leverage_ok && rec.leverage_holds;
        b_ok = b_ok && rec.b_bound_holds;
    }
    j["leverage"] = lev;
    j["leverage_holds"] = leverage_ok;
    j["b_bound_holds"] = b_ok;
    j["anomaly"] = nlohmann::json::parse(structural::anomaly_report_json(anomaly));
    std::vector<double> cvec(coeffs.data(), coeffs.data() + coeffs.size());
    j["char_poly"] = {{"coefficients", cvec},
                      {"abs_sum", structural::coefficient_abs_sum(coeffs)}};
    j["ch_residual_max"] =
        residuals.empty() ? 0.0
                          : *std::max_element(residuals.begin(), residuals.end());

    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/diagnostics.json", j.dump(2) + "\n");
    write_text(cfg.out_dir + "/diagnostics.csv",
               structural::anomaly_report_csv(anomaly));
    return leverage_ok ? 0 : 2;
}

int cmd_kalman(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto sys = config_system(cfg);
    if (!sys.C.has_value())
        throw RequiresObservationMatrixError("kalman: config has no C (obs_dim=0)");
    auto kf = kalman::solve_dare(sys.A, sys.B, *sys.C, sys.noise.sigma_x,
                                 sys.noise.sigma_y);

    auto mat = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    nlohmann::json j;
    j["P"] = mat(kf.P);
    j["K"] = mat(kf.K);
    j["A_kf"] = mat(kf.A_kf);
    j["B_kf_y"] = mat(kf.B_kf_y);
    j["innovation_covariance"] = mat(kf.innovation_covariance);
    j["riccati_residual"] = kf.riccati_residual;
    j["spectral_radius"] = kf.spectral_radius;
    nlohmann::json lens;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        auto r = kalman::sufficient_length(kf, eps);
        lens.push_back({{"eps", eps},
                        {"length", r.length},
                        {"gamma", r.gamma},
                        {"tail_l1", kalman::tail_l1(kf, r.length)}});
    }
    j["sufficient_length"] = lens;
    std::string text = j.dump(2) + "\n";
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/kalman.json", text);
    std::cout << text;
    return 0;
}

int cmd_lower_bound(const CommonOpts& opts) {
    auto cfg = load_config(opts);
    cfg.setting = harness::Setting::ols_lower_bound;
    auto result = harness::run_experiment(cfg);
    for (const auto& row : result.rows)
        std::cout << "T=" << row.T << " trial=" << row.trial
                  << " regret=" << harness::format_double(row.regret) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online prediction in marginally stable linear systems"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* simulate = app.add_subcommand("simulate", "simulate trajectories");
    auto* predict = app.add_subcommand("predict", "run the online learner");
    auto* sweep = app.add_subcommand("regret-sweep", "horizon sweep with exponent fit");
    auto* diagnose = app.add_subcommand("diagnose", "structural diagnostics");
    auto* kalman_cmd = app.add_subcommand("kalman", "steady-state filter summary");
    auto* lower = app.add_subcommand("lower-bound", "OLS lower-bound scenario");
    for (auto* cmd : {simulate, predict, sweep, diagnose, kalman_cmd, lower})
        add_common(cmd, opts);

    CLI11_PARSE(app, argc, argv);
    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (predict->parsed()) return cmd_predict(opts);
        if (sweep->parsed()) return cmd_regret_sweep(opts);
        if (diagnose->parsed()) return cmd_diagnose(opts);
        if (kalman_cmd->parsed()) return cmd_kalman(opts);
        if (lower->parsed()) return cmd_lower_bound(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
