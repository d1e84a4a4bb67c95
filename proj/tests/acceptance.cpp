// Acceptance suite: one line per criterion, nonzero exit on any failure.
// argv[1] (optional) is the path to the CLI binary, used by the
// determinism criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "mslds/harness.hpp"
#include "mslds/kalman.hpp"
#include "mslds/linalg.hpp"
#include "mslds/predictors.hpp"
#include "mslds/rng.hpp"
#include "mslds/structural.hpp"
#include "mslds/systems.hpp"

using namespace mslds;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("criterion %2d (%s): %s — %s\n", number, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Defective (size >= 2, magnitude 1) blocks drive t^{r - 1/2} state growth
// and push cond(Sigma) past what double solves can certify at 1e-8, so the
// identity criteria use diagonalizable marginal spectra and the structural
// criteria keep the defective blocks.
systems::SystemSpec random_marginal_system(int d, std::uint64_t seed,
                                           systems::NoiseKind kind,
                                           double c_xi,
                                           bool allow_defective = true) {
    systems::JordanSpec spec;
    spec.seed = seed;
    CounterRng rng(seed, 0xACC);
    int left = d;
    int slot = 0;
    while (left > 0) {
        double mag = 0.6 + 0.4 * rng.uniform(static_cast<std::uint64_t>(slot), 0);
        if (left >= 2 && rng.uniform(static_cast<std::uint64_t>(slot), 1) < 0.4) {
            double phase =
                0.2 + 2.0 * rng.uniform(static_cast<std::uint64_t>(slot), 2);
            spec.blocks.push_back({1.0, phase, 1});  // unit-circle pair, 2 dims
            left -= 2;
        } else if (allow_defective && left >= 2 &&
                   rng.uniform(static_cast<std::uint64_t>(slot), 3) < 0.3) {
            spec.blocks.push_back({1.0, 0.0, 2});  // marginal Jordan block
            left -= 2;
        } else {
            spec.blocks.push_back({slot % 2 == 0 ? 1.0 : mag, 0.0, 1});
            left -= 1;
        }
        ++slot;
    }
    spec.condition = 1.0 + 2.0 * rng.uniform(99, 0);
    systems::NoiseConfig noise;
    noise.kind = kind;
    noise.c_xi = c_xi;
    if (kind == systems::NoiseKind::gaussian)
        noise.sigma_x = 0.25 * Matrix::Identity(d, d);
    systems::Bounds bounds;
    bounds.cxi = c_xi;
    return systems::build_jordan_system(spec, 0, 0, bounds, noise);
}

// Theorem bound: R_T <= mu ||A||_F^2 + max loss * m ln(1 + T M^2 / m)
bool orr_holds(double regret, double mu, double a_fro_sq, double max_loss,
               double max_regressor, long T, Index m) {
    double md = static_cast<double>(m);
    double rhs = mu * a_fro_sq +
                 max_loss * md *
                     std::log(1.0 + static_cast<double>(T) * max_regressor *
                                        max_regressor / md);
    return regret <= rhs * (1.0 + 1e-9) + 1e-9;
}

void criterion_1_residual_identity() {
    auto start = Clock::now();
    bool pass = true;
    std::string detail;
    double worst = 0.0;
    bool orr_ok = true;
    const systems::NoiseKind kinds[] = {
        systems::NoiseKind::gaussian, systems::NoiseKind::bounded_uniform_ball,
        systems::NoiseKind::bounded_rademacher_axes,
        systems::NoiseKind::adversarial_least_explored};
    for (int inst = 0; inst < 100 && pass; ++inst) {
        int d = 1 + inst % 4;
        long T = 50 + (inst * 17) % 251;
        auto sys =
            random_marginal_system(d, 1000 + inst, kinds[inst % 4], 0.5, false);
        auto traj = systems::simulate_full(sys, systems::zero_inputs(0),
                                           static_cast<std::size_t>(T),
                                           2000 + inst);
        const double mu = 1.0;
        auto state = predictors::ols_init(d, d, mu);
        std::vector<std::pair<Vector, Vector>> history;
        std::vector<Vector> noises;
        double max_loss = 0.0, max_x = 0.0;
        for (long t = 0; t < T; ++t) {
            const Vector& x = traj.states[t];
            const Vector& y = traj.states[t + 1];
            const Vector& xi = traj.process_noise[t];
            Vector direct = predictors::ols_predict(state, x) - y;
            Vector closed = predictors::residual_closed_form(
                history, mu, sys.A, noises, x, xi);
            worst = std::max(worst,
                             (direct - closed).cwiseAbs().maxCoeff());
            max_loss = std::max(max_loss, direct.squaredNorm());
            max_x = std::max(max_x, x.norm());
            predictors::ols_update(state, x, y);
            history.emplace_back(x, y);
            noises.push_back(xi);
        }
        if (worst > 1e-8) {
            pass = false;
            detail = "identity mismatch " + harness::format_double(worst) +
                     " at instance " + std::to_string(inst);
        }
        // criterion 3 coverage on these runs
        KahanSum gap;
        auto replay = predictors::ols_init(d, d, mu);
        for (long t = 0; t < T; ++t) {
            double learner = (predictors::ols_predict(replay, traj.states[t]) -
                              traj.states[t + 1])
                                 .squaredNorm();
            gap.add(learner - traj.process_noise[t].squaredNorm());
            predictors::ols_update(replay, traj.states[t], traj.states[t + 1]);
        }
        orr_ok = orr_ok && orr_holds(gap.value(), mu, sys.A.squaredNorm(),
                                     max_loss, max_x, T, d);
    }
    double elapsed = seconds_since(start);
    if (pass && elapsed > 10.0) {
        pass = false;
        detail = "runtime " + harness::format_double(elapsed) + "s > 10s";
    }
    if (pass)
        detail = "max deviation " + harness::format_double(worst) + ", " +
                 harness::format_double(elapsed) + "s";
    report(1, "residual identity", pass, detail);
    report(3, "t:orr on criterion-1 runs", orr_ok,
           orr_ok ? "inequality held on all 100 instances"
                  : "inequality violated");
}

void criterion_2_recursive_batch() {
    auto start = Clock::now();
    bool pass = true;
    bool orr_ok = true;
    double worst = 0.0;
    std::string detail;
    for (int seed = 0; seed < 20 && pass; ++seed) {
        int d = 1 + seed % 6;
        long T = 500;
        auto sys = random_marginal_system(
            d, 5000 + seed, systems::NoiseKind::bounded_uniform_ball, 0.5,
            false);
        auto traj = systems::simulate_full(sys, systems::zero_inputs(0),
                                           static_cast<std::size_t>(T),
                                           6000 + seed);
        const double mu = 1.0;
        auto state = predictors::ols_init(d, d, mu);
        std::vector<std::pair<Vector, Vector>> history;
        double max_loss = 0.0, max_x = 0.0;
        KahanSum gap;
        for (long t = 0; t < T; ++t) {
            double learner = (predictors::ols_predict(state, traj.states[t]) -
                              traj.states[t + 1])
                                 .squaredNorm();
            max_loss = std::max(max_loss, learner);
            max_x = std::max(max_x, traj.states[t].norm());
            gap.add(learner - traj.process_noise[t].squaredNorm());
            predictors::ols_update(state, traj.states[t], traj.states[t + 1]);
            history.emplace_back(traj.states[t], traj.states[t + 1]);
            Matrix batch = predictors::ols_batch_solve(history, mu);
            worst = std::max(
                worst, (state.A - batch).lpNorm<Eigen::Infinity>());
        }
        if (worst > 1e-8) {
            pass = false;
            detail = "recursive/batch gap " + harness::format_double(worst) +
                     " at seed " + std::to_string(seed);
        }
        orr_ok = orr_ok && orr_holds(gap.value(), mu, sys.A.squaredNorm(),
                                     max_loss, max_x, T, d);
    }
    double elapsed = seconds_since(start);
    if (pass && elapsed > 30.0) {
        pass = false;
        detail = "runtime " + harness::format_double(elapsed) + "s > 30s";
    }
    if (pass)
        detail = "max gap " + harness::format_double(worst) + ", " +
                 harness::format_double(elapsed) + "s";
    report(2, "recursive vs batch", pass, detail);
    report(3, "t:orr on criterion-2 runs", orr_ok,
           orr_ok ? "inequality held on all 20 seeds" : "inequality violated");
}

void criterion_4_lower_bound() {
    harness::ExperimentConfig cfg;
    cfg.setting = harness::Setting::ols_lower_bound;
    cfg.horizons = {1, 10, 100};
    cfg.trials = 2;
    cfg.out_dir = "acceptance_out/lower_bound";
    auto result = harness::run_experiment(cfg);
    bool pass = true;
    std::string detail = "mean regret = T^2 at T in {1,10,100}";
    for (long T : cfg.horizons) {
        KahanSum mean;
        int n = 0;
        for (const auto& row : result.rows)
            if (row.T == T) {
                mean.add(row.regret);
                ++n;
            }
        double got = mean.value() / n;
        double expected = static_cast<double>(T) * static_cast<double>(T);
        if (std::abs(got - expected) > 1e-9 * expected) {
            pass = false;
            detail = "T=" + std::to_string(T) + " mean regret " +
                     harness::format_double(got);
        }
    }
    report(4, "OLS lower bound", pass, detail);
}

void criterion_5_kalman() {
    Matrix one = Matrix::Identity(1, 1);
    auto kf = kalman::solve_dare(one, Matrix(1, 0), one, one, one);
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    // 0.38197 in the criterion is (3 - sqrt(5))/2 rounded to 5 decimals
    const double rho_exact = (3.0 - std::sqrt(5.0)) / 2.0;
    bool p_ok = std::abs(kf.P(0, 0) - phi) <= 1e-10;
    bool rho_ok = std::abs(kf.spectral_radius - rho_exact) <= 1e-6;

    systems::SystemSpec sys;
    sys.A = one;
    sys.B = Matrix(1, 0);
    sys.C = one;
    sys.x0 = Vector::Zero(1);
    sys.noise.kind = systems::NoiseKind::gaussian;
    sys.noise.sigma_x = one;
    sys.noise.sigma_y = one;
    auto traj = systems::simulate_partial(sys, 520, 1);
    std::vector<Vector> obs(traj.observations.begin(),
                            traj.observations.begin() + 520);
    auto tv = kalman::time_varying_kf(sys.A, sys.B, *sys.C, one, one, one,
                                      traj.inputs, obs, sys.x0);
    bool gain_ok = (tv.gains[500] - kf.K).cwiseAbs().maxCoeff() <= 1e-8;

    bool pass = p_ok && rho_ok && gain_ok;
    std::ostringstream detail;
    detail << "P err " << harness::format_double(std::abs(kf.P(0, 0) - phi))
           << ", rho err "
           << harness::format_double(std::abs(kf.spectral_radius - rho_exact))
           << ", gain err "
           << harness::format_double(
                  (tv.gains[500] - kf.K).cwiseAbs().maxCoeff());
    report(5, "Kalman golden ratio", pass, detail.str());
}

void criterion_6_sufficient_length() {
    Matrix one = Matrix::Identity(1, 1);
    auto kf = kalman::solve_dare(one, Matrix(1, 0), one, one, one);
    const double rho_exact = (3.0 - std::sqrt(5.0)) / 2.0;
    bool pass = true;
    std::ostringstream detail;
    for (double eps : {1e-2, 1e-4}) {
        auto r = kalman::sufficient_length(kf, eps);
        double tail = kalman::tail_l1(kf, r.length);
        double analytic = std::log(1.0 / eps) / std::log(1.0 / rho_exact);
        bool tail_ok = tail <= eps;
        bool factor_ok = static_cast<double>(r.length) <= 3.0 * analytic;
        pass = pass && tail_ok && factor_ok;
        detail << "eps=" << eps << ": R=" << r.length << " tail="
               << harness::format_double(tail) << " (analytic "
               << harness::format_double(analytic) << "); ";
    }
    report(6, "sufficient length", pass, detail.str());
}

void criterion_7_structural_suite() {
    auto start = Clock::now();
    bool pass = true;
    std::string detail;
    for (int run = 0; run < 20 && pass; ++run) {
        systems::NoiseKind kind = run % 2 == 0
                                      ? systems::NoiseKind::bounded_uniform_ball
                                      : systems::NoiseKind::bounded_rademacher_axes;
        auto sys = random_marginal_system(2, 7000 + run, kind, 1.0);
        auto traj =
            systems::simulate_full(sys, systems::zero_inputs(0), 512, 7100 + run);

        auto outliers = structural::outlier_indices(traj.states);
        double bound = 2.0 * std::log2(std::max(2.0, traj.max_state_norm()));
        if (static_cast<double>(outliers.indices.size()) > bound) {
            pass = false;
            detail = "outlier cardinality " +
                     std::to_string(outliers.indices.size()) + " > bound " +
                     harness::format_double(bound) + " at run " +
                     std::to_string(run);
            break;
        }
        for (std::size_t s : outliers.indices) {
            std::vector<Vector> past(traj.states.begin(),
                                     traj.states.begin() + s);
            auto dc = structural::check_volume_doubling(past, traj.states[s]);
            if (dc.doubling_triggered && dc.ratio < 2.0) {
                pass = false;
                detail = "doubling ratio " + harness::format_double(dc.ratio) +
                         " at run " + std::to_string(run) + " step " +
                         std::to_string(s);
                break;
            }
        }
        if (!pass) break;

        auto leverage = structural::leverage_diagnostics(traj.states, 1.0);
        for (const auto& rec : leverage)
            if (!rec.leverage_holds) {
                pass = false;
                detail = "leverage sum " +
                         harness::format_double(rec.leverage_sum) +
                         " > d at run " + std::to_string(run);
                break;
            }
        if (!pass) break;

        Vector pc = structural::char_poly(sys.A);
        if (structural::coefficient_abs_sum(pc) > 4.0 + 1e-9) {
            pass = false;
            detail = "char poly coefficient sum " +
                     harness::format_double(structural::coefficient_abs_sum(pc));
            break;
        }
        auto power = structural::jordan_power_check(sys.A, sys.r, sys.c_a, 10000);
        if (power.worst_power_ratio > 1.0 + 1e-9 ||
            power.worst_sum_ratio > 1.0 + 1e-9) {
            pass = false;
            detail = "Jordan power ratio " +
                     harness::format_double(power.worst_power_ratio) +
                     " / sum ratio " +
                     harness::format_double(power.worst_sum_ratio) +
                     " at run " + std::to_string(run);
            break;
        }
    }
    double elapsed = seconds_since(start);
    if (pass && elapsed > 300.0) {
        pass = false;
        detail = "runtime " + harness::format_double(elapsed) + "s > 300s";
    }
    if (pass)
        detail = "20 trajectories clean, " + harness::format_double(elapsed) +
                 "s";
    report(7, "structural suite", pass, detail);
}

void criterion_8_cayley_hamilton() {
    bool pass = true;
    std::string detail;
    for (int seed = 0; seed < 20 && pass; ++seed) {
        int d = 1 + seed % 4;
        // noiseless run
        auto sys = random_marginal_system(d, 8000 + seed,
                                          systems::NoiseKind::gaussian, 1.0);
        sys.noise.sigma_x = Matrix::Zero(d, d);
        auto clean =
            systems::simulate_full(sys, systems::zero_inputs(0), 200, seed);
        Vector pc = structural::char_poly(sys.A);
        for (double r : structural::ch_recurrence_residual(clean.states, pc))
            if (r > 1e-6 * std::max(1.0, clean.max_state_norm())) {
                pass = false;
                detail = "noiseless residual " + harness::format_double(r) +
                         " at seed " + std::to_string(seed);
                break;
            }
        if (!pass) break;

        // noisy run against the lemma constant
        auto noisy_sys = random_marginal_system(
            d, 8000 + seed, systems::NoiseKind::bounded_uniform_ball, 1.0);
        auto noisy =
            systems::simulate_full(noisy_sys, systems::zero_inputs(0), 200,
                                   100 + seed);
        double limit = d * std::pow(2.0, d) * noisy_sys.c_a * 1.0;
        Vector pcn = structural::char_poly(noisy_sys.A);
        for (double r : structural::ch_recurrence_residual(noisy.states, pcn))
            if (r > limit + 1e-9) {
                pass = false;
                detail = "noisy residual " + harness::format_double(r) +
                         " > " + harness::format_double(limit) + " at seed " +
                         std::to_string(seed);
                break;
            }
    }
    if (pass) detail = "bounds held for 20 seeds, d up to 4";
    report(8, "Cayley-Hamilton recurrence", pass, detail);
}

void criterion_9_regret_exponents() {
    auto start = Clock::now();
    std::ostringstream detail;
    bool pass = true;
    bool sweeps_clean = true;

    auto rotation_config = [](harness::Setting setting,
                              systems::NoiseKind kind) {
        harness::ExperimentConfig cfg;
        cfg.setting = setting;
        cfg.horizons = {1024, 2048, 4096, 8192, 16384};
        cfg.trials = 8;
        cfg.seed = 42;
        systems::JordanSpec spec;
        spec.blocks = {{1.0, 0.9, 1}};  // marginally stable rotation, d = 2
        spec.seed = 11;
        cfg.jordan = spec;
        cfg.noise.kind = kind;
        cfg.noise.c_xi = 1.0;
        cfg.bounds.cxi = 1.0;
        return cfg;
    };

    // (a) adversarial, mu = T^{3/4}
    auto adv = rotation_config(harness::Setting::full_adversarial,
                               systems::NoiseKind::adversarial_least_explored);
    adv.mu_rule.kind = harness::MuRule::Kind::theorem_adversarial;
    adv.out_dir = "acceptance_out/sweep_adversarial";
    auto ra = harness::run_experiment(adv);
    double slope_a = ra.slopes.at("full-adversarial").slope;
    sweeps_clean = sweeps_clean && ra.violations.empty();
    pass = pass && slope_a <= 0.85;
    detail << "adversarial slope " << harness::format_double(slope_a)
           << (ra.slopes.at("full-adversarial").clamped
                   ? " (regret nonpositive, clamped)"
                   : "")
           << "; ";

    // (b) stochastic bounded martingale noise, mu = 1
    auto sto = rotation_config(harness::Setting::full_stochastic,
                               systems::NoiseKind::bounded_uniform_ball);
    sto.mu_rule.kind = harness::MuRule::Kind::theorem_stochastic;
    sto.out_dir = "acceptance_out/sweep_stochastic";
    auto rb = harness::run_experiment(sto);
    double slope_b = rb.slopes.at("full-stochastic").slope;
    sweeps_clean = sweeps_clean && rb.violations.empty();
    pass = pass && slope_b <= 0.30;
    detail << "stochastic slope " << harness::format_double(slope_b) << "; ";

    // (c) partial observation, scalar golden-ratio system, ell = R(1e-3)
    harness::ExperimentConfig par;
    par.setting = harness::Setting::partial_stochastic;
    par.horizons = {1024, 2048, 4096, 8192, 16384};
    par.trials = 8;
    par.seed = 43;
    systems::SystemSpec golden;
    golden.A = Matrix::Identity(1, 1);
    golden.B = Matrix(1, 0);
    golden.C = Matrix::Identity(1, 1);
    golden.x0 = Vector::Zero(1);
    golden.noise.kind = systems::NoiseKind::gaussian;
    golden.noise.sigma_x = Matrix::Identity(1, 1);
    golden.noise.sigma_y = Matrix::Identity(1, 1);
    par.system = golden;
    par.ell_rule.kind = harness::EllRule::Kind::sufficient_length;
    par.ell_rule.eps = 1e-3;
    par.out_dir = "acceptance_out/sweep_partial";
    auto rc = harness::run_experiment(par);
    double slope_c = rc.slopes.at("partial-stochastic").slope;
    sweeps_clean = sweeps_clean && rc.violations.empty();
    pass = pass && slope_c <= 0.30;
    detail << "partial slope " << harness::format_double(slope_c);

    double elapsed = seconds_since(start);
    if (pass && elapsed > 900.0) {
        pass = false;
        detail << "; runtime " << harness::format_double(elapsed) << "s > 900s";
    } else {
        detail << "; " << harness::format_double(elapsed) << "s";
    }
    report(9, "regret exponents", pass, detail.str());
    report(3, "t:orr on sweep cells", sweeps_clean,
           sweeps_clean ? "no violations reported by any sweep"
                        : "sweep reported violations");
}

void criterion_10_determinism(const char* cli_path) {
    if (cli_path == nullptr) {
        report(10, "CSV determinism", false, "CLI path not supplied");
        return;
    }
    std::filesystem::create_directories("acceptance_out");
    const char* config_path = "acceptance_out/determinism_config.json";
    {
        std::ofstream out(config_path);
        out << R"({
  "setting": "full-stochastic",
  "horizons": [64, 128, 256],
  "trials": 3,
  "seed": 5,
  "jordan": {"blocks": [{"magnitude": 1.0, "phase": 0.7, "size": 1}], "seed": 2},
  "noise": {"kind": "bounded_uniform_ball", "c_xi": 0.5},
  "bounds": {"cxi": 0.5}
})";
    }
    auto run_once = [&](const std::string& dir) {
        std::string cmd = std::string(cli_path) + " regret-sweep --config " +
                          config_path + " --out-dir " + dir + " > /dev/null";
        return std::system(cmd.c_str());
    };
    int rc1 = run_once("acceptance_out/det1");
    int rc2 = run_once("acceptance_out/det2");
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    std::string a = slurp("acceptance_out/det1/runs.csv");
    std::string b = slurp("acceptance_out/det2/runs.csv");
    bool pass = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
    report(10, "CSV determinism", pass,
           pass ? "byte-identical runs.csv across re-runs"
                : "outputs differ or command failed");
}

}  // namespace

int main(int argc, char** argv) {
    std::filesystem::create_directories("acceptance_out");
    criterion_1_residual_identity();
    criterion_2_recursive_batch();
    criterion_4_lower_bound();
    criterion_5_kalman();
    criterion_6_sufficient_length();
    criterion_7_structural_suite();
    criterion_8_cayley_hamilton();
    criterion_9_regret_exponents();
    criterion_10_determinism(argc > 1 ? argv[1] : nullptr);
    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance check(s) failed\n", failures);
    return 1;
}
