#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mslds/kalman.hpp"
#include "mslds/systems.hpp"
#include "mslds/types.hpp"

namespace mslds::harness {

enum class Setting {
    full_adversarial,
    full_stochastic,
    partial_stochastic,
    ols_lower_bound,
};

std::string setting_name(Setting s);
Setting setting_from_name(const std::string& name);

struct MuRule {
    enum class Kind { theorem_adversarial, theorem_stochastic, explicit_value };
    Kind kind = Kind::theorem_stochastic;
    double value = 1.0;  // explicit_value only
};

struct EllRule {
    enum class Kind { sufficient_length, explicit_value };
    Kind kind = Kind::sufficient_length;
    double eps = 1e-3;  // sufficient_length only
    int value = 1;      // explicit_value only
};

struct AnomalyConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double alpha = 0.0;
};

struct ExperimentConfig {
    std::optional<systems::JordanSpec> jordan;
    Index input_dim = 0;
    Index obs_dim = 0;
    systems::Bounds bounds;
    systems::NoiseConfig noise;
    std::optional<systems::SystemSpec> system;  // overrides jordan when set

    Setting setting = Setting::full_stochastic;
    std::vector<long> horizons;  // sorted ascending
    MuRule mu_rule;
    EllRule ell_rule;
    int trials = 1;
    std::uint64_t seed = 0;
    double delta = 0.05;
    std::string out_dir = ".";
    std::string format = "csv";
    int threads = 1;
};

/// Parses the JSON config, reporting the offending field on error.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical serialized config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Regularizer per the theorems: adversarial full observation scales as
/// T^{(2r+1)/(2r+2)}; stochastic and partial use 1. When structural
/// constants are supplied the full formula
/// m^{(a+2)/(a+1)} T^{(a+2)/(2(a+1))} / (c1^{1/(a+1)} c2^{2/(a+1)}) applies.
double choose_mu(Setting setting, double T, int r, Index m,
                 const std::optional<AnomalyConstants>& constants = std::nullopt);
double choose_mu(const MuRule& rule, Setting setting, double T, int r, Index m);

struct RegretRecord {
    std::vector<double> learner_losses;
    std::vector<double> comparator_losses;
    std::vector<double> cumulative;  // compensated partial sums of the gap
    double regret = 0.0;
    double max_pred_err = 0.0;
    std::size_t start = 1;  // first t included in the sums
};

/// Full-observation regret against the true (A, B) comparator, which
/// suffers exactly the process noise on each step.
RegretRecord regret_full(const systems::Trajectory& traj,
                         const std::vector<Vector>& predictions,
                         const Matrix& A, const Matrix& B);

/// Partial-observation regret against the steady-state Kalman predictor,
/// accruing from t = ell + 1.
RegretRecord regret_partial(const systems::Trajectory& traj,
                            const std::vector<Vector>& predictions,
                            const kalman::KalmanSteadyState& kf, int ell,
                            const Vector& x0_mean);

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms deviation in log space
    bool clamped = false;   // some R_T was non-positive and floored at 1e-9
};

/// Least-squares line on (ln T, ln R_T); needs at least 3 horizons.
ExponentFit exponent_fit(const std::vector<std::pair<double, double>>& pairs);

struct RunRow {
    std::string config_hash;
    Setting setting;
    long T = 0;
    int trial = 0;
    double mu = 0.0;
    int ell = 0;
    double regret = 0.0;
    double max_pred_err = 0.0;
    std::string slope_group;
};

struct ExperimentResult {
    std::vector<RunRow> rows;
    std::map<std::string, ExponentFit> slopes;  // per slope_group
    std::vector<std::string> violations;        // t:orr or invariant breaches
    std::string runs_csv_path;
    std::string summary_path;
};

/// Runs every (T, trial) cell in order, writes runs.csv plus a JSON summary
/// into cfg.out_dir, and returns the in-memory result. Any violation is
/// listed rather than thrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string runs_csv(const std::vector<RunRow>& rows);

/// %.17g, the shortest round-trippable decimal form used in all outputs.
std::string format_double(double v);

}  // namespace mslds::harness
