#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mslds/systems.hpp"
#include "mslds/types.hpp"

namespace mslds::predictors {

/// Regularized online least squares (ridge) learner state.
/// Sigma = mu I + sum_{s<t} x_s x_s^T, Y = sum_{s<t} y_s x_s^T, A = Y Sigma^{-1}.
struct OlsState {
    double mu = 1.0;
    Matrix sigma;
    Matrix sigma_inv;
    Matrix Y;
    Matrix A;
    long t = 0;
    long updates_since_refresh = 0;
};

OlsState ols_init(Index dim_in, Index dim_out, double mu);
Vector ols_predict(const OlsState& state, const Vector& x);
void ols_update(OlsState& state, const Vector& x, const Vector& y);

/// Batch oracle: (sum y x^T)(mu I + sum x x^T)^{-1}, via solve_spd per row.
Matrix ols_batch_solve(const std::vector<std::pair<Vector, Vector>>& history,
                       double mu);

/// Right-hand side of the prediction-error identity:
///   sum_{s<t} xi_s x_s^T Sigma_t^{-1} x_t - mu A_true Sigma_t^{-1} x_t - xi_t.
/// Requires y_s = A_true x_s + xi_s for every history pair (checked to 1e-10).
Vector residual_closed_form(
    const std::vector<std::pair<Vector, Vector>>& history, double mu,
    const Matrix& A_true, const std::vector<Vector>& noises, const Vector& x_t,
    const Vector& xi_t);

struct ArConfig {
    int ell = 1;      // lag length
    Index input_dim = 0;
    Index obs_dim = 1;

    Index feature_dim() const { return ell * (input_dim + obs_dim); }
};

/// Stacked (u_t..u_{t-ell+1}, y_t..y_{t-ell+1}), zero-padded below index 0.
Vector ar_features(const std::vector<Vector>& inputs,
                   const std::vector<Vector>& observations, long t,
                   const ArConfig& cfg);

/// One step of Algorithm 2 on a fully observed trajectory: predict
/// xhat_{t+1} from (x_t; u_t), then feed the realized transition back.
/// Valid for 0 <= t < horizon.
Vector lds_learner_step(OlsState& state, const systems::Trajectory& traj,
                        long t);

/// One step of Algorithm 3 on a partially observed trajectory: predict
/// yhat_{t+1} from the lag-ell feature vector, then update once the history
/// reaches s = ell-1.
Vector ar_learner_step(OlsState& state, const systems::Trajectory& traj,
                       long t, const ArConfig& cfg);

/// Structured-text checkpoint of (mu, t, Sigma, Y) with hex floats, for
/// bit-exact resume.
std::string checkpoint(const OlsState& state);
OlsState restore(const std::string& text);

}  // namespace mslds::predictors
