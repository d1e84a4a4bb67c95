#pragma once

#include <vector>

#include "mslds/types.hpp"

namespace mslds::kalman {

/// Steady-state Kalman filter in predictor form:
///   x-_t = A_kf x-_{t-1} + B_u u_{t-1} + B_y y_{t-1},  yhat_t = C_kf x-_t
/// with A_kf = A(I - K C), B_y = A K, B_u = B, C_kf = C.
struct KalmanSteadyState {
    Matrix P;           // steady-state predictive covariance (Riccati fixed point)
    Matrix K;           // gain P C^T (C P C^T + Sigma_y)^{-1}
    Matrix A_kf;
    Matrix B_kf_u;
    Matrix B_kf_y;
    Matrix C_kf;
    Matrix innovation_covariance;  // C P C^T + Sigma_y
    double riccati_residual = 0.0;
    double spectral_radius = 0.0;  // estimate of rho(A_kf)
};

/// Solves the discrete algebraic Riccati equation by fixed-point iteration
/// to 1e-12 relative tolerance. Checks observability of (A, C) and
/// controllability of (A, Sigma_x^{1/2}) up front.
KalmanSteadyState solve_dare(const Matrix& A, const Matrix& B, const Matrix& C,
                             const Matrix& sigma_x, const Matrix& sigma_y);

/// One-step-ahead predictions yhat_1..yhat_T from the steady-state filter,
/// driven by inputs u_0..u_{T-1} and observations y_0..y_{T-1}.
std::vector<Vector> steady_state_predict(const KalmanSteadyState& kf,
                                         const std::vector<Vector>& inputs,
                                         const std::vector<Vector>& observations,
                                         const Vector& x0_mean);

struct TimeVaryingResult {
    std::vector<Vector> predictions;  // yhat_1..yhat_T
    std::vector<Matrix> gains;        // K_t used at each step
};

/// Time-varying Kalman filter (covariance recursion from Sigma_0); the
/// validation oracle for the steady-state predictor.
TimeVaryingResult time_varying_kf(const Matrix& A, const Matrix& B,
                                  const Matrix& C, const Matrix& sigma_x,
                                  const Matrix& sigma_y, const Matrix& sigma0,
                                  const std::vector<Vector>& inputs,
                                  const std::vector<Vector>& observations,
                                  const Vector& x0_mean);

/// Truncated autoregressive representation of the filter:
/// F_t = C_kf A_kf^t B_u, G_t = C_kf A_kf^t B_y for 0 <= t < ell.
struct UnrolledFilter {
    std::vector<Matrix> F;
    std::vector<Matrix> G;
};

UnrolledFilter unroll_filter(const KalmanSteadyState& kf, int ell);

struct SuffLenResult {
    int length;          // R(eps)
    double gamma;        // optimizing radius
    double bound_value;  // value of the minimized expression before ceil
};

/// Sufficient length R(eps) = ceil(inf_{rho<gamma<1} 1/(1-gamma)
/// * ln(Hinf(gamma)/(eps(1-gamma)))), with Hinf(gamma) evaluated on a dense
/// unit-circle grid and refined by golden-section search over gamma.
SuffLenResult sufficient_length(const KalmanSteadyState& kf, double eps);

/// l1 tail of the unrolled filter from lag L: sum of ||(F_k, G_k)||_2 over
/// the available horizon plus a geometric remainder from the spectral
/// radius estimate.
double tail_l1(const UnrolledFilter& filter, int L, double rho_hat);

/// Convenience overload that unrolls far enough for the remainder to be
/// negligible against the retained mass.
double tail_l1(const KalmanSteadyState& kf, int L);

}  // namespace mslds::kalman
