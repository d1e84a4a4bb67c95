#include "mslds/kalman.hpp"

#include <cmath>
#include <complex>

#include <Eigen/SVD>

#include "mslds/linalg.hpp"

namespace mslds::kalman {

namespace {

int matrix_rank(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    double tol = 1e-10 * std::max(1.0, svd.singularValues()[0]);
    int rank = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > tol) ++rank;
    return rank;
}

Matrix psd_sqrt(const Matrix& m) {
    auto eig = linalg::sym_eig(m);
    Matrix d = Matrix::Zero(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i)
        d(i, i) = std::sqrt(std::max(0.0, eig.eigenvalues[i]));
    return eig.eigenvectors * d * eig.eigenvectors.transpose();
}

Matrix riccati_step(const Matrix& A, const Matrix& C, const Matrix& sigma_x,
                    const Matrix& sigma_y, const Matrix& P) {
    Matrix S = C * P * C.transpose() + sigma_y;
    Matrix Sinv = linalg::invert_spd(S);
    Matrix next = A * P * A.transpose() -
                  A * P * C.transpose() * Sinv * C * P * A.transpose() +
                  sigma_x;
    return 0.5 * (next + next.transpose());
}

// H-infinity style evaluation of the scaled transfer function:
// max over 2048 unit-circle points z of ||C (gamma z I - A)^{-1} B||_2.
double transfer_sup_norm(const Matrix& A, const Matrix& B, const Matrix& C,
                         double gamma, int grid_points = 2048) {
    using CMatrix = Eigen::MatrixXcd;
    const Index d = A.rows();
    CMatrix Ac = A.cast<std::complex<double>>();
    CMatrix Bc = B.cast<std::complex<double>>();
    CMatrix Cc = C.cast<std::complex<double>>();
    double best = 0.0;
    for (int j = 0; j < grid_points; ++j) {
        double theta = 2.0 * M_PI * j / grid_points;
        std::complex<double> z = gamma * std::complex<double>(std::cos(theta),
                                                              std::sin(theta));
        CMatrix resolvent =
            (z * CMatrix::Identity(d, d) - Ac).partialPivLu().solve(Bc);
        CMatrix F = Cc * resolvent;
        Eigen::JacobiSVD<CMatrix> svd(F);
        best = std::max(best, svd.singularValues()[0]);
    }
    return best;
}

}  // namespace

KalmanSteadyState solve_dare(const Matrix& A, const Matrix& B, const Matrix& C,
                             const Matrix& sigma_x, const Matrix& sigma_y) {
    const Index d = A.rows();
    const Index n = C.rows();
    if (C.cols() != d || sigma_x.rows() != d || sigma_y.rows() != n)
        throw DimensionMismatchError("solve_dare: dimension mismatch");

    // Assumption checks: (A, C) observable, (A, sigma_x^{1/2}) controllable,
    // sigma_y positive definite.
    Matrix obs(n * d, d);
    Matrix Ak = Matrix::Identity(d, d);
    for (Index i = 0; i < d; ++i) {
        obs.middleRows(i * n, n) = C * Ak;
        Ak = Ak * A;
    }
    if (matrix_rank(obs) < d)
        throw NotObservableError("solve_dare: (A, C) not observable");

    Matrix sx_half = psd_sqrt(sigma_x);
    Matrix ctrl(d, d * d);
    Ak = Matrix::Identity(d, d);
    for (Index i = 0; i < d; ++i) {
        ctrl.middleCols(i * d, d) = Ak * sx_half;
        Ak = Ak * A;
    }
    if (matrix_rank(ctrl) < d)
        throw NotControllableError("solve_dare: (A, sigma_x^{1/2}) not controllable");
    linalg::cholesky(sigma_y);  // throws NotSpd when sigma_y is not PD

    Matrix P = sigma_x;
    bool converged = false;
    for (long it = 0; it < 1000000; ++it) {
        Matrix next = riccati_step(A, C, sigma_x, sigma_y, P);
        double diff = (next - P).cwiseAbs().maxCoeff();
        double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
        P = next;
        if (diff <= 1e-12 * scale) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NoConvergenceError("solve_dare: Riccati iteration did not converge");

    KalmanSteadyState kf;
    kf.P = P;
    Matrix S = C * P * C.transpose() + sigma_y;
    kf.innovation_covariance = S;
    kf.K = P * C.transpose() * linalg::invert_spd(S);
    kf.A_kf = A * (Matrix::Identity(d, d) - kf.K * C);
    kf.B_kf_u = B;
    kf.B_kf_y = A * kf.K;
    kf.C_kf = C;
    kf.riccati_residual =
        (riccati_step(A, C, sigma_x, sigma_y, P) - P).cwiseAbs().maxCoeff() /
        std::max(1e-300, P.cwiseAbs().maxCoeff());
    kf.spectral_radius = linalg::spectral_radius_estimate(kf.A_kf, 1 << 20);
    return kf;
}

std::vector<Vector> steady_state_predict(const KalmanSteadyState& kf,
                                         const std::vector<Vector>& inputs,
                                         const std::vector<Vector>& observations,
                                         const Vector& x0_mean) {
    const std::size_t T = observations.size();
    std::vector<Vector> preds;
    preds.reserve(T);
    Vector state = x0_mean;
    for (std::size_t t = 1; t <= T; ++t) {
        Vector next = kf.A_kf * state + kf.B_kf_y * observations[t - 1];
        if (kf.B_kf_u.cols() > 0 && t - 1 < inputs.size())
            next += kf.B_kf_u * inputs[t - 1];
        state = next;
        preds.push_back(kf.C_kf * state);
    }
    return preds;
}

TimeVaryingResult time_varying_kf(const Matrix& A, const Matrix& B,
                                  const Matrix& C, const Matrix& sigma_x,
                                  const Matrix& sigma_y, const Matrix& sigma0,
                                  const std::vector<Vector>& inputs,
                                  const std::vector<Vector>& observations,
                                  const Vector& x0_mean) {
    const std::size_t T = observations.size();
    TimeVaryingResult out;
    out.predictions.reserve(T);
    out.gains.reserve(T);

    Matrix P = sigma0;   // predictive covariance of x_t given y_{<t}
    Vector xpred = x0_mean;
    for (std::size_t t = 0; t < T; ++t) {
        Matrix S = C * P * C.transpose() + sigma_y;
        Matrix K = P * C.transpose() * linalg::invert_spd(S);
        out.gains.push_back(K);
        Vector filtered = xpred + K * (observations[t] - C * xpred);
        Vector next = A * filtered;
        if (B.cols() > 0 && t < inputs.size()) next += B * inputs[t];
        xpred = next;
        Matrix Pf = P - K * C * P;
        P = A * Pf * A.transpose() + sigma_x;
        P = 0.5 * (P + P.transpose());
        out.predictions.push_back(C * xpred);
    }
    return out;
}

UnrolledFilter unroll_filter(const KalmanSteadyState& kf, int ell) {
    UnrolledFilter out;
    out.F.reserve(ell);
    out.G.reserve(ell);
    Matrix Ak = Matrix::Identity(kf.A_kf.rows(), kf.A_kf.cols());
    for (int t = 0; t < ell; ++t) {
        out.F.push_back(kf.C_kf * Ak * kf.B_kf_u);
        out.G.push_back(kf.C_kf * Ak * kf.B_kf_y);
        Ak = kf.A_kf * Ak;
    }
    return out;
}

SuffLenResult sufficient_length(const KalmanSteadyState& kf, double eps) {
    if (eps <= 0.0) throw Error("sufficient_length: eps must be positive");
    double rho = kf.spectral_radius;
    if (rho >= 1.0)
        throw UnstableFilterError("sufficient_length: rho(A_kf) >= 1");

    const Index d = kf.A_kf.rows();
    Matrix B(d, kf.B_kf_u.cols() + kf.B_kf_y.cols());
    if (kf.B_kf_u.cols() > 0) B.leftCols(kf.B_kf_u.cols()) = kf.B_kf_u;
    B.rightCols(kf.B_kf_y.cols()) = kf.B_kf_y;

    auto objective = [&](double gamma) {
        double h = transfer_sup_norm(kf.A_kf, B, kf.C_kf, gamma);
        return std::log(h / (eps * (1.0 - gamma))) / (1.0 - gamma);
    };

    // 1-gamma log-spaced over [1e-6, 1-rho]
    const int grid = 200;
    double lo = std::log(1e-6);
    double hi = std::log(std::max(1e-6, 1.0 - rho));
    double best_gamma = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        double s = lo + (hi - lo) * i / (grid - 1);
        double gamma = 1.0 - std::exp(s);
        if (gamma <= rho || gamma >= 1.0) continue;
        double val = objective(gamma);
        if (val < best_val) {
            best_val = val;
            best_gamma = gamma;
        }
    }

    // golden-section refinement in the log(1-gamma) domain around the best
    // grid point
    double sbest = std::log(1.0 - best_gamma);
    double step = (hi - lo) / (grid - 1);
    double a = sbest - step, b = sbest + step;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    auto eval = [&](double s) {
        double gamma = 1.0 - std::exp(s);
        if (gamma <= rho || gamma >= 1.0)
            return std::numeric_limits<double>::infinity();
        return objective(gamma);
    };
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2);
        }
    }
    double srefined = 0.5 * (a + b);
    double grefined = 1.0 - std::exp(srefined);
    double vrefined = eval(srefined);
    if (vrefined < best_val) {
        best_val = vrefined;
        best_gamma = grefined;
    }

    SuffLenResult out;
    out.bound_value = best_val;
    out.gamma = best_gamma;
    out.length = std::max(1, static_cast<int>(std::ceil(best_val)));
    return out;
}

double tail_l1(const UnrolledFilter& filter, int L, double rho_hat) {
    KahanSum sum;
    double last = 0.0;
    const int len = static_cast<int>(filter.G.size());
    for (int k = std::max(0, L); k < len; ++k) {
        Matrix block(filter.G[k].rows(),
                     filter.F[k].cols() + filter.G[k].cols());
        if (filter.F[k].cols() > 0) block.leftCols(filter.F[k].cols()) = filter.F[k];
        block.rightCols(filter.G[k].cols()) = filter.G[k];
        last = linalg::operator_norm(block);
        sum.add(last);
    }
    double remainder = 0.0;
    if (rho_hat > 0.0 && rho_hat < 1.0 && len > std::max(0, L))
        remainder = last * rho_hat / (1.0 - rho_hat);
    return sum.value() + remainder;
}

double tail_l1(const KalmanSteadyState& kf, int L) {
    // unroll until the geometric remainder is negligible
    double rho = std::min(kf.spectral_radius, 1.0 - 1e-9);
    int horizon = L + 64;
    if (rho > 0.0)
        horizon = L + std::max(64, static_cast<int>(std::ceil(
                                        std::log(1e-14) / std::log(rho))));
    UnrolledFilter filter = unroll_filter(kf, horizon);
    return tail_l1(filter, L, kf.spectral_radius);
}

}  // namespace mslds::kalman
