#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mslds/types.hpp"

namespace mslds::structural {

/// Decomposition x = sum_s a_s basis_s + v minimizing ||a||_1 + ||v||_2.
/// The value is the Delta'-span norm of x over the basis plus the unit ball.
struct L1Decomposition {
    std::map<std::size_t, double> coefficients;  // nonzero a_s only
    Vector residual;                             // v
    double value = 0.0;                          // sum |a_s| + ||v||_2
    long iterations = 0;
    double gap = 0.0;  // primal-dual optimality gap at exit
    bool converged = false;

    double l1_mass() const;  // sum |a_s|
};

/// Proximal primal-dual solve of min_a ||a||_1 + ||x - X a||_2, tolerance
/// 1e-6 on the duality gap, at most 1e5 iterations, a initialized to zero.
/// Non-convergence is reported through the gap field, never thrown.
L1Decomposition l1_span_norm(const Vector& x, const std::vector<Vector>& basis);

struct OutlierSet {
    std::vector<std::size_t> indices;  // sorted
    double threshold = 0.0;            // (2/ln2) d
    std::vector<double> norms;         // ||x_s||_{Delta'_{s-1}} per index s
};

/// Indices s with ||x_s||_{Delta'_{s-1}} >= (2/ln2) d, where Delta'_{s-1}
/// spans the strictly earlier states plus the unit ball.
OutlierSet outlier_indices(const std::vector<Vector>& states);

/// Volume of the absolute convex hull of {+/- points} (union the unit ball
/// when flagged). Exact for d <= 2 (disk as a regular 256-gon); Monte Carlo
/// with 1e6 membership tests for 3 <= d <= 6.
struct HullVolume {
    double volume = 0.0;
    double std_error = 0.0;  // zero in exact mode
    bool exact = true;
};

/// dim may be omitted when points is nonempty.
HullVolume hull_volume(const std::vector<Vector>& points, bool include_unit_ball,
                       Index dim = -1);

struct DoublingCheck {
    double norm = 0.0;          // ||x||_{Delta'(S)}
    double volume_before = 0.0;
    double volume_after = 0.0;
    double ratio = 0.0;
    bool doubling_triggered = false;  // norm >= (2/ln2) d
    bool doubling_holds = true;       // ratio >= 2 when triggered
    // probed C values {1/ln2, 1, 2}: norm >= 2Cd implies ratio >= 1+2e^{-1/C}
    std::vector<double> probe_c;
    std::vector<bool> probe_triggered;
    std::vector<bool> probe_holds;
    bool satisfied = true;  // all triggered assertions hold
};

DoublingCheck check_volume_doubling(const std::vector<Vector>& S, const Vector& x);

struct AnomalyCheck {
    std::size_t direction = 0;
    std::size_t t = 0;
    double M = 0.0;         // |w^T x_t|
    double required = 0.0;  // c1 M^alpha
    long observed = 0;      // #{s < t : |w^T x_s| >= c2 M}
    bool pass = true;
};

struct AnomalyReport {
    double c = 0.0, c1 = 0.0, c2 = 0.0, alpha = 0.0;
    std::vector<Vector> directions;
    std::vector<AnomalyCheck> checks;  // one per (direction, t) with M > c
    bool certified = true;
};

/// Probes (c, c1, c2, alpha)-anomaly-freeness along explicit directions.
AnomalyReport certify_anomaly_free(const std::vector<Vector>& series,
                                   const std::vector<Vector>& directions,
                                   double c, double c1, double c2, double alpha);

/// Convenience variant: n_random seeded unit directions plus the
/// eigenvectors of the final Gram matrix.
AnomalyReport certify_anomaly_free(const std::vector<Vector>& series,
                                   int n_random, std::uint64_t seed, double c,
                                   double c1, double c2, double alpha);

std::string anomaly_report_json(const AnomalyReport& report);
std::string anomaly_report_csv(const AnomalyReport& report);

/// Monic characteristic polynomial by the Faddeev-LeVerrier recursion.
/// Coefficients ascending: p(z) = coeffs[0] + ... + coeffs[d] z^d, coeffs[d]=1.
Vector char_poly(const Matrix& A);

/// Sum of |coefficients|, the Lemma quantity bounded by 2^d for rho <= 1.
double coefficient_abs_sum(const Vector& coeffs);

/// ||x_t + sum_{i<d} a_i x_{t-d+i}|| for t = d..T, given monic ascending
/// coefficients of the characteristic polynomial.
std::vector<double> ch_recurrence_residual(const std::vector<Vector>& states,
                                           const Vector& coeffs);

struct PowerCheck {
    double worst_power_ratio = 0.0;  // max_k ||A^k|| / ((k+1)^{r-1} C_A)
    double worst_sum_ratio = 0.0;    // max_k sum_{s<=k}||A^s|| / ((k+1)^r C_A)
};

PowerCheck jordan_power_check(const Matrix& A, int r, double c_a, int k_max);

struct LeverageRecord {
    std::size_t t = 0;
    double leverage_sum = 0.0;  // sum_{s<=t} v_s^T Sigma_t^{-1} v_s
    double b_sq_sum = 0.0;      // sum_{s<t} (v_s^T Sigma_t^{-1} v_t)^2
    double bound = 0.0;         // (L_a^2 + L_v^2 / mu) d^2
    bool leverage_holds = true;
    bool b_bound_holds = true;
};

std::vector<LeverageRecord> leverage_diagnostics(const std::vector<Vector>& states,
                                                 double mu);

struct Primorial {
    std::string value;   // decimal digits of the product of primes <= x
    double log_value = 0.0;
    double ratio = 0.0;  // log_value / (x ln x)
};

Primorial primorial(int x);

/// Remainder of P(z) mod Q(z), coefficients ascending, Q monic.
Vector poly_mod(const Vector& P, const Vector& Q);

struct SmallMultiple {
    Vector coefficients;  // ascending, monic
    double max_residue = 0.0;
    long candidates_tried = 0;
};

/// Seeded randomized search for a monic polynomial with integer coefficients
/// in [-10, 10], degree <= max_degree, divisible by prod (z - root_i).
/// Throws NotFoundError after 1e6 candidates.
SmallMultiple small_multiple_search(const std::vector<std::complex<double>>& roots,
                                    int max_degree, std::uint64_t seed = 0);

}  // namespace mslds::structural
