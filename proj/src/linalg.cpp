#include "mslds/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mslds::linalg {

namespace {

void require_symmetric(const Matrix& m, double tol, const char* who) {
    if (m.rows() != m.cols())
        throw NotSymmetricError(std::string(who) + ": matrix not square");
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
        throw NotSymmetricError(std::string(who) + ": asymmetry " +
                                std::to_string(asym / scale));
}

}  // namespace

Matrix cholesky(const Matrix& m) {
    require_symmetric(m, 1e-12, "cholesky");
    const Index n = m.rows();
    const double pivot_floor = 1e-14 * m.trace() / static_cast<double>(n);
    Matrix L = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        double diag = m(j, j) - L.row(j).head(j).squaredNorm();
        if (diag <= pivot_floor)
            throw NotSpdError("cholesky: pivot " + std::to_string(diag) +
                              " at column " + std::to_string(j));
        L(j, j) = std::sqrt(diag);
        for (Index i = j + 1; i < n; ++i) {
            double s = m(i, j) - L.row(i).head(j).dot(L.row(j).head(j));
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

Vector solve_spd(const Matrix& m, const Vector& b) {
    if (m.rows() != b.size())
        throw DimensionMismatchError("solve_spd: dimension mismatch");
    Matrix L = cholesky(m);
    // forward then back substitution
    Vector y = L.triangularView<Eigen::Lower>().solve(b);
    return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix invert_spd(const Matrix& m) {
    const Index n = m.rows();
    Matrix L = cholesky(m);
    Matrix inv(n, n);
    for (Index j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        Vector y = L.triangularView<Eigen::Lower>().solve(e);
        inv.col(j) = L.transpose().triangularView<Eigen::Upper>().solve(y);
    }
    // symmetrize against roundoff
    return 0.5 * (inv + inv.transpose());
}

Matrix rank_one_inverse_update(const Matrix& p, const Vector& x) {
    if (p.rows() != x.size())
        throw DimensionMismatchError("rank_one_inverse_update: dimension mismatch");
    Vector px = p * x;
    double denom = 1.0 + x.dot(px);
    return p - (px * px.transpose()) / denom;
}

double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    const Index n = m.cols();
    // pre-scale so the Gram matrix cannot overflow for large entries
    double mscale = m.cwiseAbs().maxCoeff();
    if (mscale == 0.0) return 0.0;
    if (!std::isfinite(mscale)) return mscale;
    if (mscale > 1e100 || mscale < 1e-100)
        return mscale * operator_norm(m / mscale);
    Matrix mtm = m.transpose() * m;
    double scale = mtm.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;

    // Deterministic start with all components nonzero and unequal so no
    // eigendirection is missed by symmetry.
    Vector v(n);
    for (Index i = 0; i < n; ++i)
        v[i] = 1.0 + static_cast<double>(i) / static_cast<double>(n + 1);
    v.normalize();

    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Vector w = mtm * v;
        double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        double next = w.dot(mtm * w);
        if (std::abs(next - lambda) <= 1e-16 * std::max(1.0, next) && it > 2) {
            lambda = next;
            break;
        }
        lambda = next;
        v = w;
    }
    return std::sqrt(std::max(0.0, lambda));
}

SymEig sym_eig(const Matrix& m) {
    require_symmetric(m, 1e-10, "sym_eig");
    const Index n = m.rows();
    Matrix a = 0.5 * (m + m.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Index p = 0; p < n; ++p)
            for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-14 * scale) break;

        for (Index p = 0; p < n; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) <= 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                // A <- J^T A J applied to rows/cols p,q
                for (Index k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Index k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index i, Index j) { return a(i, i) > a(j, j); });

    SymEig out;
    out.eigenvalues = Vector(n);
    out.eigenvectors = Matrix(n, n);
    for (Index i = 0; i < n; ++i) {
        out.eigenvalues[i] = a(order[i], order[i]);
        out.eigenvectors.col(i) = v.col(order[i]);
    }
    return out;
}

double spectral_radius_estimate(const Matrix& m, int k) {
    if (k < 64)
        throw Error("spectral_radius_estimate: k must be >= 64");
    int doublings = 0;
    int kk = 1;
    while (kk < k) {
        kk *= 2;
        ++doublings;
    }

    // The squaring runs in extended precision: double roundoff splits
    // defective eigenvalues by ~sqrt(eps) and inflates the estimate for
    // marginal Jordan blocks beyond the k^-1 log k transient.
    using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    MatrixL b = m.cast<long double>();
    long double log_norm = 0.0L;  // log of the accumulated scaling
    for (int j = 0; j < doublings; ++j) {
        // Frobenius scaling is self-compensating in the bookkeeping
        long double norm = b.norm();
        if (norm == 0.0L) return 0.0;
        log_norm = 2.0L * (log_norm + std::log(norm));
        b = ((b / norm) * (b / norm)).eval();
        if (!b.allFinite())
            throw OverflowError("spectral_radius_estimate: non-finite intermediate");
    }
    // the contract value is the operator norm of m^k
    double final_norm = operator_norm(b.cast<double>());
    log_norm += std::log(std::max<long double>(final_norm, 1e-300L));
    if (log_norm > std::log(1e300L))
        throw OverflowError("spectral_radius_estimate: ||m^k|| exceeds 1e300");
    return static_cast<double>(
        std::exp(log_norm / static_cast<long double>(kk)));
}

}  // namespace mslds::linalg
