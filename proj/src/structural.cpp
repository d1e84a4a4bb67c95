#include "mslds/structural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "mslds/linalg.hpp"
#include "mslds/rng.hpp"

namespace mslds::structural {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Chambolle-Pock on min_a ||a||_1 + ||x - X a||_2. The dual is
// max <p, x> over ||p||_2 <= 1, ||X^T p||_inf <= 1, which gives a
// certified gap at every iterate. When `member_lo/hi` are set the solve
// exits as soon as the objective is known to be on one side of 1.
L1Decomposition cp_solve(const Vector& x, const std::vector<Vector>& basis,
                         bool membership_mode = false) {
    L1Decomposition out;
    const Index d = x.size();
    const Index n = static_cast<Index>(basis.size());

    Matrix X(d, n);
    for (Index j = 0; j < n; ++j) {
        if (!basis[j].allFinite())
            throw Error("l1_span_norm: non-finite basis vector");
        X.col(j) = basis[j];
    }
    double L = n > 0 ? linalg::operator_norm(X) : 0.0;
    if (n == 0 || L == 0.0) {
        out.residual = x;
        out.value = x.norm();
        out.converged = true;
        return out;
    }

    const double step = 1.0 / L;
    Vector a = Vector::Zero(n), abar = a, p = Vector::Zero(d);
    double best_obj = x.norm();  // a = 0 is always feasible
    Vector best_a = a;
    double best_dual = 0.0;

    const long max_iters = 100000;
    long it = 0;
    for (; it < max_iters; ++it) {
        // dual ascent step, then projection onto the unit ball
        p += step * (X * abar - x);
        double pn = p.norm();
        if (pn > 1.0) p /= pn;

        Vector xtp = X.transpose() * p;
        Vector anext = a - step * xtp;
        for (Index j = 0; j < n; ++j) {
            double v = anext[j];
            anext[j] = std::copysign(std::max(0.0, std::abs(v) - step), v);
        }
        abar = 2.0 * anext - a;
        a = anext;

        double obj = a.lpNorm<1>() + (x - X * a).norm();
        if (obj < best_obj) {
            best_obj = obj;
            best_a = a;
        }
        // p tracks (X a - x)/||X a - x||, so the dual feasible value is
        // <-p, x> after scaling p into the ||X^T p||_inf <= 1 box
        double scale = std::max(1.0, xtp.lpNorm<Eigen::Infinity>());
        best_dual = std::max(best_dual, -p.dot(x) / scale);

        double gap = best_obj - best_dual;
        if (gap <= 1e-6 * (1.0 + best_obj)) {
            out.converged = true;
            break;
        }
        if (membership_mode && (best_obj <= 1.0 || best_dual > 1.0 + 1e-9)) {
            out.converged = true;
            break;
        }
    }

    out.iterations = std::min(it + 1, max_iters);
    out.gap = std::max(0.0, best_obj - best_dual);
    out.residual = x - X * best_a;
    out.value = best_obj;
    for (Index j = 0; j < n; ++j)
        if (std::abs(best_a[j]) > 1e-12)
            out.coefficients[static_cast<std::size_t>(j)] = best_a[j];
    return out;
}

bool hull_member(const Vector& z, const std::vector<Vector>& points) {
    auto dec = cp_solve(z, points, /*membership_mode=*/true);
    return dec.value <= 1.0 + 1e-9;
}

// monotone chain convex hull + shoelace area
double polygon_area(std::vector<std::pair<double, double>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return 0.0;
    auto cross = [](const std::pair<double, double>& o,
                    const std::pair<double, double>& a,
                    const std::pair<double, double>& b) {
        return (a.first - o.first) * (b.second - o.second) -
               (a.second - o.second) * (b.first - o.first);
    };
    std::vector<std::pair<double, double>> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 0 ? k - 1 : 0);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& p = hull[i];
        const auto& q = hull[(i + 1) % hull.size()];
        area += p.first * q.second - q.first * p.second;
    }
    return 0.5 * std::abs(area);
}

// Incrementally maintained set of hull-extreme basis vectors. A vector
// whose Delta'-norm over the current set is <= 1 lies inside the
// symmetrized hull (+ unit ball) and can never change any later norm:
// a coefficient on it can be rerouted through the set at no extra cost.
// Solves against the active set return the same values as against the
// full history, at a fraction of the basis size.
class ActiveBasis {
  public:
    // decomposes x over everything added so far, then records it
    L1Decomposition add(const Vector& x) {
        L1Decomposition dec = cp_solve(x, active_);
        if (dec.value > 1.0) {
            active_.push_back(x);
            if (active_.size() >= last_prune_size_ * 2 + 8) reprune();
        }
        return dec;
    }

  private:
    void reprune() {
        std::vector<Vector> kept;
        for (std::size_t i = 0; i < active_.size(); ++i) {
            std::vector<Vector> others = kept;
            for (std::size_t j = i + 1; j < active_.size(); ++j)
                others.push_back(active_[j]);
            if (cp_solve(active_[i], others).value > 1.0)
                kept.push_back(active_[i]);
        }
        active_ = std::move(kept);
        last_prune_size_ = std::max<std::size_t>(active_.size(), 1);
    }

    std::vector<Vector> active_;
    std::size_t last_prune_size_ = 1;
};

}  // namespace

double L1Decomposition::l1_mass() const {
    double m = 0.0;
    for (const auto& [idx, a] : coefficients) m += std::abs(a);
    return m;
}

L1Decomposition l1_span_norm(const Vector& x, const std::vector<Vector>& basis) {
    return cp_solve(x, basis);
}

OutlierSet outlier_indices(const std::vector<Vector>& states) {
    OutlierSet out;
    if (states.empty()) return out;
    const Index d = states.front().size();
    out.threshold = (2.0 / std::log(2.0)) * static_cast<double>(d);
    ActiveBasis basis;
    for (std::size_t s = 0; s < states.size(); ++s) {
        double norm = basis.add(states[s]).value;
        out.norms.push_back(norm);
        if (norm >= out.threshold) out.indices.push_back(s);
    }
    return out;
}

HullVolume hull_volume(const std::vector<Vector>& points, bool include_unit_ball,
                       Index dim) {
    Index d = dim;
    if (d < 0) {
        if (points.empty())
            throw DimensionMismatchError("hull_volume: dim required for empty set");
        d = points.front().size();
    }
    if (d > 6) throw DimensionTooLargeError("hull_volume: d > 6");
    HullVolume out;

    if (d == 1) {
        double radius = include_unit_ball ? 1.0 : 0.0;
        for (const auto& p : points) radius = std::max(radius, std::abs(p[0]));
        out.volume = 2.0 * radius;
        return out;
    }
    if (d == 2) {
        std::vector<std::pair<double, double>> verts;
        for (const auto& p : points) {
            verts.emplace_back(p[0], p[1]);
            verts.emplace_back(-p[0], -p[1]);
        }
        if (include_unit_ball) {
            const int gon = 256;
            for (int i = 0; i < gon; ++i) {
                double th = 2.0 * M_PI * i / gon;
                verts.emplace_back(std::cos(th), std::sin(th));
            }
        }
        out.volume = polygon_area(std::move(verts));
        return out;
    }

    // Monte Carlo mode. The membership oracle is the Delta'-norm, which
    // always contains the unit ball, so only the flagged form is supported.
    if (!include_unit_ball)
        throw Error("hull_volume: Monte Carlo mode requires the unit ball");
    double R = 1.0;
    for (const auto& p : points) R = std::max(R, p.norm());
    const long N = 1000000;
    CounterRng rng(0x7011, 0);
    long hits = 0;
    for (long i = 0; i < N; ++i) {
        Vector z(d);
        for (Index j = 0; j < d; ++j)
            z[j] = R * (2.0 * rng.uniform(static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(j)) -
                        1.0);
        if (hull_member(z, points)) ++hits;
    }
    double box = std::pow(2.0 * R, static_cast<double>(d));
    double frac = static_cast<double>(hits) / static_cast<double>(N);
    out.volume = box * frac;
    out.std_error = box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(N));
    out.exact = false;
    return out;
}

DoublingCheck check_volume_doubling(const std::vector<Vector>& S, const Vector& x) {
    const Index d = x.size();
    DoublingCheck out;
    out.norm = l1_span_norm(x, S).value;
    out.volume_before = hull_volume(S, true, d).volume;
    std::vector<Vector> extended = S;
    extended.push_back(x);
    out.volume_after = hull_volume(extended, true, d).volume;
    out.ratio = out.volume_after / out.volume_before;

    double dd = static_cast<double>(d);
    out.doubling_triggered = out.norm >= (2.0 / std::log(2.0)) * dd;
    out.doubling_holds = !out.doubling_triggered || out.ratio >= 2.0;
    out.satisfied = out.doubling_holds;
    for (double C : {1.0 / std::log(2.0), 1.0, 2.0}) {
        bool trig = out.norm >= 2.0 * C * dd;
        bool holds = !trig || out.ratio >= 1.0 + 2.0 * std::exp(-1.0 / C);
        out.probe_c.push_back(C);
        out.probe_triggered.push_back(trig);
        out.probe_holds.push_back(holds);
        out.satisfied = out.satisfied && holds;
    }
    return out;
}

AnomalyReport certify_anomaly_free(const std::vector<Vector>& series,
                                   const std::vector<Vector>& directions,
                                   double c, double c1, double c2, double alpha) {
    if (c1 <= 0.0 || c1 > 0.5)
        throw ConfigError("certify_anomaly_free: requires 0 < c1 <= 1/2");
    if (c < 1.0 / c1)
        throw ConfigError("certify_anomaly_free: requires c >= 1/c1");
    AnomalyReport report;
    report.c = c;
    report.c1 = c1;
    report.c2 = c2;
    report.alpha = alpha;
    report.directions = directions;
    for (std::size_t wi = 0; wi < directions.size(); ++wi) {
        const Vector& w = directions[wi];
        std::vector<double> proj(series.size());
        for (std::size_t t = 0; t < series.size(); ++t)
            proj[t] = std::abs(w.dot(series[t]));
        for (std::size_t t = 0; t < series.size(); ++t) {
            double M = proj[t];
            if (M <= c) continue;
            AnomalyCheck check;
            check.direction = wi;
            check.t = t;
            check.M = M;
            check.required = c1 * std::pow(M, alpha);
            for (std::size_t s = 0; s < t; ++s)
                if (proj[s] >= c2 * M) ++check.observed;
            check.pass = static_cast<double>(check.observed) >= check.required;
            report.certified = report.certified && check.pass;
            report.checks.push_back(check);
        }
    }
    return report;
}

AnomalyReport certify_anomaly_free(const std::vector<Vector>& series,
                                   int n_random, std::uint64_t seed, double c,
                                   double c1, double c2, double alpha) {
    if (series.empty()) throw Error("certify_anomaly_free: empty series");
    const Index d = series.front().size();
    std::vector<Vector> dirs;
    CounterRng rng(seed, 0xD1);
    for (int i = 0; i < n_random; ++i)
        dirs.push_back(
            rng.gaussian_vector(static_cast<std::uint64_t>(i), d).normalized());
    Matrix gram = Matrix::Zero(d, d);
    for (const auto& x : series) gram += x * x.transpose();
    auto eig = linalg::sym_eig(gram);
    for (Index i = 0; i < d; ++i) dirs.push_back(eig.eigenvectors.col(i));
    return certify_anomaly_free(series, dirs, c, c1, c2, alpha);
}

std::string anomaly_report_json(const AnomalyReport& report) {
    nlohmann::json j;
    j["c"] = report.c;
    j["c1"] = report.c1;
    j["c2"] = report.c2;
    j["alpha"] = report.alpha;
    j["certified"] = report.certified;
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& w : report.directions) {
        nlohmann::json row = nlohmann::json::array();
        for (Index i = 0; i < w.size(); ++i) row.push_back(w[i]);
        dirs.push_back(row);
    }
    j["directions"] = dirs;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& ch : report.checks)
        checks.push_back({{"direction", ch.direction},
                          {"t", ch.t},
                          {"M", ch.M},
                          {"required", ch.required},
                          {"observed", ch.observed},
                          {"pass", ch.pass}});
    j["checks"] = checks;
    return j.dump(2);
}

std::string anomaly_report_csv(const AnomalyReport& report) {
    std::ostringstream out;
    out << "direction,t,M,required,observed,pass\n";
    for (const auto& ch : report.checks)
        out << ch.direction << ',' << ch.t << ',' << fmt17(ch.M) << ','
            << fmt17(ch.required) << ',' << ch.observed << ','
            << (ch.pass ? 1 : 0) << '\n';
    return out.str();
}

Vector char_poly(const Matrix& A) {
    const Index d = A.rows();
    if (d != A.cols()) throw DimensionMismatchError("char_poly: not square");
    if (d > 32) throw DimensionTooLargeError("char_poly: d > 32");
    // Faddeev-LeVerrier: M_k = A M_{k-1} + c_{d-k+1} I, c_{d-k} = -tr(A M_k)/k
    Vector c = Vector::Zero(d + 1);
    c[d] = 1.0;
    Matrix M = Matrix::Zero(d, d);
    for (Index k = 1; k <= d; ++k) {
        M = A * M + c[d - k + 1] * Matrix::Identity(d, d);
        c[d - k] = -(A * M).trace() / static_cast<double>(k);
    }
    return c;
}

double coefficient_abs_sum(const Vector& coeffs) {
    return coeffs.lpNorm<1>();
}

std::vector<double> ch_recurrence_residual(const std::vector<Vector>& states,
                                           const Vector& coeffs) {
    const Index d = coeffs.size() - 1;
    if (std::abs(coeffs[d] - 1.0) > 1e-12)
        throw NonMonicDivisorError("ch_recurrence_residual: coefficients not monic");
    std::vector<double> residuals;
    for (std::size_t t = static_cast<std::size_t>(d); t < states.size(); ++t) {
        Vector acc = states[t];
        for (Index i = 0; i < d; ++i) acc += coeffs[i] * states[t - d + i];
        residuals.push_back(acc.norm());
    }
    return residuals;
}

PowerCheck jordan_power_check(const Matrix& A, int r, double c_a, int k_max) {
    PowerCheck out;
    Matrix Ak = Matrix::Identity(A.rows(), A.cols());
    KahanSum norm_sum;
    for (int k = 0; k <= k_max; ++k) {
        double norm = linalg::operator_norm(Ak);
        if (!std::isfinite(norm) || norm > 1e300)
            throw OverflowError("jordan_power_check: ||A^k|| overflow");
        norm_sum.add(norm);
        double kp1 = static_cast<double>(k + 1);
        out.worst_power_ratio = std::max(
            out.worst_power_ratio, norm / (std::pow(kp1, r - 1) * c_a));
        out.worst_sum_ratio = std::max(
            out.worst_sum_ratio, norm_sum.value() / (std::pow(kp1, r) * c_a));
        Ak = A * Ak;
    }
    return out;
}

std::vector<LeverageRecord> leverage_diagnostics(const std::vector<Vector>& states,
                                                 double mu) {
    if (mu <= 0.0)
        throw NonPositiveRegularizerError("leverage_diagnostics: mu must be positive");
    std::vector<LeverageRecord> records;
    if (states.empty()) return records;
    const Index d = states.front().size();
    Matrix sigma = mu * Matrix::Identity(d, d);
    std::vector<Vector> past;
    ActiveBasis basis;
    for (std::size_t t = 0; t < states.size(); ++t) {
        const Vector& vt = states[t];
        sigma += vt * vt.transpose();
        Matrix sigma_inv = linalg::invert_spd(sigma);

        LeverageRecord rec;
        rec.t = t;
        // sum_{s<=t} v_s^T Sigma_t^{-1} v_s = d - mu tr(Sigma_t^{-1})
        rec.leverage_sum =
            static_cast<double>(d) - mu * sigma_inv.trace();
        rec.leverage_holds = rec.leverage_sum <= static_cast<double>(d) + 1e-10;

        Vector w = sigma_inv * vt;
        KahanSum bsq;
        for (const auto& vs : past) {
            double b = vs.dot(w);
            bsq.add(b * b);
        }
        rec.b_sq_sum = bsq.value();
        auto dec = basis.add(vt);
        double la = dec.l1_mass();
        double lv = dec.residual.norm();
        rec.bound = (la * la + lv * lv / mu) * static_cast<double>(d) *
                    static_cast<double>(d);
        rec.b_bound_holds = rec.b_sq_sum <= rec.bound + 1e-9;
        records.push_back(rec);
        past.push_back(vt);
    }
    return records;
}

Primorial primorial(int x) {
    if (x < 2 || x > 10000) throw Error("primorial: x outside [2, 1e4]");
    std::vector<bool> composite(x + 1, false);
    boost::multiprecision::cpp_int product = 1;
    KahanSum log_sum;
    for (int p = 2; p <= x; ++p) {
        if (composite[p]) continue;
        for (long q = static_cast<long>(p) * p; q <= x; q += p)
            composite[q] = true;
        product *= p;
        log_sum.add(std::log(static_cast<double>(p)));
    }
    Primorial out;
    out.value = product.str();
    out.log_value = log_sum.value();
    out.ratio = out.log_value / (static_cast<double>(x) * std::log(x));
    return out;
}

Vector poly_mod(const Vector& P, const Vector& Q) {
    const Index dq = Q.size() - 1;
    if (dq < 0 || std::abs(Q[dq] - 1.0) > 1e-12)
        throw NonMonicDivisorError("poly_mod: divisor not monic");
    if (dq == 0) return Vector::Zero(1);
    std::vector<double> rem(P.data(), P.data() + P.size());
    if (static_cast<Index>(rem.size()) < dq) rem.resize(dq, 0.0);
    for (Index i = static_cast<Index>(rem.size()) - 1; i >= dq; --i) {
        double f = rem[i];
        if (f == 0.0) continue;
        rem[i] = 0.0;
        for (Index j = 0; j < dq; ++j) rem[i - dq + j] -= f * Q[j];
    }
    Vector out(dq);
    for (Index j = 0; j < dq; ++j) out[j] = rem[j];
    return out;
}

SmallMultiple small_multiple_search(const std::vector<std::complex<double>>& roots,
                                    int max_degree, std::uint64_t seed) {
    const int k = static_cast<int>(roots.size());
    if (k < 1 || k > 2)
        throw Error("small_multiple_search: supports 1 or 2 roots");
    if (max_degree < k || max_degree > 8)
        throw Error("small_multiple_search: max_degree outside [k, 8]");
    for (const auto& z : roots)
        if (std::abs(z) > 1.0 + 1e-12)
            throw Error("small_multiple_search: root outside the unit disk");

    // Q(z) = prod (z - z_i); must be real for the real long division
    std::vector<std::complex<double>> qc{1.0};
    for (const auto& z : roots) {
        std::vector<std::complex<double>> next(qc.size() + 1, 0.0);
        for (std::size_t i = 0; i < qc.size(); ++i) {
            next[i + 1] += qc[i];
            next[i] -= z * qc[i];
        }
        qc = next;
    }
    Vector Q(qc.size());
    for (std::size_t i = 0; i < qc.size(); ++i) {
        if (std::abs(qc[i].imag()) > 1e-9)
            throw Error("small_multiple_search: roots must close under conjugation");
        Q[i] = qc[i].real();
    }

    CounterRng rng(seed, 0x5A);
    const long budget = 1000000;
    double best_residue = std::numeric_limits<double>::infinity();
    for (long trial = 0; trial < budget; ++trial) {
        int n = k + static_cast<int>(rng.uniform_index(
                        static_cast<std::uint64_t>(trial), 0,
                        static_cast<std::uint64_t>(max_degree - k + 1)));
        Vector cand = Vector::Zero(n + 1);
        cand[n] = 1.0;
        for (int j = 0; j < n; ++j)
            cand[j] = static_cast<double>(
                          rng.uniform_index(static_cast<std::uint64_t>(trial),
                                            static_cast<std::uint64_t>(j + 1),
                                            21)) -
                      10.0;
        double res = poly_mod(cand, Q).lpNorm<Eigen::Infinity>();
        best_residue = std::min(best_residue, res);
        if (res <= 1e-9) {
            SmallMultiple out;
            out.coefficients = cand;
            out.max_residue = res;
            out.candidates_tried = trial + 1;
            return out;
        }
    }
    throw NotFoundError("small_multiple_search: no qualifying multiple; best residue " +
                        fmt17(best_residue));
}

}  // namespace mslds::structural
