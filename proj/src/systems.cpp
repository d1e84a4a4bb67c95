#include "mslds/systems.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mslds/kalman.hpp"
#include "mslds/linalg.hpp"
#include "mslds/rng.hpp"

namespace mslds::systems {

namespace {

bool is_real_phase(double phase) {
    double p = std::fmod(phase, 2.0 * M_PI);
    if (p < 0) p += 2.0 * M_PI;
    return std::abs(p) < 1e-12 || std::abs(p - M_PI) < 1e-12 ||
           std::abs(p - 2.0 * M_PI) < 1e-12;
}

Matrix psd_sqrt(const Matrix& m) {
    auto eig = linalg::sym_eig(m);
    Matrix d = Matrix::Zero(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i)
        d(i, i) = std::sqrt(std::max(0.0, eig.eigenvalues[i]));
    return eig.eigenvectors * d * eig.eigenvectors.transpose();
}

// Seeded orthogonal matrix: QR of a matrix of keyed gaussians.
Matrix random_orthogonal(Index d, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Matrix g(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            g(i, j) = rng.gaussian(static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(j));
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // fix signs for determinism across backends
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

Matrix seeded_matrix_with_norm(Index rows, Index cols, double target_norm,
                               std::uint64_t seed, std::uint64_t stream) {
    if (rows == 0 || cols == 0 || target_norm == 0.0)
        return Matrix::Zero(rows, cols);
    CounterRng rng(seed, stream);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = rng.gaussian(static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(j));
    double norm = linalg::operator_norm(m);
    if (norm == 0.0) return Matrix::Zero(rows, cols);
    return m * (target_norm / norm);
}

Matrix assemble_jordan(const JordanSpec& spec) {
    const Index d = spec.state_dim();
    Matrix J = Matrix::Zero(d, d);
    Index at = 0;
    for (const auto& block : spec.blocks) {
        if (is_real_phase(block.phase)) {
            double p = std::fmod(block.phase, 2.0 * M_PI);
            if (p < 0) p += 2.0 * M_PI;
            double lambda =
                (std::abs(p - M_PI) < 1e-12) ? -block.magnitude : block.magnitude;
            for (int i = 0; i < block.size; ++i) {
                J(at + i, at + i) = lambda;
                if (i + 1 < block.size) J(at + i, at + i + 1) = 1.0;
            }
            at += block.size;
        } else {
            double c = block.magnitude * std::cos(block.phase);
            double s = block.magnitude * std::sin(block.phase);
            for (int i = 0; i < block.size; ++i) {
                Index base = at + 2 * i;
                J(base, base) = c;
                J(base, base + 1) = -s;
                J(base + 1, base) = s;
                J(base + 1, base + 1) = c;
                if (i + 1 < block.size) {
                    J(base, base + 2) = 1.0;
                    J(base + 1, base + 3) = 1.0;
                }
            }
            at += 2 * block.size;
        }
    }
    return J;
}

Vector gaussian_noise(const Matrix& sqrt_cov, const CounterRng& rng,
                      std::uint64_t step, std::uint64_t lane_base) {
    return sqrt_cov * rng.gaussian_vector(step, sqrt_cov.rows(), lane_base);
}

}  // namespace

Index JordanSpec::state_dim() const {
    Index d = 0;
    for (const auto& b : blocks)
        d += is_real_phase(b.phase) ? b.size : 2 * b.size;
    return d;
}

int JordanSpec::max_block_size() const {
    int r = 1;
    for (const auto& b : blocks) r = std::max(r, b.size);
    return r;
}

double Trajectory::max_state_norm() const {
    double m = 0.0;
    for (const auto& x : states) m = std::max(m, x.norm());
    return m;
}

InputPolicy zero_inputs(Index dim) {
    return [dim](std::size_t) { return Vector::Zero(dim); };
}

InputPolicy bounded_random_inputs(Index dim, double cu, std::uint64_t seed) {
    return [dim, cu, seed](std::size_t t) {
        CounterRng rng(seed, /*stream=*/0x75ULL);
        return Vector(cu * rng.uniform_ball(t, dim));
    };
}

SystemSpec build_jordan_system(const JordanSpec& spec, Index input_dim,
                               Index obs_dim, const Bounds& bounds,
                               const NoiseConfig& noise) {
    for (const auto& b : spec.blocks) {
        if (b.magnitude < 0.0 || b.magnitude > 1.0)
            throw Error("build_jordan_system: eigenvalue magnitude outside [0,1]");
        if (b.size < 1) throw DimensionMismatchError("block size must be >= 1");
    }
    if (spec.condition < 1.0)
        throw Error("build_jordan_system: condition must be >= 1");

    const Index d = spec.state_dim();
    Matrix J = assemble_jordan(spec);

    Matrix S, Sinv;
    if (spec.condition <= 1.0 + 1e-12) {
        S = Matrix::Identity(d, d);
        Sinv = S;
    } else {
        Matrix q1 = random_orthogonal(d, spec.seed, 0x51);
        Matrix q2 = random_orthogonal(d, spec.seed, 0x52);
        // diagonal scaling tuned by bisection against the measured condition
        double lo = 1.0, hi = spec.condition * 2.0;
        double measured = 0.0;
        for (int it = 0; it < 60; ++it) {
            double s = 0.5 * (lo + hi);
            Vector diag = Vector::Ones(d);
            for (Index i = 0; i < d; ++i)
                diag[i] = std::pow(s, static_cast<double>(i) /
                                          std::max<double>(1.0, d - 1.0));
            S = q1 * diag.asDiagonal() * q2;
            Sinv = q2.transpose() * diag.cwiseInverse().asDiagonal() *
                   q1.transpose();
            measured = linalg::operator_norm(S) * linalg::operator_norm(Sinv);
            if (measured > spec.condition)
                hi = s;
            else if (measured < spec.condition * 0.99)
                lo = s;
            else
                break;
        }
        if (measured < 1.0 || measured > spec.condition * 1.05)
            throw NoConvergenceError(
                "build_jordan_system: could not hit target conditioning");
    }

    SystemSpec sys;
    sys.A = S * J * Sinv;
    sys.B = seeded_matrix_with_norm(d, input_dim, bounds.cb, spec.seed, 0xB);
    if (obs_dim > 0)
        sys.C = seeded_matrix_with_norm(obs_dim, d, bounds.cc, spec.seed, 0xC);
    CounterRng rng(spec.seed, 0x0);
    Vector x0 = rng.gaussian_vector(0, d, 0x10);
    double n = x0.norm();
    sys.x0 = (n > 0 && bounds.c0 > 0) ? Vector(x0 * (bounds.c0 / n))
                                      : Vector(Vector::Zero(d));
    sys.noise = noise;
    sys.bounds = bounds;
    sys.r = spec.max_block_size();
    sys.c_a = spec.condition;

    // k large enough that the (r-1) ln k / k bias of the estimator stays
    // inside the 1e-6 validation tolerance for block orders up to 4
    double rho = linalg::spectral_radius_estimate(sys.A, 1 << 27);
    if (rho > 1.0 + 1e-6)
        throw Error("build_jordan_system: spectral radius estimate " +
                    std::to_string(rho) + " exceeds 1");
    return sys;
}

Vector adversarial_noise_step(const Matrix& gram, const Vector& state,
                              double c_xi) {
    auto eig = linalg::sym_eig(gram);
    const Index d = gram.rows();
    double lambda_min = eig.eigenvalues[d - 1];

    // In the degenerate case, pick the direction inside the minimal
    // eigenspace closest to the state; it is the most adversarial member.
    double tol = 1e-12 * std::max(1.0, std::abs(eig.eigenvalues[0]));
    Matrix basis(d, d);
    Index k = 0;
    for (Index i = 0; i < d; ++i)
        if (eig.eigenvalues[i] <= lambda_min + tol)
            basis.col(k++) = eig.eigenvectors.col(i);

    Vector w;
    Vector proj = Vector::Zero(d);
    for (Index i = 0; i < k; ++i)
        proj += basis.col(i).dot(state) * basis.col(i);
    if (proj.norm() > 1e-12 * std::max(1.0, state.norm())) {
        w = proj.normalized();
    } else {
        w = basis.col(k - 1);
        // orient: first nonzero coordinate positive
        for (Index i = 0; i < d; ++i) {
            if (std::abs(w[i]) > 1e-14) {
                if (w[i] < 0) w = -w;
                break;
            }
        }
    }
    double align = w.dot(state);
    if (align < 0) w = -w;
    return c_xi * w;
}

std::vector<Vector> read_noise_csv(const std::string& path, Index dim,
                                   std::size_t T) {
    std::ifstream in(path);
    if (!in)
        throw NoiseFileMissingError("noise file not found: " + path);
    std::string line;
    std::getline(in, line);  // header "t,xi_1..xi_d"
    std::vector<Vector> rows;
    while (std::getline(in, line) && rows.size() < T) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // t column
        Vector v(dim);
        for (Index i = 0; i < dim; ++i) {
            if (!std::getline(ss, cell, ','))
                throw ConfigError("noise file row too short: " + line);
            v[i] = std::stod(cell);
        }
        rows.push_back(v);
    }
    if (rows.size() < T)
        throw ConfigError("noise file has fewer than T rows: " + path);
    return rows;
}

Trajectory simulate_full(const SystemSpec& sys, const InputPolicy& inputs,
                         std::size_t T, std::uint64_t seed) {
    if (T < 1) throw Error("simulate_full: T must be >= 1");
    const Index d = sys.A.rows();
    if (sys.x0.norm() > sys.bounds.c0 * (1.0 + 1e-9) + 1e-12)
        throw Error("simulate_full: ||x0|| exceeds declared C0");

    CounterRng rng(seed, /*stream=*/1);
    Matrix sx_sqrt;
    if (sys.noise.kind == NoiseKind::gaussian)
        sx_sqrt = psd_sqrt(sys.noise.sigma_x);
    std::vector<Vector> file_noise;
    if (sys.noise.kind == NoiseKind::file)
        file_noise = read_noise_csv(sys.noise.file_path, d, T);

    Trajectory traj;
    traj.states.reserve(T + 1);
    traj.inputs.reserve(T);
    traj.process_noise.reserve(T);
    traj.states.push_back(sys.x0);

    // Gram of past states, as maintained by an online ridge learner with
    // unit regularization; feeds the adaptive adversary.
    Matrix gram = Matrix::Identity(d, d);

    for (std::size_t t = 1; t <= T; ++t) {
        Vector u = inputs(t - 1);
        if (u.size() != sys.B.cols())
            throw DimensionMismatchError("simulate_full: input dimension");
        Vector drift = sys.A * traj.states.back();
        if (sys.B.cols() > 0) drift += sys.B * u;

        Vector xi;
        switch (sys.noise.kind) {
            case NoiseKind::gaussian:
                xi = gaussian_noise(sx_sqrt, rng, t, 0);
                break;
            case NoiseKind::bounded_uniform_ball:
                xi = sys.noise.c_xi * rng.uniform_ball(t, d);
                break;
            case NoiseKind::bounded_rademacher_axes: {
                Index axis = static_cast<Index>(rng.uniform_index(t, 0xA, d));
                xi = Vector::Zero(d);
                xi[axis] = sys.noise.c_xi * rng.rademacher(t, 0xB);
                break;
            }
            case NoiseKind::adversarial_least_explored:
                gram += traj.states.back() * traj.states.back().transpose();
                xi = adversarial_noise_step(gram, drift, sys.noise.c_xi);
                break;
            case NoiseKind::file:
                xi = file_noise[t - 1];
                break;
        }

        traj.inputs.push_back(u);
        traj.process_noise.push_back(xi);
        traj.states.push_back(drift + xi);
    }
    return traj;
}

Trajectory simulate_partial(const SystemSpec& sys, std::size_t T,
                            std::uint64_t seed) {
    if (!sys.C.has_value())
        throw RequiresObservationMatrixError("simulate_partial: C missing");
    if (sys.noise.kind != NoiseKind::gaussian)
        throw Error("simulate_partial: requires gaussian noise");
    const Index d = sys.A.rows();
    const Index n = sys.C->rows();

    auto kf = kalman::solve_dare(sys.A, sys.B, *sys.C, sys.noise.sigma_x,
                                 sys.noise.sigma_y);
    Matrix s0_sqrt = psd_sqrt(kf.P);
    Matrix sx_sqrt = psd_sqrt(sys.noise.sigma_x);
    Matrix sy_sqrt = psd_sqrt(sys.noise.sigma_y);

    CounterRng rng(seed, /*stream=*/2);
    Trajectory traj;
    traj.states.push_back(sys.x0 + s0_sqrt * rng.gaussian_vector(0, d, 0x100));

    InputPolicy inputs = sys.bounds.cu > 0
                             ? bounded_random_inputs(sys.B.cols(), sys.bounds.cu, seed)
                             : zero_inputs(sys.B.cols());

    Vector eta0 = sy_sqrt * rng.gaussian_vector(0, n, 0x200);
    traj.obs_noise.push_back(eta0);
    traj.observations.push_back(*sys.C * traj.states[0] + eta0);

    for (std::size_t t = 1; t <= T; ++t) {
        Vector u = inputs(t - 1);
        Vector xi = sx_sqrt * rng.gaussian_vector(t, d, 0x300);
        Vector x = sys.A * traj.states.back() + xi;
        if (sys.B.cols() > 0) x += sys.B * u;
        Vector eta = sy_sqrt * rng.gaussian_vector(t, n, 0x400);
        traj.inputs.push_back(u);
        traj.process_noise.push_back(xi);
        traj.states.push_back(x);
        traj.obs_noise.push_back(eta);
        traj.observations.push_back(*sys.C * x + eta);
    }
    return traj;
}

std::vector<RegressionPair> counterexample_instance(std::size_t T, int sign) {
    if (T < 1) throw Error("counterexample_instance: T must be >= 1");
    std::vector<RegressionPair> seq(T, RegressionPair{0.0, 0.0});
    seq[T - 1] = {static_cast<double>(T),
                  static_cast<double>(sign) * static_cast<double>(T)};
    return seq;
}

double state_growth_bound(const SystemSpec& sys, std::size_t T) {
    double Td = static_cast<double>(T);
    double r = static_cast<double>(sys.r);
    return std::pow(Td + 1.0, r - 1.0) * sys.c_a * sys.bounds.c0 +
           sys.c_a * sys.bounds.cb * sys.bounds.cu * std::pow(Td, r) +
           sys.c_a * sys.bounds.cxi * std::pow(Td, r);
}

// --- JSON serialization ---

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) rows.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", rows}};
}

Matrix matrix_from_json(const json& j) {
    if (j.is_number()) {
        Matrix m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    Matrix m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
    const auto& entries = j.at("entries");
    if (static_cast<Index>(entries.size()) != m.size())
        throw ConfigError("matrix: entries.length != rows*cols");
    // row-major
    for (Index i = 0; i < m.rows(); ++i)
        for (Index jj = 0; jj < m.cols(); ++jj)
            m(i, jj) = entries[static_cast<std::size_t>(i * m.cols() + jj)]
                           .get<double>();
    return m;
}

const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::bounded_uniform_ball: return "bounded_uniform_ball";
        case NoiseKind::bounded_rademacher_axes: return "bounded_rademacher_axes";
        case NoiseKind::adversarial_least_explored:
            return "adversarial_least_explored";
        case NoiseKind::file: return "file";
    }
    return "gaussian";
}

NoiseKind noise_kind_from_name(const std::string& s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "bounded_uniform_ball") return NoiseKind::bounded_uniform_ball;
    if (s == "bounded_rademacher_axes") return NoiseKind::bounded_rademacher_axes;
    if (s == "adversarial_least_explored")
        return NoiseKind::adversarial_least_explored;
    if (s == "file") return NoiseKind::file;
    throw ConfigError("unknown noise kind: " + s);
}

}  // namespace

std::string to_json(const SystemSpec& sys) {
    json j;
    j["A"] = matrix_to_json(sys.A);
    j["B"] = matrix_to_json(sys.B);
    if (sys.C.has_value()) j["C"] = matrix_to_json(*sys.C);
    json x0 = json::array();
    for (Index i = 0; i < sys.x0.size(); ++i) x0.push_back(sys.x0[i]);
    j["x0"] = x0;
    j["noise"] = {{"kind", noise_kind_name(sys.noise.kind)},
                  {"c_xi", sys.noise.c_xi},
                  {"seed", sys.noise.seed},
                  {"file_path", sys.noise.file_path}};
    if (sys.noise.sigma_x.size() > 0)
        j["noise"]["sigma_x"] = matrix_to_json(sys.noise.sigma_x);
    if (sys.noise.sigma_y.size() > 0)
        j["noise"]["sigma_y"] = matrix_to_json(sys.noise.sigma_y);
    j["bounds"] = {{"c0", sys.bounds.c0}, {"cu", sys.bounds.cu},
                   {"cxi", sys.bounds.cxi}, {"ceta", sys.bounds.ceta},
                   {"cb", sys.bounds.cb}, {"cc", sys.bounds.cc}};
    j["r"] = sys.r;
    j["c_a"] = sys.c_a;
    return j.dump(2);
}

SystemSpec system_from_json(const std::string& text) {
    json j = json::parse(text);
    SystemSpec sys;
    sys.A = matrix_from_json(j.at("A"));
    sys.B = matrix_from_json(j.at("B"));
    if (j.contains("C")) sys.C = matrix_from_json(j.at("C"));
    const auto& x0 = j.at("x0");
    sys.x0 = Vector(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) sys.x0[i] = x0[i].get<double>();
    const auto& nj = j.at("noise");
    sys.noise.kind = noise_kind_from_name(nj.at("kind").get<std::string>());
    sys.noise.c_xi = nj.value("c_xi", 1.0);
    sys.noise.seed = nj.value("seed", std::uint64_t{0});
    sys.noise.file_path = nj.value("file_path", std::string{});
    if (nj.contains("sigma_x")) sys.noise.sigma_x = matrix_from_json(nj["sigma_x"]);
    if (nj.contains("sigma_y")) sys.noise.sigma_y = matrix_from_json(nj["sigma_y"]);
    const auto& bj = j.at("bounds");
    sys.bounds.c0 = bj.value("c0", 1.0);
    sys.bounds.cu = bj.value("cu", 0.0);
    sys.bounds.cxi = bj.value("cxi", 1.0);
    sys.bounds.ceta = bj.value("ceta", 0.0);
    sys.bounds.cb = bj.value("cb", 0.0);
    sys.bounds.cc = bj.value("cc", 1.0);
    sys.r = j.value("r", 1);
    sys.c_a = j.value("c_a", 1.0);
    return sys;
}

}  // namespace mslds::systems
