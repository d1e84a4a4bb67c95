#include "mslds/predictors.hpp"

#include <cstdio>
#include <sstream>

#include "mslds/linalg.hpp"

namespace mslds::predictors {

namespace {

// Sherman-Morrison drifts; rebuild the inverse from scratch periodically.
constexpr long kRefreshInterval = 256;

void refresh_inverse(OlsState& state) {
    state.sigma_inv = linalg::invert_spd(state.sigma);
    state.A = state.Y * state.sigma_inv;
    state.updates_since_refresh = 0;
}

}  // namespace

OlsState ols_init(Index dim_in, Index dim_out, double mu) {
    if (mu <= 0.0)
        throw NonPositiveRegularizerError("ols_init: mu must be positive");
    OlsState s;
    s.mu = mu;
    s.sigma = mu * Matrix::Identity(dim_in, dim_in);
    s.sigma_inv = Matrix::Identity(dim_in, dim_in) / mu;
    s.Y = Matrix::Zero(dim_out, dim_in);
    s.A = Matrix::Zero(dim_out, dim_in);
    s.t = 0;
    return s;
}

Vector ols_predict(const OlsState& state, const Vector& x) {
    if (x.size() != state.A.cols())
        throw DimensionMismatchError("ols_predict: regressor dimension");
    return state.A * x;
}

void ols_update(OlsState& state, const Vector& x, const Vector& y) {
    if (x.size() != state.sigma.rows() || y.size() != state.Y.rows())
        throw DimensionMismatchError("ols_update: dimension mismatch");
    state.sigma += x * x.transpose();
    state.Y += y * x.transpose();
    ++state.t;
    if (++state.updates_since_refresh >= kRefreshInterval) {
        refresh_inverse(state);
    } else {
        state.sigma_inv = linalg::rank_one_inverse_update(state.sigma_inv, x);
        state.A = state.Y * state.sigma_inv;
    }
}

Matrix ols_batch_solve(const std::vector<std::pair<Vector, Vector>>& history,
                       double mu) {
    if (mu <= 0.0)
        throw NonPositiveRegularizerError("ols_batch_solve: mu must be positive");
    if (history.empty())
        throw InsufficientHistoryError("ols_batch_solve: empty history");
    const Index m = history.front().first.size();
    const Index n = history.front().second.size();
    Matrix sigma = mu * Matrix::Identity(m, m);
    Matrix Y = Matrix::Zero(n, m);
    for (const auto& [x, y] : history) {
        sigma += x * x.transpose();
        Y += y * x.transpose();
    }
    // A Sigma = Y, one SPD solve per output row
    Matrix A(n, m);
    for (Index i = 0; i < n; ++i)
        A.row(i) = linalg::solve_spd(sigma, Y.row(i).transpose()).transpose();
    return A;
}

Vector residual_closed_form(
    const std::vector<std::pair<Vector, Vector>>& history, double mu,
    const Matrix& A_true, const std::vector<Vector>& noises, const Vector& x_t,
    const Vector& xi_t) {
    if (history.size() != noises.size())
        throw DimensionMismatchError("residual_closed_form: history/noise size");
    const Index m = x_t.size();
    Matrix sigma = mu * Matrix::Identity(m, m);
    for (std::size_t s = 0; s < history.size(); ++s) {
        const auto& [x, y] = history[s];
        double dev = (y - A_true * x - noises[s]).cwiseAbs().maxCoeff();
        if (dev > 1e-10 * std::max(1.0, y.cwiseAbs().maxCoeff()))
            throw ModelMismatchError(
                "residual_closed_form: y_s != A_true x_s + xi_s");
        sigma += x * x.transpose();
    }
    Vector w = linalg::solve_spd(sigma, x_t);
    Vector out = -(A_true * (mu * w)) - xi_t;
    for (std::size_t s = 0; s < history.size(); ++s)
        out += noises[s] * history[s].first.dot(w);
    return out;
}

Vector ar_features(const std::vector<Vector>& inputs,
                   const std::vector<Vector>& observations, long t,
                   const ArConfig& cfg) {
    if (cfg.ell < 1) throw ConfigError("ar_features: lag must be >= 1");
    Vector phi = Vector::Zero(cfg.feature_dim());
    Index at = 0;
    for (int k = 0; k < cfg.ell; ++k) {
        long s = t - k;
        if (s >= 0 && s < static_cast<long>(inputs.size()))
            phi.segment(at, cfg.input_dim) = inputs[s];
        at += cfg.input_dim;
    }
    for (int k = 0; k < cfg.ell; ++k) {
        long s = t - k;
        if (s >= 0 && s < static_cast<long>(observations.size()))
            phi.segment(at, cfg.obs_dim) = observations[s];
        at += cfg.obs_dim;
    }
    return phi;
}

Vector lds_learner_step(OlsState& state, const systems::Trajectory& traj,
                        long t) {
    if (t < 0 || t >= static_cast<long>(traj.horizon()))
        throw InsufficientHistoryError("lds_learner_step: t outside horizon");
    const Vector& x = traj.states[t];
    const Vector& u = traj.inputs[t];
    Vector z(x.size() + u.size());
    z.head(x.size()) = x;
    z.tail(u.size()) = u;
    Vector pred = ols_predict(state, z);
    ols_update(state, z, traj.states[t + 1]);
    return pred;
}

Vector ar_learner_step(OlsState& state, const systems::Trajectory& traj,
                       long t, const ArConfig& cfg) {
    if (t < 0 || t + 1 >= static_cast<long>(traj.observations.size()))
        throw InsufficientHistoryError("ar_learner_step: t outside horizon");
    Vector phi = ar_features(traj.inputs, traj.observations, t, cfg);
    Vector pred = ols_predict(state, phi);
    if (t >= cfg.ell - 1) ols_update(state, phi, traj.observations[t + 1]);
    return pred;
}

namespace {

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

void write_matrix(std::ostringstream& out, const char* name, const Matrix& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j)
            out << (j ? " " : "") << hex(m(i, j));
        out << '\n';
    }
}

Matrix read_matrix(std::istringstream& in, const std::string& name) {
    std::string tag;
    Index rows, cols;
    if (!(in >> tag >> rows >> cols) || tag != name)
        throw ConfigError("checkpoint: expected matrix " + name);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            std::string cell;
            if (!(in >> cell))
                throw ConfigError("checkpoint: truncated matrix " + name);
            m(i, j) = std::strtod(cell.c_str(), nullptr);
        }
    return m;
}

}  // namespace

std::string checkpoint(const OlsState& state) {
    std::ostringstream out;
    out << "ols-checkpoint 1\n";
    out << "mu " << hex(state.mu) << '\n';
    out << "t " << state.t << '\n';
    write_matrix(out, "sigma", state.sigma);
    write_matrix(out, "Y", state.Y);
    return out.str();
}

OlsState restore(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    int version;
    if (!(in >> tag >> version) || tag != "ols-checkpoint" || version != 1)
        throw ConfigError("checkpoint: bad header");
    OlsState s;
    std::string mu_hex;
    if (!(in >> tag >> mu_hex) || tag != "mu")
        throw ConfigError("checkpoint: missing mu");
    s.mu = std::strtod(mu_hex.c_str(), nullptr);
    if (s.mu <= 0.0)
        throw NonPositiveRegularizerError("checkpoint: mu must be positive");
    if (!(in >> tag >> s.t) || tag != "t")
        throw ConfigError("checkpoint: missing t");
    s.sigma = read_matrix(in, "sigma");
    s.Y = read_matrix(in, "Y");
    s.sigma_inv = linalg::invert_spd(s.sigma);
    s.A = s.Y * s.sigma_inv;
    s.updates_since_refresh = 0;
    return s;
}

}  // namespace mslds::predictors
