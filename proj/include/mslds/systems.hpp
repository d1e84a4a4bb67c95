#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mslds/types.hpp"

namespace mslds::systems {

struct JordanBlock {
    double magnitude = 1.0;  // eigenvalue magnitude, in [0, 1]
    double phase = 0.0;      // radians in [0, 2*pi)
    int size = 1;            // Jordan block order r
};

struct JordanSpec {
    std::vector<JordanBlock> blocks;
    double condition = 1.0;  // target ||S|| ||S^{-1}||, >= 1
    std::uint64_t seed = 0;

    /// Real state dimension: r for phase in {0, pi}, 2r otherwise.
    Index state_dim() const;
    /// Largest block order.
    int max_block_size() const;
};

enum class NoiseKind {
    gaussian,
    bounded_uniform_ball,
    bounded_rademacher_axes,
    adversarial_least_explored,
    file,
};

struct NoiseConfig {
    NoiseKind kind = NoiseKind::gaussian;
    Matrix sigma_x;   // gaussian process-noise covariance
    Matrix sigma_y;   // gaussian observation-noise covariance
    double c_xi = 1.0;  // bound for the bounded/adversarial kinds
    std::string file_path;
    std::uint64_t seed = 0;
};

struct Bounds {
    double c0 = 1.0;   // initial state
    double cu = 0.0;   // inputs
    double cxi = 1.0;  // process noise
    double ceta = 0.0; // observation noise
    double cb = 0.0;   // ||B||_2
    double cc = 1.0;   // ||C||_2
};

struct SystemSpec {
    Matrix A;
    Matrix B;
    std::optional<Matrix> C;
    Vector x0;
    NoiseConfig noise;
    Bounds bounds;
    int r = 1;          // max Jordan block order
    double c_a = 1.0;   // similarity conditioning bound
};

struct Trajectory {
    std::vector<Vector> states;         // x_0..x_T
    std::vector<Vector> inputs;         // u_0..u_{T-1}
    std::vector<Vector> observations;   // y_0..y_T (partial runs only)
    std::vector<Vector> process_noise;  // xi_1..xi_T
    std::vector<Vector> obs_noise;      // eta_0..eta_T (partial runs only)

    std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
    double max_state_norm() const;
};

using InputPolicy = std::function<Vector(std::size_t t)>;

InputPolicy zero_inputs(Index dim);
InputPolicy bounded_random_inputs(Index dim, double cu, std::uint64_t seed);

/// Builds A = S J S^{-1} from the block description, with complex pairs
/// realized as real 2x2 rotation-scale cells, and seeded B (scaled to cb)
/// and C (scaled to cc, when obs_dim > 0).
SystemSpec build_jordan_system(const JordanSpec& spec, Index input_dim,
                               Index obs_dim, const Bounds& bounds,
                               const NoiseConfig& noise);

/// Fully observed simulation of x_t = A x_{t-1} + B u_{t-1} + xi_t.
/// Deterministic given (sys, inputs, T, seed).
Trajectory simulate_full(const SystemSpec& sys, const InputPolicy& inputs,
                         std::size_t T, std::uint64_t seed);

/// Partially observed simulation; requires sys.C and gaussian noise.
/// x_0 ~ N(sys.x0, Sigma_0) with Sigma_0 the steady-state predictive
/// covariance from the Riccati fixed point.
Trajectory simulate_partial(const SystemSpec& sys, std::size_t T,
                            std::uint64_t seed);

/// Worst-case bounded disturbance: c_xi times the least-explored direction
/// of the Gram matrix, oriented to grow the current state.
Vector adversarial_noise_step(const Matrix& gram, const Vector& state,
                              double c_xi);

struct RegressionPair {
    double x;
    double y;
};

/// The scalar lower-bound instance: silent until the last step, then a
/// single revealing pair (T, sign * T).
std::vector<RegressionPair> counterexample_instance(std::size_t T, int sign);

/// (T+1)^{r-1} C_A C_0 + C_A C_B C_u T^r + C_A C_xi T^r.
double state_growth_bound(const SystemSpec& sys, std::size_t T);

/// Reads a noise file: CSV with header "t,xi_1..xi_d", one row per step.
std::vector<Vector> read_noise_csv(const std::string& path, Index dim,
                                   std::size_t T);

/// JSON round-trip for SystemSpec (matrices as nested arrays).
std::string to_json(const SystemSpec& sys);
SystemSpec system_from_json(const std::string& text);

}  // namespace mslds::systems
