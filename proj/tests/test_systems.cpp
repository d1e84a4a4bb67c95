#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mslds/linalg.hpp"
#include "mslds/systems.hpp"

using namespace mslds;
using namespace mslds::systems;

namespace {

SystemSpec scalar_unit_system(double a, double x0, double c0 = 1.0) {
    SystemSpec sys;
    sys.A = Matrix::Constant(1, 1, a);
    sys.B = Matrix(1, 0);
    sys.x0 = Vector::Constant(1, x0);
    sys.noise.kind = NoiseKind::gaussian;
    sys.noise.sigma_x = Matrix::Zero(1, 1);
    sys.bounds.c0 = c0;
    return sys;
}

}  // namespace

TEST_CASE("canonical Jordan block with trivial similarity") {
    JordanSpec spec;
    spec.blocks = {{1.0, 0.0, 2}};
    spec.condition = 1.0;
    auto sys = build_jordan_system(spec, 0, 0, Bounds{}, NoiseConfig{});
    Matrix expected(2, 2);
    expected << 1, 1, 0, 1;
    CHECK((sys.A - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.r == 2);
}

TEST_CASE("phase pi/4 block is a rotation") {
    JordanSpec spec;
    spec.blocks = {{1.0, M_PI / 4.0, 1}};
    spec.condition = 1.0;
    auto sys = build_jordan_system(spec, 0, 0, Bounds{}, NoiseConfig{});
    double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
    Matrix expected(2, 2);
    expected << c, -s, s, c;
    CHECK((sys.A - expected).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(linalg::spectral_radius_estimate(sys.A, 256) ==
          doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("condition target is hit within 5 percent") {
    JordanSpec spec;
    spec.blocks = {{0.9, 0.3, 1}, {1.0, 0.0, 1}};
    spec.condition = 10.0;
    spec.seed = 5;
    auto sys = build_jordan_system(spec, 0, 0, Bounds{}, NoiseConfig{});
    CHECK(sys.c_a == 10.0);
    // reconstruct the measured conditioning via the declared invariant
    CHECK(linalg::spectral_radius_estimate(sys.A, 1 << 20) <= 1.0 + 1e-5);
    // ||A|| <= C_A for a rho<=1 diagonalizable system
    CHECK(linalg::operator_norm(sys.A) <= 10.5);
}

TEST_CASE("B and C are scaled to the declared norms") {
    JordanSpec spec;
    spec.blocks = {{1.0, 0.5, 1}};
    spec.seed = 9;
    Bounds bounds;
    bounds.cb = 0.7;
    bounds.cc = 1.3;
    auto sys = build_jordan_system(spec, 2, 1, bounds, NoiseConfig{});
    CHECK(linalg::operator_norm(sys.B) == doctest::Approx(0.7).epsilon(1e-8));
    REQUIRE(sys.C.has_value());
    CHECK(linalg::operator_norm(*sys.C) == doctest::Approx(1.3).epsilon(1e-8));
    CHECK(sys.x0.norm() == doctest::Approx(bounds.c0).epsilon(1e-12));
}

TEST_CASE("noiseless fixed point, shear, and decay") {
    auto fixed = scalar_unit_system(1.0, 1.0);
    auto traj = simulate_full(fixed, zero_inputs(0), 50, 0);
    for (const auto& x : traj.states) CHECK(x[0] == 1.0);

    SystemSpec shear;
    shear.A = Matrix(2, 2);
    shear.A << 1, 1, 0, 1;
    shear.B = Matrix(2, 0);
    shear.x0 = Vector(2);
    shear.x0 << 0, 1;
    shear.noise.kind = NoiseKind::gaussian;
    shear.noise.sigma_x = Matrix::Zero(2, 2);
    auto ts = simulate_full(shear, zero_inputs(0), 20, 0);
    for (std::size_t t = 0; t <= 20; ++t) {
        CHECK(ts.states[t][0] == static_cast<double>(t));
        CHECK(ts.states[t][1] == 1.0);
    }

    auto decay = scalar_unit_system(0.5, 1.0);
    auto td = simulate_full(decay, zero_inputs(0), 10, 0);
    for (std::size_t t = 0; t <= 10; ++t)
        CHECK(td.states[t][0] == doctest::Approx(std::pow(2.0, -double(t))));
}

TEST_CASE("stored recurrence residual is exactly zero") {
    JordanSpec spec;
    spec.blocks = {{1.0, 0.7, 1}};
    spec.seed = 3;
    Bounds bounds;
    bounds.cb = 0.5;
    bounds.cu = 1.0;
    NoiseConfig noise;
    noise.kind = NoiseKind::bounded_uniform_ball;
    noise.c_xi = 0.3;
    auto sys = build_jordan_system(spec, 1, 0, bounds, noise);
    auto traj = simulate_full(sys, bounded_random_inputs(1, 1.0, 4), 100, 4);
    for (std::size_t t = 1; t <= 100; ++t) {
        // same evaluation order as the simulator, so equality is bitwise
        Vector drift = sys.A * traj.states[t - 1];
        drift += sys.B * traj.inputs[t - 1];
        Vector recon = drift + traj.process_noise[t - 1];
        CHECK((traj.states[t] - recon).cwiseAbs().maxCoeff() == 0.0);
        CHECK(traj.process_noise[t - 1].norm() <= noise.c_xi + 1e-12);
    }
}

TEST_CASE("determinism of simulation") {
    JordanSpec spec;
    spec.blocks = {{1.0, 0.2, 1}};
    spec.seed = 12;
    NoiseConfig noise;
    noise.kind = NoiseKind::bounded_rademacher_axes;
    noise.c_xi = 0.5;
    auto sys = build_jordan_system(spec, 0, 0, Bounds{}, noise);
    auto a = simulate_full(sys, zero_inputs(0), 64, 99);
    auto b = simulate_full(sys, zero_inputs(0), 64, 99);
    for (std::size_t t = 0; t < a.states.size(); ++t)
        CHECK((a.states[t] - b.states[t]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adversarial_noise_step picks the least explored direction") {
    Matrix gram = Matrix::Zero(2, 2);
    gram(0, 0) = 10.0;
    gram(1, 1) = 1.0;
    Vector state(2);
    state << 0, 1;
    Vector xi = systems::adversarial_noise_step(gram, state, 2.5);
    CHECK(xi[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(xi[1] == doctest::Approx(2.5).epsilon(1e-12));

    Vector e1(2);
    e1 << 1, 0;
    Vector tie = systems::adversarial_noise_step(Matrix::Identity(2, 2), e1, 1.0);
    CHECK(tie[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tie[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tie.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("counterexample instance shape") {
    auto seq = counterexample_instance(10, 1);
    REQUIRE(seq.size() == 10);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
        CHECK(seq[t].x == 0.0);
        CHECK(seq[t].y == 0.0);
    }
    CHECK(seq.back().x == 10.0);
    CHECK(seq.back().y == 10.0);

    auto one = counterexample_instance(1, -1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].x == 1.0);
    CHECK(one[0].y == -1.0);
}

TEST_CASE("state growth bound formula and simulation check") {
    auto sys = scalar_unit_system(1.0, 1.0);
    sys.bounds.cxi = 1.0;
    CHECK(state_growth_bound(sys, 100) == doctest::Approx(101.0).epsilon(1e-12));
    CHECK(state_growth_bound(sys, 0) == doctest::Approx(1.0).epsilon(1e-12));

    JordanSpec spec;
    spec.blocks = {{1.0, 0.0, 2}};
    spec.seed = 8;
    NoiseConfig noise;
    noise.kind = NoiseKind::bounded_uniform_ball;
    noise.c_xi = 1.0;
    Bounds bounds;
    bounds.cxi = 1.0;
    auto jsys = build_jordan_system(spec, 0, 0, bounds, noise);
    auto traj = simulate_full(jsys, zero_inputs(0), 200, 17);
    CHECK(traj.max_state_norm() <= state_growth_bound(jsys, 200));
}

TEST_CASE("partial simulation requires C and records observations") {
    auto sys = scalar_unit_system(1.0, 0.0);
    CHECK_THROWS_AS(simulate_partial(sys, 10, 0), RequiresObservationMatrixError);

    sys.C = Matrix::Identity(1, 1);
    sys.noise.sigma_x = Matrix::Identity(1, 1);
    sys.noise.sigma_y = Matrix::Identity(1, 1);
    auto traj = simulate_partial(sys, 200, 5);
    CHECK(traj.observations.size() == 201);
    CHECK(traj.obs_noise.size() == 201);
    for (std::size_t t = 0; t <= 200; ++t)
        CHECK(traj.observations[t][0] ==
              traj.states[t][0] + traj.obs_noise[t][0]);
}

TEST_CASE("noise file round trip") {
    const char* path = "noise_roundtrip.csv";
    {
        std::ofstream out(path);
        out << "t,xi_1,xi_2\n";
        for (int t = 1; t <= 5; ++t)
            out << t << ',' << 0.1 * t << ',' << -0.2 * t << '\n';
    }
    auto rows = read_noise_csv(path, 2, 5);
    REQUIRE(rows.size() == 5);
    CHECK(rows[2][0] == doctest::Approx(0.3));
    CHECK(rows[2][1] == doctest::Approx(-0.6));
    CHECK_THROWS_AS(read_noise_csv("missing_file.csv", 2, 5),
                    NoiseFileMissingError);
    std::remove(path);
}

TEST_CASE("system JSON round trip") {
    JordanSpec spec;
    spec.blocks = {{1.0, 0.4, 1}};
    spec.seed = 2;
    Bounds bounds;
    bounds.cb = 0.5;
    NoiseConfig noise;
    noise.kind = NoiseKind::gaussian;
    noise.sigma_x = 0.5 * Matrix::Identity(2, 2);
    auto sys = build_jordan_system(spec, 1, 2, bounds, noise);
    auto back = system_from_json(to_json(sys));
    CHECK((back.A - sys.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.B - sys.B).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.C.has_value());
    CHECK((*back.C - *sys.C).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.noise.sigma_x - sys.noise.sigma_x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.r == sys.r);
    CHECK(back.c_a == sys.c_a);
}
