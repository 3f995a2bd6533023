#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qoc/propagation.hpp"
#include "test_util.hpp"

using namespace qoc;
using qoc_test::max_abs_diff;
using qoc_test::unitarity_defect;

namespace {

ControlSystem qubit_system() {
    ControlSystem sys;
    sys.drift = 0.5 * pauli_z();
    sys.controls = {pauli_x(), pauli_y()};
    return sys;
}

ComplexMatrix lindblad_rhs_direct(const LindbladModel& model, const std::vector<double>& u,
                                  const ComplexMatrix& rho) {
    ComplexMatrix h = model.system.hamiltonian(u);
    ComplexMatrix out = cplx(0.0, -1.0) * commutator(h, rho);
    for (size_t k = 0; k < model.collapse.size(); ++k) {
        const ComplexMatrix& l = model.collapse[k];
        const ComplexMatrix ldl = l.adjoint() * l;
        ComplexMatrix jump = cplx(2.0, 0.0) * (l * rho * l.adjoint());
        jump -= ldl * rho;
        jump -= rho * ldl;
        out += cplx(model.rates[k], 0.0) * jump;
    }
    return out;
}

}  // namespace

TEST_CASE("slice propagator closed forms and unitarity") {
    ControlSystem sys;
    sys.drift = ComplexMatrix::zero(2);
    sys.controls = {pauli_x()};

    // Zero Hamiltonian freezes the evolution.
    CHECK(max_abs_diff(slice_propagator(sys, {0.0}, 0.9).unitary, ComplexMatrix::identity(2)) <
          1e-15);

    // u dt = pi/2 along sigma_x gives -i sigma_x.
    ComplexMatrix quarter = slice_propagator(sys, {M_PI / 2.0}, 1.0).unitary;
    CHECK(max_abs_diff(quarter, cplx(0.0, -1.0) * pauli_x()) < 1e-14);

    const double dt = 0.37, a = 1.3;
    ComplexMatrix u = slice_propagator(sys, {a}, dt).unitary;
    ComplexMatrix ref = ComplexMatrix::identity(2);
    ref *= std::cos(a * dt);
    ref += cplx(0.0, -std::sin(a * dt)) * pauli_x();
    CHECK(max_abs_diff(u, ref) < 1e-14);

    Rng rng(3);
    ControlSystem big;
    big.drift = random_hermitian(rng, 5);
    big.controls = {random_hermitian(rng, 5), random_hermitian(rng, 5)};
    for (int trial = 0; trial < 10; ++trial) {
        SlicePropagator sp =
            slice_propagator(big, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}, 0.21);
        CHECK(unitarity_defect(sp.unitary) < 1e-10);
    }
}

TEST_CASE("pwc propagation builds consistent prefix products") {
    ControlSystem sys = qubit_system();
    Rng rng(11);
    PiecewisePulse pulse(2, 8, 0.15);
    for (double& v : pulse.values()) v = rng.uniform(-1.0, 1.0);

    PwcEvolution evo = propagate_pwc(sys, pulse);
    REQUIRE(evo.slice_unitaries.size() == 8);
    REQUIRE(evo.prefix.size() == 9);
    CHECK(max_abs_diff(evo.prefix[0], ComplexMatrix::identity(2)) == 0.0);
    for (int k = 0; k < 8; ++k) {
        ComplexMatrix expect = evo.slice_unitaries[k] * evo.prefix[k];
        CHECK(max_abs_diff(evo.prefix[k + 1], expect) < 1e-14);
    }
    CHECK(unitarity_defect(evo.total()) < 1e-12);

    // Constant pulse: slices commute, so the product collapses to one expm.
    PiecewisePulse flat(2, 16, 0.1);
    for (int k = 0; k < 16; ++k) {
        flat.values()[2 * k] = 0.4;
        flat.values()[2 * k + 1] = -0.2;
    }
    ComplexMatrix direct = expm_hermitian(sys.hamiltonian({0.4, -0.2}), cplx(0.0, -1.6));
    CHECK(max_abs_diff(propagate_pwc(sys, flat).total(), direct) < 1e-12);

    PiecewisePulse wrong(1, 8, 0.15);
    CHECK_THROWS_AS(propagate_pwc(sys, wrong), DimMismatch);
}

TEST_CASE("forward/backward caches and the gauge identity") {
    ControlSystem sys = qubit_system();
    Rng rng(17);
    const int N = 40;
    PiecewisePulse pulse(2, N, 0.05);
    for (double& v : pulse.values()) v = rng.uniform(-1.5, 1.5);

    StateVector psi0 = random_state(rng, 2);
    StateVector psi1 = random_state(rng, 2);
    PwcCaches caches = evolve_pwc(sys, pulse, psi0, psi1);

    REQUIRE(caches.forward.states.size() == static_cast<size_t>(N + 1));
    REQUIRE(caches.backward.costates.size() == static_cast<size_t>(N + 1));
    REQUIRE(caches.forward.decompositions.size() == static_cast<size_t>(N));

    // <lam_m | rho_m> is the final overlap no matter where the cut sits.
    const cplx z = inner(caches.backward.costates[N], caches.forward.states[N]);
    for (int m = 0; m <= N; ++m) {
        const cplx zm = inner(caches.backward.costates[m], caches.forward.states[m]);
        CHECK(std::abs(zm - z) < 1e-9);
    }
    for (int m = 0; m <= N; ++m)
        CHECK(std::abs(norm(caches.forward.states[m]) - 1.0) < 1e-9);

    // Gate flavor: Tr(P_j^+ X_j) is equally gauge invariant.
    Rng rng2(18);
    ComplexMatrix target = random_unitary(rng2, 2);
    PwcCaches gate = evolve_pwc(sys, pulse, target);
    const cplx w = trace_inner(gate.backward.back_targets[N], gate.forward.prefix[N]);
    for (int j = 0; j <= N; ++j) {
        const cplx wj = trace_inner(gate.backward.back_targets[j], gate.forward.prefix[j]);
        CHECK(std::abs(wj - w) < 1e-9);
    }

    // One slice collapses to the bare slice propagator.
    PiecewisePulse single(2, 1, 0.3);
    single.values() = {0.7, -0.4};
    PwcCaches one = evolve_pwc(sys, single, psi0, psi1);
    CHECK(max_abs_diff(one.forward.prefix[1],
                       slice_propagator(sys, {0.7, -0.4}, 0.3).unitary) == 0.0);

    CHECK_THROWS_AS(evolve_pwc(sys, pulse, StateVector(3), psi1), DimMismatch);
    CHECK_THROWS_AS(evolve_pwc(sys, pulse, ComplexMatrix::identity(3)), DimMismatch);
}

TEST_CASE("pi pulse and long-chain norm preservation") {
    ControlSystem sys;
    sys.drift = ComplexMatrix::zero(2);
    sys.controls = {pauli_x()};

    // Constant u with u T = pi/2 flips |0> to |1> exactly; split over 100
    // slices nothing changes.
    const int N = 100;
    const double T = 1.0;
    PiecewisePulse pulse(1, N, T / N);
    for (double& v : pulse.values()) v = M_PI / 2.0;
    StateVector zero = {1.0, 0.0}, one = {0.0, 1.0};
    PwcCaches caches = evolve_pwc(sys, pulse, zero, one);
    const double p = std::norm(inner(one, caches.forward.states[N]));
    CHECK(std::abs(p - 1.0) < 1e-9);

    // 1000-slice random chain keeps the state normalized to 1e-9.
    Rng rng(29);
    ControlSystem sys2 = qubit_system();
    PiecewisePulse long_pulse(2, 1000, 0.01);
    for (double& v : long_pulse.values()) v = rng.uniform(-2.0, 2.0);
    PwcCaches chain = evolve_pwc(sys2, long_pulse, zero, one);
    CHECK(std::abs(norm(chain.forward.states[1000]) - 1.0) < 1e-9);
}

TEST_CASE("adaptive integrator reproduces linear flows both ways") {
    const cplx lambda(-0.3, 2.1);
    auto rhs = [&](double, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        dy = {lambda * y[0]};
    };
    std::vector<cplx> yT = integrate_rk45(rhs, {cplx(1.0, 0.5)}, 0.0, 3.0);
    const cplx exact = cplx(1.0, 0.5) * std::exp(lambda * 3.0);
    CHECK(std::abs(yT[0] - exact) < 1e-8 * std::abs(exact));

    // Run the flow backwards from the endpoint; it has to land on the start.
    std::vector<cplx> back = integrate_rk45(rhs, yT, 3.0, 0.0);
    CHECK(std::abs(back[0] - cplx(1.0, 0.5)) < 1e-8);

    // Zero-length interval is a no-op.
    std::vector<cplx> same = integrate_rk45(rhs, {cplx(2.0, 0.0)}, 1.0, 1.0);
    CHECK(same[0] == cplx(2.0, 0.0));
}

TEST_CASE("adaptive integrator failure modes") {
    // y' = -y / t pushed into the singularity at t = 0: the controller has to
    // shrink the step like t itself and eventually trips the floor.
    auto singular = [](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        dy = {-y[0] / t};
    };
    CHECK_THROWS_AS(integrate_rk45(singular, {cplx(1.0, 0.0)}, 1.0, 0.0), StepUnderflow);

    auto nan_rhs = [](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        dy = {t > 0.5 ? cplx(std::nan(""), 0.0) : y[0]};
    };
    CHECK_THROWS_AS(integrate_rk45(nan_rhs, {cplx(1.0, 0.0)}, 0.0, 1.0), NonFinite);

    auto wave = [](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        dy = {cplx(0.0, 40.0) * y[0] * std::cos(10.0 * t)};
    };
    OdeOptions tight;
    tight.max_steps = 5;
    CHECK_THROWS_AS(integrate_rk45(wave, {cplx(1.0, 0.0)}, 0.0, 100.0, tight),
                    ConvergenceFailure);
}

TEST_CASE("evolve_unitary agrees with expm and a fine pwc product") {
    // Constant Hamiltonian first.
    ComplexMatrix h0 = 0.7 * pauli_x() + 0.2 * pauli_z();
    ComplexMatrix u_ode = evolve_unitary([&](double) { return h0; }, 2, 2.0);
    CHECK(max_abs_diff(u_ode, expm_hermitian(h0, cplx(0.0, -2.0))) < 1e-8);

    // Rotating field against a midpoint-sampled product reference.
    auto h = [](double t) { return std::cos(t) * pauli_x() + std::sin(t) * pauli_y(); };
    const double T = 1.7;
    const int n = 10000;
    ComplexMatrix ref = ComplexMatrix::identity(2);
    for (int k = 0; k < n; ++k) {
        const double tm = T * (k + 0.5) / n;
        ref = expm_hermitian(h(tm), cplx(0.0, -T / n)) * ref;
    }
    ComplexMatrix u = evolve_unitary(h, 2, T);
    CHECK(unitarity_defect(u) < 1e-8);
    CHECK(max_abs_diff(u, ref) < 1e-6);
}

TEST_CASE("goat sensitivities match finite differences and closed forms") {
    ControlSystem sys;
    sys.drift = ComplexMatrix::zero(2);
    sys.controls = {pauli_x()};

    // Single DC Fourier term: u(t) = A, so U = exp(-i A T sx) and
    // dU/dA = -i T sx U.
    const double A = 0.8, T = 1.3;
    AnalyticPulse pulse(AnsatzKind::FourierSum, 1, 1, T);
    pulse.params() = {A, 0.0, 0.0};

    GoatEvolution evo = integrate_goat(sys, pulse, {0});
    CHECK(unitarity_defect(evo.u) < 1e-8);
    ComplexMatrix closed = expm_hermitian(pauli_x(), cplx(0.0, -A * T));
    CHECK(max_abs_diff(evo.u, closed) < 1e-8);
    ComplexMatrix dref = cplx(0.0, -T) * (pauli_x() * evo.u);
    CHECK(max_abs_diff(evo.du[0], dref) < 1e-7);

    // Central finite differences over the same parameter.
    const double h = 1e-5;
    AnalyticPulse up = pulse, dn = pulse;
    up.params()[0] += h;
    dn.params()[0] -= h;
    ComplexMatrix fd =
        (1.0 / (2.0 * h)) * (integrate_goat(sys, up, {0}).u - integrate_goat(sys, dn, {0}).u);
    CHECK(max_abs_diff(evo.du[0], fd) < 1e-6 * std::max(1.0, T));

    // Frequency parameter of a zero-amplitude term moves nothing.
    AnalyticPulse sleepy(AnsatzKind::FourierSum, 1, 1, T);
    sleepy.params() = {0.0, 1.7, 0.4};
    GoatEvolution still = integrate_goat(sys, sleepy, {1});
    CHECK(max_abs_diff(still.du[0], ComplexMatrix::zero(2)) < 1e-12);

    CHECK_THROWS_AS(integrate_goat(sys, pulse, {}), BadIndex);
    CHECK_THROWS_AS(integrate_goat(sys, pulse, {3}), BadIndex);
}

TEST_CASE("goat and pwc engines agree on a smooth pulse") {
    ControlSystem sys;
    sys.drift = 0.1 * pauli_z();
    sys.controls = {pauli_x()};

    AnalyticPulse pulse(AnsatzKind::FourierSum, 1, 2, 2.0);
    pulse.params() = {0.1, 0.5, 0.2, 0.05, 1.0, 1.1};

    GoatEvolution evo = integrate_goat(sys, pulse, {0});
    ComplexMatrix pwc = propagate_pwc(sys, sample_to_pwc(pulse, 2000)).total();
    CHECK(max_abs_diff(evo.u, pwc) < 1e-7);
}

TEST_CASE("vectorization obeys the kron identity") {
    Rng rng(23);
    ComplexMatrix a = random_hermitian(rng, 3), x = random_hermitian(rng, 3);
    ComplexMatrix b = random_unitary(rng, 3);

    CHECK(max_abs_diff(unvec_density(vec_density(x)), x) == 0.0);

    // vec(A X B) = kron(B^T, A) vec(X) under column stacking.
    std::vector<cplx> lhs = vec_density(a * x * b);
    ComplexMatrix bt = conj_elementwise(b.adjoint());
    std::vector<cplx> rhs = kron(bt, a) * vec_density(x);
    double worst = 0.0;
    for (size_t i = 0; i < lhs.size(); ++i) worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    CHECK(worst < 1e-12);

    ComplexMatrix u = random_unitary(rng, 2);
    ComplexMatrix rho = random_hermitian(rng, 2);
    ComplexMatrix via_channel = unvec_density(channel_from_unitary(u) * vec_density(rho));
    CHECK(max_abs_diff(via_channel, u * rho * u.adjoint()) < 1e-13);

    CHECK_THROWS_AS(unvec_density(std::vector<cplx>(5)), DimMismatch);
}

TEST_CASE("lindblad generator matches the direct master equation") {
    Rng rng(31);
    LindbladModel model;
    model.system.drift = random_hermitian(rng, 3);
    model.system.controls = {random_hermitian(rng, 3), random_hermitian(rng, 3)};
    model.collapse = {lowering_operator(3), random_unitary(rng, 3)};
    model.rates = {0.3, 0.05};
    model.validate();

    const std::vector<double> u = {0.4, -1.1};
    ComplexMatrix gen = model.generator(u);
    for (int trial = 0; trial < 5; ++trial) {
        ComplexMatrix rho = random_hermitian(rng, 3);
        ComplexMatrix via_gen = unvec_density(gen * vec_density(rho));
        CHECK(max_abs_diff(via_gen, lindblad_rhs_direct(model, u, rho)) < 1e-12);
    }
}

TEST_CASE("dephasing coherences decay at 4 gamma") {
    const double gamma = 0.35, omega = 1.2, T = 0.8;
    LindbladModel model;
    model.system.drift = 0.5 * omega * pauli_z();
    model.system.controls = {pauli_x()};
    model.collapse = {pauli_z()};
    model.rates = {gamma};

    ComplexMatrix rho0(2);
    rho0(0, 0) = 0.5;
    rho0(0, 1) = 0.5;
    rho0(1, 0) = 0.5;
    rho0(1, 1) = 0.5;

    PiecewisePulse off(1, 4, T / 4.0);
    ComplexMatrix rho = evolve_lindblad(model, off, rho0);

    CHECK(std::abs(rho.trace() - cplx(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(rho(0, 0) - cplx(0.5, 0.0)) < 1e-10);
    const cplx expected = 0.5 * std::exp(cplx(-4.0 * gamma * T, -omega * T));
    CHECK(std::abs(rho(0, 1) - expected) < 1e-9);
    CHECK(std::abs(rho(1, 0) - std::conj(expected)) < 1e-9);

    // Same decay read off the map: in the vec basis (r00, r10, r01, r11) pure
    // dephasing with H = 0 is diag(1, e^{-4 g t}, e^{-4 g t}, 1).
    LindbladModel bare = model;
    bare.system.drift = ComplexMatrix::zero(2);
    ComplexMatrix f = evolve_lindblad(bare, off);
    const double decay = std::exp(-4.0 * gamma * T);
    ComplexMatrix f_ref(4);
    f_ref(0, 0) = 1.0;
    f_ref(1, 1) = decay;
    f_ref(2, 2) = decay;
    f_ref(3, 3) = 1.0;
    CHECK(max_abs_diff(f, f_ref) < 1e-9);
}

TEST_CASE("amplitude damping empties the excited state at 2 gamma") {
    const double gamma = 0.4, T = 1.1;
    LindbladModel model;
    model.system.drift = ComplexMatrix::zero(2);
    model.system.controls = {pauli_x()};
    model.collapse = {lowering_operator(2)};
    model.rates = {gamma};

    ComplexMatrix rho0(2);
    rho0(0, 0) = 0.2;
    rho0(1, 1) = 0.8;
    rho0(0, 1) = cplx(0.1, 0.05);
    rho0(1, 0) = std::conj(rho0(0, 1));

    auto flat = [](double) { return std::vector<double>{0.0}; };
    ComplexMatrix rho = evolve_lindblad(model, flat, T, rho0);

    CHECK(std::abs(rho.trace() - cplx(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(rho(1, 1) - cplx(0.8 * std::exp(-2.0 * gamma * T), 0.0)) < 1e-9);
    CHECK(std::abs(rho(0, 1) - rho0(0, 1) * std::exp(-gamma * T)) < 1e-9);
}

TEST_CASE("lindblad map reduces to the unitary channel at zero rates") {
    LindbladModel model;
    model.system.drift = 0.5 * pauli_z();
    model.system.controls = {pauli_x()};
    model.collapse = {};
    model.rates = {};

    PiecewisePulse pulse(1, 6, 0.2);
    for (int k = 0; k < 6; ++k) pulse.values()[k] = 0.7;

    ComplexMatrix u = expm_hermitian(model.system.hamiltonian({0.7}), cplx(0.0, -1.2));
    ComplexMatrix f = evolve_lindblad(model, pulse);
    CHECK(max_abs_diff(f, channel_from_unitary(u)) < 1e-8);

    // Density variant agrees with conjugation.
    Rng rng(7);
    ComplexMatrix rho0 = random_hermitian(rng, 2);
    ComplexMatrix rho = evolve_lindblad(model, pulse, rho0);
    CHECK(max_abs_diff(rho, u * rho0 * u.adjoint()) < 1e-8);

    // H = 0, zero rates: the map is the identity.
    LindbladModel idle;
    idle.system.drift = ComplexMatrix::zero(2);
    idle.system.controls = {pauli_x()};
    PiecewisePulse off(1, 3, 0.4);
    CHECK(max_abs_diff(evolve_lindblad(idle, off), ComplexMatrix::identity(4)) < 1e-10);
}

TEST_CASE("lindblad map preserves trace, hermiticity, and positivity") {
    Rng rng(41);
    LindbladModel model;
    model.system.drift = random_hermitian(rng, 2);
    model.system.controls = {pauli_x()};
    model.collapse = {lowering_operator(2), pauli_z()};
    model.rates = {0.2, 0.15};

    PiecewisePulse pulse(1, 5, 0.3);
    for (double& v : pulse.values()) v = rng.uniform(-1.0, 1.0);
    ComplexMatrix f = evolve_lindblad(model, pulse);

    for (int trial = 0; trial < 5; ++trial) {
        // Random PSD density matrix with unit trace.
        ComplexMatrix m = random_hermitian(rng, 2);
        ComplexMatrix rho = m * m.adjoint();
        rho *= cplx(1.0, 0.0) / rho.trace();

        ComplexMatrix out = unvec_density(f * vec_density(rho));
        CHECK(std::abs(out.trace() - cplx(1.0, 0.0)) < 1e-8);
        CHECK(max_abs_diff(out, out.adjoint()) < 1e-9);
        HermitianDecomposition dec = hermitian_eig(0.5 * (out + out.adjoint()));
        for (double ev : dec.values) CHECK(ev >= -1e-8);
    }
}

TEST_CASE("open-system validation") {
    LindbladModel model;
    model.system.drift = 0.5 * pauli_z();
    model.system.controls = {pauli_x()};
    model.collapse = {pauli_z()};
    model.rates = {0.1};
    CHECK_NOTHROW(model.validate());

    LindbladModel bad = model;
    bad.system.drift(0, 1) = cplx(0.3, 0.1);
    CHECK_THROWS_AS(bad.validate(), NonHermitian);

    bad = model;
    bad.rates = {0.1, 0.2};
    CHECK_THROWS_AS(bad.validate(), DimMismatch);

    bad = model;
    bad.rates = {-0.1};
    CHECK_THROWS_AS(bad.validate(), OutOfRange);

    bad = model;
    bad.collapse = {lowering_operator(3)};
    CHECK_THROWS_AS(bad.validate(), DimMismatch);

    CHECK_THROWS_AS(model.generator({0.1, 0.2}), DimMismatch);
    PiecewisePulse two(2, 4, 0.1);
    CHECK_THROWS_AS(evolve_lindblad(model, two, ComplexMatrix::identity(2)), DimMismatch);
    PiecewisePulse one(1, 4, 0.1);
    CHECK_THROWS_AS(evolve_lindblad(model, one, ComplexMatrix::identity(3)), DimMismatch);
}
