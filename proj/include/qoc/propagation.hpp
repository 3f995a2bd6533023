#pragma once

#include <functional>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/pulse.hpp"

namespace qoc {

// One slice of a piecewise-constant schedule: U = exp(-i dt H(u)) together
// with the eigendecomposition of H(u), which gradient code reuses for exact
// exponential derivatives.
struct SlicePropagator {
    ComplexMatrix unitary;
    HermitianDecomposition decomposition;
};
SlicePropagator slice_propagator(const ControlSystem& system, const std::vector<double>& u,
                                 double dt);

// Slice unitaries U_k (k = 1..N) and running products X_k = U_k ... U_1 with
// X_0 = 1, so prefix[k] maps the initial state to the state after k slices.
struct PwcEvolution {
    std::vector<ComplexMatrix> slice_unitaries;
    std::vector<ComplexMatrix> prefix;
    const ComplexMatrix& total() const { return prefix.back(); }
};
PwcEvolution propagate_pwc(const ControlSystem& system, const PiecewisePulse& pulse);

// Everything the gradient sweep needs from the forward pass: slice unitaries
// with their Hamiltonian decompositions, partial products, and (for state
// transfer problems) the propagated states rho_m = X_m psi0.
struct ForwardCache {
    std::vector<ComplexMatrix> slice_unitaries;          // N
    std::vector<HermitianDecomposition> decompositions;  // N
    std::vector<ComplexMatrix> prefix;                   // N + 1
    std::vector<StateVector> states;                     // N + 1, state problems only
    double dt = 0.0;                                     // slice width of the source pulse
};

// Backward companions: costates lam_m = (U_N ... U_{m+1})^+ psi1 for state
// problems, back-propagated targets P_j = U_{j+1}^+ ... U_N^+ U_target for
// gate problems. The overlap <lam_m | rho_m> (resp. Tr(P_j^+ X_j)) is the
// same for every m; gradient code exploits that gauge freedom.
struct BackwardCache {
    std::vector<StateVector> costates;      // N + 1, state problems only
    std::vector<ComplexMatrix> back_targets;  // N + 1, gate problems only
};

struct PwcCaches {
    ForwardCache forward;
    BackwardCache backward;
};
PwcCaches evolve_pwc(const ControlSystem& system, const PiecewisePulse& pulse,
                     const StateVector& psi0, const StateVector& psi1);
PwcCaches evolve_pwc(const ControlSystem& system, const PiecewisePulse& pulse,
                     const ComplexMatrix& u_target);

// Adaptive Dormand-Prince 5(4) over complex state vectors. Integrates from t0
// to t1 in either direction.
struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-11;
    double initial_step = 0.0;  // 0 picks span / 100
    double min_step = 0.0;      // 0 picks 1e-14 * span
    long max_steps = 2000000;
};
using OdeRhs = std::function<void(double t, const std::vector<cplx>& y, std::vector<cplx>& dy)>;
std::vector<cplx> integrate_rk45(const OdeRhs& rhs, std::vector<cplx> y0, double t0, double t1,
                                 const OdeOptions& opts = {});

// Solve Ydot = -i H(t) Y from the identity.
using HamiltonianFn = std::function<ComplexMatrix(double)>;
ComplexMatrix evolve_unitary(const HamiltonianFn& hamiltonian, int dim, double horizon,
                             const OdeOptions& opts = {});

// Joint propagator / sensitivity integration for analytic pulses:
//   Udot      = -i H(t) U,                          U(0) = 1
//   dUdot_m   = -i (dH_m(t) U + H(t) dU_m),         dU_m(0) = 0
// where dH_m = sum_i (d u_i / d alpha_m) H_i includes the bounding chain
// rule. `param_subset` selects which raw parameters get sensitivities.
struct GoatEvolution {
    ComplexMatrix u;
    std::vector<ComplexMatrix> du;  // one per requested parameter
};
GoatEvolution integrate_goat(const ControlSystem& system, const AnalyticPulse& pulse,
                             const std::vector<int>& param_subset, const OdeOptions& opts = {});

// Column-stacking vectorization, vec(X)[c * d + r] = X(r, c), under which
// vec(A X B) = kron(B^T, A) vec(X).
std::vector<cplx> vec_density(const ComplexMatrix& x);
ComplexMatrix unvec_density(const std::vector<cplx>& v);

// Superoperator of the unitary channel rho -> U rho U^+, i.e. kron(conj U, U).
ComplexMatrix channel_from_unitary(const ComplexMatrix& u);

// Open system in GKSL form with the factor-2 jump convention,
//   rho_dot = -i [H(u), rho] + sum_k gamma_k (2 L_k rho L_k^+ - {L_k^+ L_k, rho}),
// H(u) = system.drift + sum_i u_i system.controls[i].
struct LindbladModel {
    ControlSystem system;
    std::vector<ComplexMatrix> collapse;
    std::vector<double> rates;

    int dim() const { return system.dim(); }
    void validate() const;
    // Full generator acting on vec(rho), a d^2 x d^2 matrix.
    ComplexMatrix generator(const std::vector<double>& u) const;
    // Rate-weighted jump part alone (no Hamiltonian commutator).
    ComplexMatrix dissipator() const;
};

// Quantum map F(T) of the schedule, acting on vectorized density matrices.
// The generator is constant within each slice, so the stepper restarts at
// slice boundaries and never integrates across a jump. Zero rates reduce to
// channel_from_unitary of the closed evolution.
ComplexMatrix evolve_lindblad(const LindbladModel& model, const PiecewisePulse& pulse,
                              const OdeOptions& opts = {});
// Density-matrix variants (piecewise and continuous-coefficient schedules).
ComplexMatrix evolve_lindblad(const LindbladModel& model, const PiecewisePulse& pulse,
                              const ComplexMatrix& rho0, const OdeOptions& opts = {});
ComplexMatrix evolve_lindblad(const LindbladModel& model,
                              const std::function<std::vector<double>(double)>& controls,
                              double horizon, const ComplexMatrix& rho0,
                              const OdeOptions& opts = {});

// Magnus expansion of the solution of Ydot = -i V(t) Y as
//   Y(t) = exp(-i (M_0 + M_1 + M_2 + ...)),
// with every M_n Hermitian:
//   M_0 = int_0^t V(s) ds,
//   M_1 = -(i/2) int_0^t ds1 int_0^s1 ds2 [V(s1), V(s2)],
//   M_2 = -(1/6) int over s3 < s2 < s1 of
//         ([V1, [V2, V3]] + [V3, [V2, V1]]).
// Input is V sampled on a uniform grid over [0, t] including both endpoints
// (whatever frame transformation produced those samples is the caller's
// business). Integrals use trapezoid quadrature; the nested ones reduce to
// forward and reverse running sums, so the cost is linear in the sample
// count.
struct MagnusTerms {
    ComplexMatrix m0, m1, m2;
};
MagnusTerms magnus_terms(const std::vector<ComplexMatrix>& samples, double t);

// exp(-i sum_{n <= order} M_n) with order in {0, 1, 2}.
ComplexMatrix magnus_propagator(const std::vector<ComplexMatrix>& samples, double t, int order);

// Uniform endpoint-inclusive sampling helper for the two functions above.
std::vector<ComplexMatrix> sample_hamiltonian(const HamiltonianFn& v, double t, int n_samples);

}  // namespace qoc
