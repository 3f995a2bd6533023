#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qoc/errors.hpp"

namespace qoc {

// Classical controlled dynamics xdot = f(x, u, t) with the Jacobians needed
// by the adjoint method. Jacobians are row-major: dfdx is n x n with entry
// (i, j) = df_i/dx_j, dfdu is n x p.
struct ClassicalSystem {
    int state_dim = 0;
    int control_dim = 0;
    std::function<void(const std::vector<double>& x, const std::vector<double>& u, double t,
                       std::vector<double>& dx)>
        f;
    std::function<void(const std::vector<double>& x, const std::vector<double>& u, double t,
                       std::vector<double>& jac)>
        dfdx;
    std::function<void(const std::vector<double>& x, const std::vector<double>& u, double t,
                       std::vector<double>& jac)>
        dfdu;
};

// Terminal cost J(x(T)) and its gradient with respect to x(T).
struct TerminalCost {
    std::function<double(const std::vector<double>&)> value;
    std::function<void(const std::vector<double>&, std::vector<double>&)> gradient;
};

// States sampled on the uniform grid t_j = j * T / n_slices, j = 0..n_slices.
struct ClassicalTrajectory {
    int n_slices = 0;
    int state_dim = 0;
    double horizon = 0.0;
    std::vector<double> states;  // (n_slices + 1) * state_dim, node-major

    double* node(int j) { return states.data() + static_cast<size_t>(j) * state_dim; }
    const double* node(int j) const { return states.data() + static_cast<size_t>(j) * state_dim; }
    std::vector<double> terminal() const {
        return std::vector<double>(node(n_slices), node(n_slices) + state_dim);
    }
};

// Controls are zero-order-hold: value u(j) acts on [t_j, t_{j+1}). Layout is
// slice-major, controls[j * control_dim + i].

// Fixed-step RK4 integration of the controlled dynamics.
ClassicalTrajectory rk4_forward(const ClassicalSystem& system, const std::vector<double>& x0,
                                const std::vector<double>& controls, int n_slices, double horizon);

// Backward RK4 integration of the adjoint equation
//   lambda_dot = -(df/dx)^T lambda,   lambda(T) = dJ/dx(T).
// States between grid nodes come from cubic Hermite interpolation of the
// forward trajectory, which preserves the integrator's order.
ClassicalTrajectory rk4_adjoint(const ClassicalSystem& system, const ClassicalTrajectory& traj,
                                const std::vector<double>& controls,
                                const std::vector<double>& terminal_gradient);

// Per-slice gradient of the control Hamiltonian, dH/du = lambda^T df/du,
// evaluated at interval midpoints (matching dJ/du(j) / dt to second order).
// Returns n_slices * control_dim values, slice-major.
std::vector<double> control_gradient(const ClassicalSystem& system,
                                     const ClassicalTrajectory& traj,
                                     const ClassicalTrajectory& adjoint,
                                     const std::vector<double>& controls);

struct PmpOptions {
    int max_iterations = 2000;
    double initial_step = 1.0;
    double gradient_tolerance = 1e-10;  // on max |dH/du|
    double cost_tolerance = 0.0;        // stop when J falls below (0 disables)
};

struct PmpResult {
    std::vector<double> controls;
    ClassicalTrajectory trajectory;
    std::vector<double> cost_trace;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

// First-order descent on the terminal cost using the adjoint gradient with
// Armijo backtracking on the step size.
PmpResult pmp_optimize(const ClassicalSystem& system, const TerminalCost& cost,
                       const std::vector<double>& x0, const std::vector<double>& controls0,
                       int n_slices, double horizon, const PmpOptions& opts = {});

// Controlled harmonic oscillator
//   xdot = v,  vdot = u - omega^2 x,
// with terminal cost J = omega^2 (x(T) - a)^2 + v(T)^2. The adjoint system is
//   l1_dot = omega^2 l2,  l2_dot = -l1,
//   l1(T) = 2 omega^2 (x(T) - a),  l2(T) = 2 v(T),
// and dH/du = l2. Under the constant guess u = omega^2 a the trajectory is
// x(t) = a (1 - cos(omega t)), the cost sits at omega^2 a^2 for every horizon,
// and the adjoint closes to l1 = -2 a omega^2 cos(omega t),
// l2 = 2 a omega sin(omega t).
struct ShoProblem {
    ClassicalSystem system;
    TerminalCost cost;
};
ShoProblem sho_problem(double omega, double a);

}  // namespace qoc
