#pragma once

#include <vector>

#include "qoc/objectives.hpp"
#include "qoc/optimizers.hpp"
#include "qoc/propagation.hpp"

namespace qoc {

// Analytic-ansatz gradient optimization: the pulse is described by a few
// physical parameters, U and its parameter sensitivities come from the joint
// forward ODE (integrate_goat), and an L-BFGS loop drives the raw parameters.
// Bounded parameters are squashed through their sine transforms inside the
// pulse, so no evaluated point can leave its box.
struct GoatProblem {
    ControlSystem system;
    AnalyticPulse pulse;      // ansatz shape, bounds, and default parameters
    Objective objective;      // ProjectiveSUInfidelity or StateOverlap
    std::vector<int> free_params;  // raw indices to optimize; empty = all
    OdeOptions ode;
    LbfgsOptions optimizer;

    void validate() const;
    std::vector<int> effective_free() const;  // free_params or the identity list
};

// g and dg/dalpha at the raw parameter vector `alpha` (one entry per free
// parameter, in free_params order).
//
// ProjectiveSUInfidelity: g = 1 - |Tr(U_goal^+ U)|/d with
//   dg_m = -Re[(w*/|w|) Tr(U_goal^+ dU_m)]/d,  w = Tr(U_goal^+ U).
// |Tr| is not differentiable at w = 0; the gradient there is defined as 0
// and `trace_zero` reports that the convention fired. StateOverlap uses the
// infidelity 1 - |<psi1|U|psi0>|^2, which is smooth everywhere.
struct GoatEval {
    double value = 0.0;
    std::vector<double> gradient;
    bool trace_zero = false;
};
GoatEval goat_value_and_gradient(const GoatProblem& prob, const std::vector<double>& alpha);

struct GoatResult {
    AnalyticPulse pulse;  // optimized raw parameters written back
    OptimizeResult run;
    double infidelity = 0.0;
    bool trace_zero_hit = false;  // any evaluation landed on Tr = 0
};

// L-BFGS descent on g from alpha0 (empty = start at the problem pulse's
// current parameters). Stops when g falls below
// prob.optimizer.value_tolerance, the gradient norm collapses, or the line
// search cannot improve.
GoatResult goat_optimize(const GoatProblem& prob, std::vector<double> alpha0 = {});

}  // namespace qoc
