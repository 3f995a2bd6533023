#pragma once

#include <vector>

#include "qoc/objectives.hpp"
#include "qoc/optimizers.hpp"
#include "qoc/propagation.hpp"

namespace qoc {

// Open-system gate optimization against the trace fidelity
//   phi = Re Tr(F_U^+ F(T)) / d^2,
// with F_U = channel_from_unitary(target). Gradients come from a forward
// joint ODE on the map and its parameter sensitivities,
//   Fdot = G(t) F,   dFdot_m = G(t) dF_m + dG_m(t) F,
// never from back-propagation, which is unstable for contractive generators.
// Under nonzero dissipation phi = 1 is unreachable; the optimizer simply
// reports the best value found.
struct OpenProblem {
    LindbladModel model;
    ComplexMatrix target_unitary;  // d x d, the map target is built from it

    // Pulse: the analytic ansatz by default; set `piecewise` to drive the
    // generator from the slice table instead (every slice value becomes a
    // parameter).
    bool piecewise = false;
    AnalyticPulse pulse;
    PiecewisePulse pwc;
    std::vector<int> free_params;  // analytic only; empty = all

    OdeOptions ode;
    LbfgsOptions optimizer;

    void validate() const;
    std::vector<int> effective_free() const;
    ComplexMatrix target_map() const;
};

struct OpenEval {
    double value = 0.0;  // 1 - phi
    std::vector<double> gradient;
    ComplexMatrix map;  // F(T), identical to evolve_lindblad's result
};

// Value only (cheap, integrates just the map).
double open_value(const OpenProblem& prob, const std::vector<double>& params);
// Value plus gradient with respect to `params`: the free raw ansatz
// parameters (analytic) or all slice values in slice-major order (piecewise).
OpenEval open_value_and_gradient(const OpenProblem& prob, const std::vector<double>& params);

struct OpenResult {
    AnalyticPulse pulse;   // analytic runs: optimized parameters written back
    PiecewisePulse pwc;    // piecewise runs: optimized slice table
    OptimizeResult run;
    double infidelity = 0.0;
};

// L-BFGS descent on 1 - phi from params0 (empty = the problem's current
// pulse parameters).
OpenResult open_optimize(const OpenProblem& prob, std::vector<double> params0 = {});

}  // namespace qoc
