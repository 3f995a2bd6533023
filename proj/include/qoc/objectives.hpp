#pragma once

#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/pulse.hpp"

namespace qoc {

// Performance indices. Everything |Tr|-shaped is normalized by d or d^2 so
// optimizer traces are comparable across dimensions; multiply back by the
// dimension factor to recover the raw trace if you need it.

enum class ObjectiveKind {
    StateOverlap,
    GateFidelity,
    ProjectiveSUInfidelity,
    WorstCaseQ,
    OpenTraceFidelity,
};

enum class PenaltyKind {
    Bandwidth,  // forward-difference slew penalty from the pulse module
};

struct Penalty {
    PenaltyKind kind = PenaltyKind::Bandwidth;
    double weight = 0.0;
};

// Bundles a target with optional penalty terms. Only the fields relevant to
// `kind` are consulted: states for StateOverlap, target_unitary for the gate
// flavors, target_map for OpenTraceFidelity.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::StateOverlap;
    StateVector initial_state;
    StateVector target_state;
    ComplexMatrix target_unitary;
    ComplexMatrix target_map;
    int worst_case_q = 1;
    std::vector<Penalty> penalties;

    // dim is the Hilbert-space dimension of the system the objective will be
    // evaluated against.
    void validate(int dim) const;
};

// J = |<psi1| U |psi0>|^2. States are assumed unit-norm.
double state_overlap(const StateVector& psi1, const ComplexMatrix& u, const StateVector& psi0);

// Phi = |Tr(U_target^+ U)|^2 / d^2. Equals 1 exactly when U matches the
// target up to a global phase.
double gate_fidelity(const ComplexMatrix& u_target, const ComplexMatrix& u);

// g = 1 - |Tr(U_goal^+ U)| / d, the phase-projected distance on SU(d). Near
// the target 1 - Phi ~ 2 g.
double projective_su_infidelity(const ComplexMatrix& u_goal, const ComplexMatrix& u);

// J_q = max_alpha Tr[(A^+ A)^q] with A = U_target - e^{i alpha} U, the
// maximum taken over a 720-point uniform grid on [0, 2pi). Larger q weights
// the worst singular values more strongly. q must be >= 1.
//
// Exact global-phase invariance holds only for phases that are multiples of
// the grid spacing; arbitrary phases move the value by O(grid step^2).
double worst_case_index_q(const ComplexMatrix& u_target, const ComplexMatrix& u, int q);

// phi = Re Tr(F_target^+ F) / F.dim() for d^2 x d^2 superoperator maps. The
// normalization puts unitary targets at phi = 1; under nonzero dissipation
// the reachable maximum sits strictly below that.
double open_trace_fidelity(const ComplexMatrix& f_target, const ComplexMatrix& f);

// infidelity + sum of weighted penalties evaluated on the pulse. This is the
// scalar the optimizers minimize.
double composite_value(const Objective& objective, double infidelity,
                       const PiecewisePulse& pulse);

}  // namespace qoc
