#include "qoc/objectives.hpp"

#include <cmath>
#include <complex>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

constexpr int kPhaseGridPoints = 720;  // 0.5 degree resolution

void check_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    if (a.dim() != b.dim())
        throw DimMismatch(std::string(what) + ": operand dimensions disagree");
}

}  // namespace

void Objective::validate(int dim) const {
    for (const Penalty& p : penalties)
        if (!(p.weight >= 0.0))
            throw OutOfRange("Objective: penalty weights must be >= 0");

    switch (kind) {
        case ObjectiveKind::StateOverlap:
            if (static_cast<int>(initial_state.size()) != dim ||
                static_cast<int>(target_state.size()) != dim)
                throw DimMismatch("Objective: state targets do not match the system dimension");
            break;
        case ObjectiveKind::GateFidelity:
        case ObjectiveKind::ProjectiveSUInfidelity:
        case ObjectiveKind::WorstCaseQ:
            if (target_unitary.dim() != dim)
                throw DimMismatch("Objective: unitary target does not match the system dimension");
            if (kind == ObjectiveKind::WorstCaseQ && worst_case_q < 1)
                throw OutOfRange("Objective: worst-case exponent q must be >= 1");
            break;
        case ObjectiveKind::OpenTraceFidelity:
            if (target_map.dim() != dim * dim)
                throw DimMismatch("Objective: map target must be d^2 x d^2");
            break;
    }
}

double state_overlap(const StateVector& psi1, const ComplexMatrix& u, const StateVector& psi0) {
    if (static_cast<int>(psi0.size()) != u.dim() || static_cast<int>(psi1.size()) != u.dim())
        throw DimMismatch("state_overlap: state dimensions do not match the propagator");
    return std::norm(inner(psi1, u * psi0));
}

double gate_fidelity(const ComplexMatrix& u_target, const ComplexMatrix& u) {
    check_same_dim(u_target, u, "gate_fidelity");
    const double d = static_cast<double>(u.dim());
    return std::norm(trace_inner(u_target, u)) / (d * d);
}

double projective_su_infidelity(const ComplexMatrix& u_goal, const ComplexMatrix& u) {
    check_same_dim(u_goal, u, "projective_su_infidelity");
    const double d = static_cast<double>(u.dim());
    return 1.0 - std::abs(trace_inner(u_goal, u)) / d;
}

double worst_case_index_q(const ComplexMatrix& u_target, const ComplexMatrix& u, int q) {
    check_same_dim(u_target, u, "worst_case_index_q");
    if (q < 1) throw OutOfRange("worst_case_index_q: q must be >= 1");

    const int d = u.dim();
    double worst = 0.0;
    for (int k = 0; k < kPhaseGridPoints; ++k) {
        const double alpha = 2.0 * M_PI * k / kPhaseGridPoints;
        ComplexMatrix a = u_target;
        a -= std::exp(cplx(0.0, alpha)) * u;
        // Tr[(A^+A)^q] = sum_i sigma_i^(2q) through the eigenvalues of the
        // positive matrix A^+A; stable for any q.
        HermitianDecomposition dec = hermitian_eig(a.adjoint() * a);
        double tr = 0.0;
        for (int i = 0; i < d; ++i)
            tr += std::pow(std::max(dec.values[i], 0.0), static_cast<double>(q));
        worst = std::max(worst, tr);
    }
    return worst;
}

double open_trace_fidelity(const ComplexMatrix& f_target, const ComplexMatrix& f) {
    check_same_dim(f_target, f, "open_trace_fidelity");
    return trace_inner(f_target, f).real() / static_cast<double>(f.dim());
}

double composite_value(const Objective& objective, double infidelity,
                       const PiecewisePulse& pulse) {
    double total = infidelity;
    for (const Penalty& p : objective.penalties) {
        if (!(p.weight >= 0.0))
            throw OutOfRange("composite_value: penalty weights must be >= 0");
        switch (p.kind) {
            case PenaltyKind::Bandwidth:
                total += bandwidth_penalty(pulse, p.weight).value;
                break;
        }
    }
    return total;
}

}  // namespace qoc
