#include "qoc/goat.hpp"

#include <cmath>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

void check_finite(const std::vector<double>& alpha) {
    for (double a : alpha)
        if (!std::isfinite(a)) throw NonFinite("goat: parameter vector contains NaN or Inf");
}

// The sine transform keeps bounded parameters inside their boxes by
// construction; this guards the invariant anyway so a regression in the
// transform cannot silently corrupt a run.
void check_boxes(const AnalyticPulse& pulse) {
    for (int j = 0; j < pulse.n_params(); ++j) {
        const auto& b = pulse.bound(j);
        if (!b) continue;
        const double v = pulse.effective_param(j);
        if (v < b->lo - 1e-12 || v > b->hi + 1e-12)
            throw OutOfRange("goat: bounded parameter escaped its box");
    }
}

}  // namespace

void GoatProblem::validate() const {
    system.validate();
    objective.validate(system.dim());
    if (objective.kind != ObjectiveKind::ProjectiveSUInfidelity &&
        objective.kind != ObjectiveKind::StateOverlap)
        throw ConfigError("goat handles ProjectiveSUInfidelity and StateOverlap objectives");
    if (pulse.n_controls() != static_cast<int>(system.controls.size()))
        throw DimMismatch("goat: pulse control count does not match the system");
    for (int idx : free_params)
        if (idx < 0 || idx >= pulse.n_params())
            throw BadIndex("goat: free parameter index out of range");
}

std::vector<int> GoatProblem::effective_free() const {
    if (!free_params.empty()) return free_params;
    std::vector<int> all(pulse.n_params());
    for (int j = 0; j < pulse.n_params(); ++j) all[j] = j;
    return all;
}

GoatEval goat_value_and_gradient(const GoatProblem& prob, const std::vector<double>& alpha) {
    prob.validate();
    check_finite(alpha);
    const std::vector<int> free = prob.effective_free();
    if (alpha.size() != free.size())
        throw DimMismatch("goat: parameter vector length does not match the free set");

    AnalyticPulse pulse = prob.pulse;
    for (size_t j = 0; j < free.size(); ++j) pulse.params()[free[j]] = alpha[j];
    check_boxes(pulse);

    GoatEvolution evo = integrate_goat(prob.system, pulse, free, prob.ode);
    const int d = prob.system.dim();

    GoatEval eval;
    eval.gradient.assign(free.size(), 0.0);

    if (prob.objective.kind == ObjectiveKind::ProjectiveSUInfidelity) {
        const cplx w = trace_inner(prob.objective.target_unitary, evo.u);
        const double mod = std::abs(w);
        eval.value = 1.0 - mod / d;
        if (mod <= 1e-14 * d) {
            eval.trace_zero = true;  // convention: gradient 0 on the |Tr| kink
        } else {
            const cplx phase = std::conj(w) / mod;
            for (size_t m = 0; m < free.size(); ++m)
                eval.gradient[m] =
                    -(phase * trace_inner(prob.objective.target_unitary, evo.du[m])).real() / d;
        }
    } else {
        const cplx z =
            inner(prob.objective.target_state, evo.u * prob.objective.initial_state);
        eval.value = 1.0 - std::norm(z);
        for (size_t m = 0; m < free.size(); ++m) {
            const cplx dz =
                inner(prob.objective.target_state, evo.du[m] * prob.objective.initial_state);
            eval.gradient[m] = -2.0 * (std::conj(z) * dz).real();
        }
    }
    return eval;
}

GoatResult goat_optimize(const GoatProblem& prob, std::vector<double> alpha0) {
    prob.validate();
    const std::vector<int> free = prob.effective_free();
    if (alpha0.empty()) {
        alpha0.reserve(free.size());
        for (int idx : free) alpha0.push_back(prob.pulse.params()[idx]);
    }

    GoatResult result;
    result.pulse = prob.pulse;

    GradFn fn = [&](const std::vector<double>& x, std::vector<double>& grad) {
        GoatEval eval = goat_value_and_gradient(prob, x);
        grad = eval.gradient;
        if (eval.trace_zero) result.trace_zero_hit = true;
        return eval.value;
    };

    result.run = lbfgs_minimize(fn, std::move(alpha0), prob.optimizer);
    for (size_t j = 0; j < free.size(); ++j)
        result.pulse.params()[free[j]] = result.run.x[j];
    result.infidelity = result.run.value;
    return result;
}

}  // namespace qoc
