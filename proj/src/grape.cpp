#include "qoc/grape.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

// Shared sanity checks for a cache pair before gradient assembly.
int check_caches(const ForwardCache& fwd, const BackwardCache& bwd, const ControlSystem& system,
                 bool gate) {
    const int n = static_cast<int>(fwd.slice_unitaries.size());
    if (n == 0) throw CacheMismatch("gradient: empty forward cache");
    if (static_cast<int>(fwd.decompositions.size()) != n ||
        static_cast<int>(fwd.prefix.size()) != n + 1)
        throw CacheMismatch("gradient: forward cache arrays disagree on the slice count");
    if (!(fwd.dt > 0.0)) throw CacheMismatch("gradient: forward cache carries no slice width");
    if (fwd.prefix[0].dim() != system.dim())
        throw CacheMismatch("gradient: cache dimension does not match the system");
    if (gate) {
        if (static_cast<int>(bwd.back_targets.size()) != n + 1)
            throw CacheMismatch("gradient: gate gradient needs back-propagated targets");
    } else {
        if (static_cast<int>(fwd.states.size()) != n + 1 ||
            static_cast<int>(bwd.costates.size()) != n + 1)
            throw CacheMismatch("gradient: state gradient needs state/costate caches");
    }
    return n;
}

void clip_value(double& v, const std::optional<std::pair<double, double>>& box) {
    if (!box) return;
    v = std::clamp(v, box->first, box->second);
}

// Zero out gradient components that point outside an active amplitude box;
// what is left is the projected gradient whose norm drives the stopping rule.
double projected_max_abs(const PiecewisePulse& pulse, const GradientTable& grad,
                         const ControlSystem& system) {
    double worst = 0.0;
    for (int k = 0; k < grad.n_slices; ++k)
        for (int i = 0; i < grad.n_controls; ++i) {
            double g = grad.at(k, i);
            const auto& box = system.amplitude_limits.empty()
                                  ? std::optional<std::pair<double, double>>{}
                                  : system.amplitude_limits[i];
            if (box) {
                const double u = pulse.at(k, i);
                if (u <= box->first && g < 0.0) g = 0.0;
                if (u >= box->second && g > 0.0) g = 0.0;
            }
            worst = std::max(worst, std::abs(g));
        }
    return worst;
}

// Mixed-gauge sequential/hybrid sweep for state-transfer problems. Slices in
// [b, e) still hold their sweep-start values when the walk reaches them, so
// the sweep-start caches stay valid exactly where they are consulted.
PiecewisePulse sweep_state(const ControlSystem& system, const Objective& obj,
                           PiecewisePulse pulse, double eps, int block, bool first_order) {
    PwcCaches caches = evolve_pwc(system, pulse, obj.initial_state, obj.target_state);
    const auto& lam = caches.backward.costates;
    const int N = pulse.n_slices(), n = pulse.n_controls();
    const double dt = pulse.dt();

    StateVector rho = obj.initial_state;
    std::vector<double> u(n);
    for (int b = 0; b < N; b += block) {
        const int e = std::min(b + block, N);

        // Carrier through the block under the current (old) values.
        std::vector<StateVector> rho_in;
        rho_in.reserve(e - b + 1);
        rho_in.push_back(rho);
        for (int k = b; k < e; ++k)
            rho_in.push_back(caches.forward.slice_unitaries[k] * rho_in.back());
        const cplx z_old = inner(lam[e], rho_in.back());
        const double j_old = std::norm(z_old);

        // Gradient of the mixed overlap, block slices only.
        std::vector<double> g((e - b) * n);
        for (int k = b; k < e; ++k)
            for (int i = 0; i < n; ++i) {
                cplx dz;
                if (first_order) {
                    dz = cplx(0.0, -dt) *
                         inner(lam[k + 1], system.controls[i] * rho_in[k - b + 1]);
                } else {
                    ComplexMatrix dmat = expm_directional_derivative(
                        caches.forward.decompositions[k], system.controls[i], cplx(0.0, -dt));
                    dz = inner(lam[k + 1], dmat * rho_in[k - b]);
                }
                g[(k - b) * n + i] = 2.0 * (std::conj(z_old) * dz).real();
            }

        // Halve the step until the running overlap stops dropping.
        double step = eps;
        bool accepted = false;
        for (int h = 0; h < 40 && !accepted; ++h, step *= 0.5) {
            std::vector<double> cand((e - b) * n);
            StateVector r = rho;
            for (int k = b; k < e; ++k) {
                for (int i = 0; i < n; ++i) {
                    double v = pulse.at(k, i) + step * g[(k - b) * n + i];
                    if (!system.amplitude_limits.empty())
                        clip_value(v, system.amplitude_limits[i]);
                    cand[(k - b) * n + i] = v;
                    u[i] = v;
                }
                r = slice_propagator(system, u, dt).unitary * r;
            }
            if (std::norm(inner(lam[e], r)) >= j_old - 1e-15 * std::max(1.0, j_old)) {
                for (int k = b; k < e; ++k)
                    for (int i = 0; i < n; ++i) pulse.at(k, i) = cand[(k - b) * n + i];
                rho = r;
                accepted = true;
            }
        }
        if (!accepted) rho = rho_in.back();  // keep the old block
    }
    return pulse;
}

// Gate flavor of the same sweep; the carrier is the partial product and the
// overlap is the goal-frame trace.
PiecewisePulse sweep_gate(const ControlSystem& system, const Objective& obj,
                          PiecewisePulse pulse, double eps, int block, bool first_order) {
    PwcCaches caches = evolve_pwc(system, pulse, obj.target_unitary);
    const auto& back = caches.backward.back_targets;
    const int N = pulse.n_slices(), n = pulse.n_controls();
    const double dt = pulse.dt();

    ComplexMatrix x = ComplexMatrix::identity(system.dim());
    std::vector<double> u(n);
    for (int b = 0; b < N; b += block) {
        const int e = std::min(b + block, N);

        std::vector<ComplexMatrix> x_in;
        x_in.reserve(e - b + 1);
        x_in.push_back(x);
        for (int k = b; k < e; ++k)
            x_in.push_back(caches.forward.slice_unitaries[k] * x_in.back());
        const cplx w_old = trace_inner(back[e], x_in.back());
        const double j_old = std::norm(w_old);

        std::vector<double> g((e - b) * n);
        for (int k = b; k < e; ++k)
            for (int i = 0; i < n; ++i) {
                cplx dw;
                if (first_order) {
                    dw = cplx(0.0, -dt) *
                         trace_inner(back[k + 1], system.controls[i] * x_in[k - b + 1]);
                } else {
                    ComplexMatrix dmat = expm_directional_derivative(
                        caches.forward.decompositions[k], system.controls[i], cplx(0.0, -dt));
                    dw = trace_inner(back[k + 1], dmat * x_in[k - b]);
                }
                g[(k - b) * n + i] = 2.0 * (std::conj(w_old) * dw).real();
            }

        double step = eps;
        bool accepted = false;
        for (int h = 0; h < 40 && !accepted; ++h, step *= 0.5) {
            std::vector<double> cand((e - b) * n);
            ComplexMatrix r = x;
            for (int k = b; k < e; ++k) {
                for (int i = 0; i < n; ++i) {
                    double v = pulse.at(k, i) + step * g[(k - b) * n + i];
                    if (!system.amplitude_limits.empty())
                        clip_value(v, system.amplitude_limits[i]);
                    cand[(k - b) * n + i] = v;
                    u[i] = v;
                }
                r = slice_propagator(system, u, dt).unitary * r;
            }
            if (std::norm(trace_inner(back[e], r)) >= j_old - 1e-15 * std::max(1.0, j_old)) {
                for (int k = b; k < e; ++k)
                    for (int i = 0; i < n; ++i) pulse.at(k, i) = cand[(k - b) * n + i];
                x = r;
                accepted = true;
            }
        }
        if (!accepted) x = x_in.back();
    }
    return pulse;
}

void check_grape_objective(const ControlSystem& system, const Objective& objective) {
    objective.validate(system.dim());
    if (objective.kind != ObjectiveKind::StateOverlap &&
        objective.kind != ObjectiveKind::GateFidelity)
        throw ConfigError("grape handles StateOverlap and GateFidelity objectives only");
}

}  // namespace

double GradientTable::max_abs() const {
    double worst = 0.0;
    for (double v : values) worst = std::max(worst, std::abs(v));
    return worst;
}

GradientTable grape_state_gradient(const ForwardCache& fwd, const BackwardCache& bwd,
                                   const ControlSystem& system, bool first_order) {
    const int N = check_caches(fwd, bwd, system, false);
    const int n = static_cast<int>(system.controls.size());
    const double dt = fwd.dt;

    GradientTable table;
    table.n_slices = N;
    table.n_controls = n;
    table.values.assign(static_cast<size_t>(N) * n, 0.0);

    const cplx z = inner(bwd.costates[N], fwd.states[N]);
    table.overlap = z;
    table.objective = std::norm(z);

    for (int k = 0; k < N; ++k)
        for (int i = 0; i < n; ++i) {
            cplx dz;
            if (first_order) {
                dz = cplx(0.0, -dt) *
                     inner(bwd.costates[k + 1], system.controls[i] * fwd.states[k + 1]);
            } else {
                ComplexMatrix dmat = expm_directional_derivative(fwd.decompositions[k],
                                                                 system.controls[i],
                                                                 cplx(0.0, -dt));
                dz = inner(bwd.costates[k + 1], dmat * fwd.states[k]);
            }
            table.at(k, i) = 2.0 * (std::conj(z) * dz).real();
        }
    return table;
}

GradientTable grape_gate_gradient(const ForwardCache& fwd, const BackwardCache& bwd,
                                  const ControlSystem& system, bool first_order) {
    const int N = check_caches(fwd, bwd, system, true);
    const int n = static_cast<int>(system.controls.size());
    const double dt = fwd.dt;
    const double d2 = static_cast<double>(system.dim()) * system.dim();

    GradientTable table;
    table.n_slices = N;
    table.n_controls = n;
    table.values.assign(static_cast<size_t>(N) * n, 0.0);

    const cplx w = trace_inner(bwd.back_targets[N], fwd.prefix[N]);
    table.overlap = w;
    table.objective = std::norm(w) / d2;

    for (int k = 0; k < N; ++k)
        for (int i = 0; i < n; ++i) {
            cplx dw;
            if (first_order) {
                dw = cplx(0.0, -dt) *
                     trace_inner(bwd.back_targets[k + 1], system.controls[i] * fwd.prefix[k + 1]);
            } else {
                ComplexMatrix dmat = expm_directional_derivative(fwd.decompositions[k],
                                                                 system.controls[i],
                                                                 cplx(0.0, -dt));
                dw = trace_inner(bwd.back_targets[k + 1], dmat * fwd.prefix[k]);
            }
            table.at(k, i) = 2.0 * (std::conj(w) * dw).real() / d2;
        }
    return table;
}

PiecewisePulse update_step(const ControlSystem& system, const Objective& objective,
                           const PiecewisePulse& pulse, const GradientTable& grad,
                           UpdateScheme scheme, double eps, int hybrid_block) {
    if (!(eps > 0.0)) throw OutOfRange("update_step: eps must be positive");
    if (hybrid_block < 1) throw OutOfRange("update_step: block size must be >= 1");
    check_grape_objective(system, objective);

    if (scheme == UpdateScheme::Concurrent) {
        if (grad.n_slices != pulse.n_slices() || grad.n_controls != pulse.n_controls())
            throw CacheMismatch("update_step: gradient table does not match the pulse");
        PiecewisePulse next = pulse;
        for (int k = 0; k < pulse.n_slices(); ++k)
            for (int i = 0; i < pulse.n_controls(); ++i) next.at(k, i) += eps * grad.at(k, i);
        clip_to_limits(next, system);
        return next;
    }

    const int block = scheme == UpdateScheme::Sequential ? 1 : hybrid_block;
    if (objective.kind == ObjectiveKind::StateOverlap)
        return sweep_state(system, objective, pulse, eps, block, false);
    return sweep_gate(system, objective, pulse, eps, block, false);
}

GrapeResult grape_optimize(const ControlSystem& system, const PiecewisePulse& pulse0,
                           const Objective& objective, const GrapeOptions& opts) {
    system.validate();
    pulse0.validate();
    check_grape_objective(system, objective);
    if (!(opts.initial_step > 0.0)) throw OutOfRange("grape_optimize: initial_step must be > 0");
    if (opts.max_iterations < 0) throw OutOfRange("grape_optimize: max_iterations must be >= 0");
    if (opts.hybrid_block < 1) throw OutOfRange("grape_optimize: hybrid_block must be >= 1");
    if (!objective.penalties.empty() && opts.scheme != UpdateScheme::Concurrent)
        throw ConfigError("grape_optimize: penalties need the Concurrent scheme");

    const bool gate = objective.kind == ObjectiveKind::GateFidelity;

    // Maximized quantity: J minus the weighted penalties. The table returned
    // alongside is the gradient of that same quantity.
    auto evaluate = [&](const PiecewisePulse& p, GradientTable* table) -> double {
        PwcCaches caches = gate ? evolve_pwc(system, p, objective.target_unitary)
                                : evolve_pwc(system, p, objective.initial_state,
                                             objective.target_state);
        double value;
        if (table) {
            *table = gate ? grape_gate_gradient(caches.forward, caches.backward, system,
                                                opts.first_order)
                          : grape_state_gradient(caches.forward, caches.backward, system,
                                                 opts.first_order);
            value = table->objective;
        } else {
            value = gate ? std::norm(trace_inner(caches.backward.back_targets.back(),
                                                 caches.forward.prefix.back())) /
                               (static_cast<double>(system.dim()) * system.dim())
                         : std::norm(inner(caches.backward.costates.back(),
                                           caches.forward.states.back()));
        }
        for (const Penalty& pen : objective.penalties) {
            PenaltyValue pv = bandwidth_penalty(p, pen.weight);
            value -= pv.value;
            if (table)
                for (size_t j = 0; j < pv.gradient.size(); ++j)
                    table->values[j] -= pv.gradient[j];
        }
        return value;
    };

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&t_start] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t_start)
            .count();
    };

    GrapeResult result;
    result.pulse = pulse0;
    clip_to_limits(result.pulse, system);

    GradientTable table;
    double value = evaluate(result.pulse, &table);
    result.trace.push_back(value);
    result.gradient_trace.push_back(projected_max_abs(result.pulse, table, system));
    result.wall_ms_trace.push_back(elapsed_ms());

    double start_step = opts.initial_step;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (value >= opts.j_stop) {
            result.converged = true;
            result.reason = "objective threshold reached";
            break;
        }
        if (projected_max_abs(result.pulse, table, system) < opts.gradient_tolerance) {
            result.converged = true;
            result.reason = "gradient tolerance reached";
            break;
        }

        if (opts.scheme == UpdateScheme::Concurrent) {
            // Projected Armijo ascent: accept when the gain beats
            // c / step * ||clipped move||^2.
            double step = start_step;
            bool found = false;
            PiecewisePulse cand = result.pulse;
            double cand_value = value;
            for (int h = 0; h < 60; ++h, step *= 0.5) {
                cand = result.pulse;
                for (int k = 0; k < cand.n_slices(); ++k)
                    for (int i = 0; i < cand.n_controls(); ++i)
                        cand.at(k, i) += step * table.at(k, i);
                clip_to_limits(cand, system);
                double move2 = 0.0;
                for (size_t j = 0; j < cand.values().size(); ++j) {
                    const double dvj = cand.values()[j] - result.pulse.values()[j];
                    move2 += dvj * dvj;
                }
                if (move2 == 0.0) break;  // every component railed
                cand_value = evaluate(cand, nullptr);
                if (cand_value >= value + 1e-4 / step * move2) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                result.reason = "line search stalled";
                break;
            }
            result.pulse = cand;
            value = evaluate(result.pulse, &table);
            start_step = std::min(2.0 * step, 1e6);
        } else {
            const int block = opts.scheme == UpdateScheme::Sequential ? 1 : opts.hybrid_block;
            result.pulse = gate ? sweep_gate(system, objective, result.pulse, opts.initial_step,
                                             block, opts.first_order)
                                : sweep_state(system, objective, result.pulse, opts.initial_step,
                                              block, opts.first_order);
            value = evaluate(result.pulse, &table);
        }

        result.iterations = iter + 1;
        result.trace.push_back(value);
        result.gradient_trace.push_back(projected_max_abs(result.pulse, table, system));
        result.wall_ms_trace.push_back(elapsed_ms());
    }

    if (result.reason.empty() && !result.converged) result.reason = "iteration budget exhausted";
    result.objective = value;
    return result;
}

}  // namespace qoc
