#include "qoc/classical.hpp"

#include <algorithm>
#include <cmath>

#include "qoc/optimizers.hpp"

namespace qoc {

namespace {

void check_problem(const ClassicalSystem& system, const std::vector<double>& x0,
                   const std::vector<double>& controls, int n_slices, double horizon) {
    if (system.state_dim <= 0 || system.control_dim <= 0)
        throw DimMismatch("classical system dimensions must be positive");
    if (n_slices < 1) throw BadGrid("classical grid needs at least one slice");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw BadGrid("classical horizon must be positive and finite");
    if (static_cast<int>(x0.size()) != system.state_dim)
        throw DimMismatch("initial state length does not match state dimension");
    if (controls.size() != static_cast<size_t>(n_slices) * system.control_dim)
        throw DimMismatch("control table length does not match grid");
    for (double u : controls)
        if (!std::isfinite(u)) throw NonFinite("control table contains a non-finite value");
}

bool all_finite(const double* v, int n) {
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

// One classic RK4 step of xdot = f(x, u, t) from t with step h (h may be
// negative for backward integration). rhs(x, t, out) captures the control.
template <typename Rhs>
void rk4_step(const Rhs& rhs, std::vector<double>& x, double t, double h,
              std::vector<double>& k1, std::vector<double>& k2, std::vector<double>& k3,
              std::vector<double>& k4, std::vector<double>& work) {
    const int n = static_cast<int>(x.size());
    rhs(x, t, k1);
    for (int i = 0; i < n; ++i) work[i] = x[i] + 0.5 * h * k1[i];
    rhs(work, t + 0.5 * h, k2);
    for (int i = 0; i < n; ++i) work[i] = x[i] + 0.5 * h * k2[i];
    rhs(work, t + 0.5 * h, k3);
    for (int i = 0; i < n; ++i) work[i] = x[i] + h * k3[i];
    rhs(work, t + h, k4);
    for (int i = 0; i < n; ++i) x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Cubic Hermite value at fraction s in [0, 1] of the interval [t_j, t_j + h],
// from endpoint values and endpoint slopes.
void hermite_eval(const double* xa, const double* ma, const double* xb, const double* mb,
                  double h, double s, int n, std::vector<double>& out) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double ca = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double cma = (s3 - 2.0 * s2 + s) * h;
    const double cb = -2.0 * s3 + 3.0 * s2;
    const double cmb = (s3 - s2) * h;
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = ca * xa[i] + cma * ma[i] + cb * xb[i] + cmb * mb[i];
}

}  // namespace

ClassicalTrajectory rk4_forward(const ClassicalSystem& system, const std::vector<double>& x0,
                                const std::vector<double>& controls, int n_slices,
                                double horizon) {
    check_problem(system, x0, controls, n_slices, horizon);
    const int n = system.state_dim;
    const double dt = horizon / n_slices;

    ClassicalTrajectory traj;
    traj.n_slices = n_slices;
    traj.state_dim = n;
    traj.horizon = horizon;
    traj.states.resize(static_cast<size_t>(n_slices + 1) * n);
    std::copy(x0.begin(), x0.end(), traj.node(0));

    std::vector<double> x(x0), k1(n), k2(n), k3(n), k4(n), work(n);
    std::vector<double> u(system.control_dim);
    for (int j = 0; j < n_slices; ++j) {
        const double* uj = controls.data() + static_cast<size_t>(j) * system.control_dim;
        u.assign(uj, uj + system.control_dim);
        auto rhs = [&](const std::vector<double>& xs, double t, std::vector<double>& out) {
            out.resize(n);
            system.f(xs, u, t, out);
        };
        rk4_step(rhs, x, j * dt, dt, k1, k2, k3, k4, work);
        if (!all_finite(x.data(), n))
            throw NonFinite("state trajectory left the finite range during integration");
        std::copy(x.begin(), x.end(), traj.node(j + 1));
    }
    return traj;
}

ClassicalTrajectory rk4_adjoint(const ClassicalSystem& system, const ClassicalTrajectory& traj,
                                const std::vector<double>& controls,
                                const std::vector<double>& terminal_gradient) {
    const int n = system.state_dim;
    if (traj.state_dim != n) throw DimMismatch("trajectory does not match system dimension");
    if (static_cast<int>(terminal_gradient.size()) != n)
        throw DimMismatch("terminal gradient length does not match state dimension");
    if (controls.size() != static_cast<size_t>(traj.n_slices) * system.control_dim)
        throw DimMismatch("control table length does not match trajectory grid");

    const int N = traj.n_slices;
    const double dt = traj.horizon / N;

    ClassicalTrajectory adj;
    adj.n_slices = N;
    adj.state_dim = n;
    adj.horizon = traj.horizon;
    adj.states.resize(static_cast<size_t>(N + 1) * n);
    std::copy(terminal_gradient.begin(), terminal_gradient.end(), adj.node(N));

    std::vector<double> lam(terminal_gradient);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), work(n);
    std::vector<double> u(system.control_dim), xa(n), ma(n), mb(n), xs(n), jac(n * n);
    for (int j = N - 1; j >= 0; --j) {
        const double* uj = controls.data() + static_cast<size_t>(j) * system.control_dim;
        u.assign(uj, uj + system.control_dim);
        const double t0 = j * dt;
        // Slopes at the interval ends, with the slice's own control, feed the
        // Hermite reconstruction of x(t) inside the step.
        xa.assign(traj.node(j), traj.node(j) + n);
        std::vector<double> xb(traj.node(j + 1), traj.node(j + 1) + n);
        system.f(xa, u, t0, ma);
        system.f(xb, u, t0 + dt, mb);
        auto rhs = [&](const std::vector<double>& l, double t, std::vector<double>& out) {
            double s = (t - t0) / dt;
            s = std::min(1.0, std::max(0.0, s));
            hermite_eval(xa.data(), ma.data(), xb.data(), mb.data(), dt, s, n, xs);
            system.dfdx(xs, u, t, jac);
            out.assign(n, 0.0);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) out[c] -= jac[r * n + c] * l[r];
        };
        rk4_step(rhs, lam, t0 + dt, -dt, k1, k2, k3, k4, work);
        if (!all_finite(lam.data(), n))
            throw NonFinite("adjoint trajectory left the finite range during integration");
        std::copy(lam.begin(), lam.end(), adj.node(j));
    }
    return adj;
}

std::vector<double> control_gradient(const ClassicalSystem& system,
                                     const ClassicalTrajectory& traj,
                                     const ClassicalTrajectory& adjoint,
                                     const std::vector<double>& controls) {
    const int n = system.state_dim;
    const int p = system.control_dim;
    const int N = traj.n_slices;
    if (adjoint.n_slices != N || adjoint.state_dim != n)
        throw DimMismatch("adjoint grid does not match trajectory grid");
    if (controls.size() != static_cast<size_t>(N) * p)
        throw DimMismatch("control table length does not match trajectory grid");

    const double dt = traj.horizon / N;
    std::vector<double> grad(static_cast<size_t>(N) * p, 0.0);
    std::vector<double> u(p), xa(n), ma(n), mb(n), la(n), na(n), nb(n);
    std::vector<double> xmid(n), lmid(n), jac(n * p), jx(n * n);
    for (int j = 0; j < N; ++j) {
        const double* uj = controls.data() + static_cast<size_t>(j) * p;
        u.assign(uj, uj + p);
        const double t0 = j * dt;
        const double tm = t0 + 0.5 * dt;

        xa.assign(traj.node(j), traj.node(j) + n);
        std::vector<double> xb(traj.node(j + 1), traj.node(j + 1) + n);
        system.f(xa, u, t0, ma);
        system.f(xb, u, t0 + dt, mb);
        hermite_eval(xa.data(), ma.data(), xb.data(), mb.data(), dt, 0.5, n, xmid);

        // Adjoint slopes from its own equation, lambda_dot = -(df/dx)^T lambda.
        la.assign(adjoint.node(j), adjoint.node(j) + n);
        std::vector<double> lb(adjoint.node(j + 1), adjoint.node(j + 1) + n);
        system.dfdx(xa, u, t0, jx);
        na.assign(n, 0.0);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) na[c] -= jx[r * n + c] * la[r];
        system.dfdx(xb, u, t0 + dt, jx);
        nb.assign(n, 0.0);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) nb[c] -= jx[r * n + c] * lb[r];
        hermite_eval(la.data(), na.data(), lb.data(), nb.data(), dt, 0.5, n, lmid);

        system.dfdu(xmid, u, tm, jac);
        for (int i = 0; i < p; ++i) {
            double g = 0.0;
            for (int r = 0; r < n; ++r) g += lmid[r] * jac[r * p + i];
            grad[static_cast<size_t>(j) * p + i] = g;
        }
    }
    return grad;
}

PmpResult pmp_optimize(const ClassicalSystem& system, const TerminalCost& cost,
                       const std::vector<double>& x0, const std::vector<double>& controls0,
                       int n_slices, double horizon, const PmpOptions& opts) {
    check_problem(system, x0, controls0, n_slices, horizon);
    const int p = system.control_dim;
    const double dt = horizon / n_slices;
    const size_t m = controls0.size();

    PmpResult res;
    res.controls = controls0;
    res.reason = "iteration budget exhausted";

    auto evaluate = [&](const std::vector<double>& u, ClassicalTrajectory& traj) {
        traj = rk4_forward(system, x0, u, n_slices, horizon);
        double v = cost.value(traj.terminal());
        if (!std::isfinite(v)) throw NonFinite("terminal cost is not finite");
        return v;
    };

    ClassicalTrajectory traj;
    double value = evaluate(res.controls, traj);
    res.cost_trace.push_back(value);

    std::vector<double> gterm(system.state_dim);
    std::vector<double> trial(m);
    double step = opts.initial_step;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (opts.cost_tolerance > 0.0 && value <= opts.cost_tolerance) {
            res.converged = true;
            res.reason = "cost tolerance reached";
            break;
        }
        cost.gradient(traj.terminal(), gterm);
        ClassicalTrajectory adj = rk4_adjoint(system, traj, res.controls, gterm);
        std::vector<double> grad = control_gradient(system, traj, adj, res.controls);

        double gmax = 0.0, gsq = 0.0;
        for (double g : grad) {
            gmax = std::max(gmax, std::abs(g));
            gsq += g * g;
        }
        if (gmax <= opts.gradient_tolerance) {
            res.converged = true;
            res.reason = "gradient tolerance reached";
            break;
        }

        // Steepest descent on the discretized cost: d/d(eps) J(u - eps g)
        // at eps = 0 is -dt * sum g^2, since dJ/du_j = dt * g_j to leading
        // order in the slice width. armijo_backtrack wants the decrease rate.
        const double slope = dt * gsq;
        ClassicalTrajectory trial_traj;
        auto value_at_step = [&](double eps) {
            for (size_t i = 0; i < m; ++i) trial[i] = res.controls[i] - eps * grad[i];
            return evaluate(trial, trial_traj);
        };
        double accepted = armijo_backtrack(value_at_step, value, slope, step);
        if (accepted == 0.0) {
            res.reason = "line search stalled";
            break;
        }
        for (size_t i = 0; i < m; ++i) res.controls[i] -= accepted * grad[i];
        value = evaluate(res.controls, traj);
        res.cost_trace.push_back(value);
        // Let the step grow again after a cautious acceptance.
        step = std::min(accepted * 2.0, 1e6);
    }

    res.cost = value;
    res.iterations = it;
    res.trajectory = std::move(traj);
    if (it == opts.max_iterations && !res.converged) res.reason = "iteration budget exhausted";
    (void)p;
    return res;
}

ShoProblem sho_problem(double omega, double a) {
    ShoProblem prob;
    prob.system.state_dim = 2;
    prob.system.control_dim = 1;
    const double w2 = omega * omega;
    prob.system.f = [w2](const std::vector<double>& x, const std::vector<double>& u, double,
                         std::vector<double>& dx) {
        dx.resize(2);
        dx[0] = x[1];
        dx[1] = u[0] - w2 * x[0];
    };
    prob.system.dfdx = [w2](const std::vector<double>&, const std::vector<double>&, double,
                            std::vector<double>& jac) {
        jac.assign({0.0, 1.0, -w2, 0.0});
    };
    prob.system.dfdu = [](const std::vector<double>&, const std::vector<double>&, double,
                          std::vector<double>& jac) {
        jac.assign({0.0, 1.0});
    };
    prob.cost.value = [w2, a](const std::vector<double>& xT) {
        const double dx = xT[0] - a;
        return w2 * dx * dx + xT[1] * xT[1];
    };
    prob.cost.gradient = [w2, a](const std::vector<double>& xT, std::vector<double>& g) {
        g.assign({2.0 * w2 * (xT[0] - a), 2.0 * xT[1]});
    };
    return prob;
}

}  // namespace qoc
