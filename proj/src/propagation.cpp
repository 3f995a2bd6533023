#include "qoc/propagation.hpp"

#include <algorithm>
#include <cmath>

namespace qoc {

namespace {

ComplexMatrix transpose(const ComplexMatrix& m) { return conj_elementwise(m.adjoint()); }

// Exact Hermitian part. The symmetrization is bitwise self-adjoint, which
// keeps downstream expm calls off the non-Hermitian guard rail.
ComplexMatrix hermitian_part(const ComplexMatrix& m) {
    ComplexMatrix out(m.dim());
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) out(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
    return out;
}

// dst += factor * M * src for flat row-major blocks of shape d x d.
void accumulate_product(cplx* dst, const ComplexMatrix& m, const cplx* src, int d, cplx factor) {
    for (int r = 0; r < d; ++r)
        for (int k = 0; k < d; ++k) {
            const cplx f = factor * m(r, k);
            const cplx* row = src + static_cast<size_t>(k) * d;
            cplx* out = dst + static_cast<size_t>(r) * d;
            for (int c = 0; c < d; ++c) out[c] += f * row[c];
        }
}

}  // namespace

SlicePropagator slice_propagator(const ControlSystem& system, const std::vector<double>& u,
                                 double dt) {
    SlicePropagator out;
    out.decomposition = hermitian_eig(system.hamiltonian(u));
    out.unitary = expm_from_decomposition(out.decomposition, cplx(0.0, -dt));
    return out;
}

PwcEvolution propagate_pwc(const ControlSystem& system, const PiecewisePulse& pulse) {
    pulse.validate();
    if (pulse.n_controls() != static_cast<int>(system.controls.size()))
        throw DimMismatch("pulse control count does not match system");

    const int N = pulse.n_slices();
    PwcEvolution evo;
    evo.slice_unitaries.reserve(N);
    evo.prefix.reserve(N + 1);
    evo.prefix.push_back(ComplexMatrix::identity(system.dim()));

    std::vector<double> u(pulse.n_controls());
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < pulse.n_controls(); ++i) u[i] = pulse.at(k, i);
        evo.slice_unitaries.push_back(slice_propagator(system, u, pulse.dt()).unitary);
        evo.prefix.push_back(evo.slice_unitaries.back() * evo.prefix.back());
    }
    return evo;
}

namespace {

ForwardCache forward_sweep(const ControlSystem& system, const PiecewisePulse& pulse) {
    pulse.validate();
    if (pulse.n_controls() != static_cast<int>(system.controls.size()))
        throw DimMismatch("pulse control count does not match system");

    const int N = pulse.n_slices();
    ForwardCache fwd;
    fwd.dt = pulse.dt();
    fwd.slice_unitaries.reserve(N);
    fwd.decompositions.reserve(N);
    fwd.prefix.reserve(N + 1);
    fwd.prefix.push_back(ComplexMatrix::identity(system.dim()));

    std::vector<double> u(pulse.n_controls());
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < pulse.n_controls(); ++i) u[i] = pulse.at(k, i);
        SlicePropagator sp = slice_propagator(system, u, pulse.dt());
        fwd.slice_unitaries.push_back(std::move(sp.unitary));
        fwd.decompositions.push_back(std::move(sp.decomposition));
        fwd.prefix.push_back(fwd.slice_unitaries.back() * fwd.prefix.back());
    }
    return fwd;
}

}  // namespace

PwcCaches evolve_pwc(const ControlSystem& system, const PiecewisePulse& pulse,
                     const StateVector& psi0, const StateVector& psi1) {
    if (static_cast<int>(psi0.size()) != system.dim() ||
        static_cast<int>(psi1.size()) != system.dim())
        throw DimMismatch("state dimension does not match system");

    PwcCaches caches;
    caches.forward = forward_sweep(system, pulse);
    const int N = pulse.n_slices();

    caches.forward.states.resize(N + 1);
    caches.forward.states[0] = psi0;
    for (int k = 0; k < N; ++k)
        caches.forward.states[k + 1] =
            caches.forward.slice_unitaries[k] * caches.forward.states[k];

    caches.backward.costates.resize(N + 1);
    caches.backward.costates[N] = psi1;
    for (int k = N - 1; k >= 0; --k)
        caches.backward.costates[k] =
            caches.forward.slice_unitaries[k].adjoint() * caches.backward.costates[k + 1];
    return caches;
}

PwcCaches evolve_pwc(const ControlSystem& system, const PiecewisePulse& pulse,
                     const ComplexMatrix& u_target) {
    if (u_target.dim() != system.dim())
        throw DimMismatch("target dimension does not match system");

    PwcCaches caches;
    caches.forward = forward_sweep(system, pulse);
    const int N = pulse.n_slices();

    caches.backward.back_targets.resize(N + 1);
    caches.backward.back_targets[N] = u_target;
    for (int k = N - 1; k >= 0; --k)
        caches.backward.back_targets[k] = caches.forward.slice_unitaries[k].adjoint() *
                                          caches.backward.back_targets[k + 1];
    return caches;
}

std::vector<cplx> integrate_rk45(const OdeRhs& rhs, std::vector<cplx> y, double t0, double t1,
                                 const OdeOptions& opts) {
    if (t0 == t1) return y;
    const double span = std::abs(t1 - t0);
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double min_step = opts.min_step > 0.0 ? opts.min_step : 1e-14 * span;
    const size_t n = y.size();

    // Dormand-Prince tableau; k7 is evaluated at the accepted point and fed
    // back as k1 of the next step (FSAL).
    static const double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static const double a2[] = {1.0 / 5};
    static const double a3[] = {3.0 / 40, 9.0 / 40};
    static const double a4[] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
    static const double a5[] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729};
    static const double a6[] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
                                -5103.0 / 18656};
    static const double b[] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
                               11.0 / 84};
    static const double e[] = {71.0 / 57600,      0.0,        -71.0 / 16695, 71.0 / 1920,
                               -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

    std::vector<std::vector<cplx>> k(7, std::vector<cplx>(n));
    std::vector<cplx> stage(n), ynew(n);

    auto check_finite = [](const std::vector<cplx>& v) {
        for (const cplx& z : v)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw NonFinite("integrator state left the finite range");
    };

    double t = t0;
    double h = dir * (opts.initial_step > 0.0 ? opts.initial_step : span / 100.0);
    rhs(t, y, k[0]);
    check_finite(k[0]);

    bool fsal_fresh = true;
    for (long steps = 0; steps < opts.max_steps; ++steps) {
        if ((t - t1) * dir >= 0.0) return y;
        if (std::abs(h) < min_step)
            throw StepUnderflow("adaptive step fell below the minimum width");
        if ((t + h - t1) * dir > 0.0) h = t1 - t;

        if (!fsal_fresh) {
            rhs(t, y, k[0]);
            check_finite(k[0]);
        }
        const double* rows[5] = {a2, a3, a4, a5, a6};
        for (int s = 1; s <= 5; ++s) {
            for (size_t i = 0; i < n; ++i) {
                cplx acc = 0.0;
                for (int q = 0; q < s; ++q) acc += rows[s - 1][q] * k[q][i];
                stage[i] = y[i] + h * acc;
            }
            rhs(t + c[s] * h, stage, k[s]);
        }
        for (size_t i = 0; i < n; ++i) {
            cplx acc = 0.0;
            for (int q = 0; q < 6; ++q) acc += b[q] * k[q][i];
            ynew[i] = y[i] + h * acc;
        }
        rhs(t + h, ynew, k[6]);
        check_finite(ynew);
        check_finite(k[6]);

        double errsq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            cplx acc = 0.0;
            for (int q = 0; q < 7; ++q) acc += e[q] * k[q][i];
            const double scale =
                opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            errsq += std::norm(h * acc / scale);
        }
        const double errnorm = std::sqrt(errsq / static_cast<double>(n));

        if (errnorm <= 1.0) {
            t += h;
            y.swap(ynew);
            k[0].swap(k[6]);
            fsal_fresh = true;
            const double grow =
                errnorm == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(errnorm, -0.2)));
            h *= grow;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(errnorm, -0.2));
            fsal_fresh = false;
        }
    }
    throw ConvergenceFailure("adaptive integrator exceeded its step budget");
}

ComplexMatrix evolve_unitary(const HamiltonianFn& hamiltonian, int dim, double horizon,
                             const OdeOptions& opts) {
    if (dim < 1) throw DimMismatch("unitary evolution needs a positive dimension");
    std::vector<cplx> y(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) y[static_cast<size_t>(i) * dim + i] = 1.0;

    ComplexMatrix h_of_t(dim);
    auto rhs = [&](double t, const std::vector<cplx>& u, std::vector<cplx>& du) {
        h_of_t = hamiltonian(t);
        if (h_of_t.dim() != dim) throw DimMismatch("hamiltonian callback changed dimension");
        du.assign(u.size(), 0.0);
        accumulate_product(du.data(), h_of_t, u.data(), dim, cplx(0.0, -1.0));
    };
    std::vector<cplx> yT = integrate_rk45(rhs, std::move(y), 0.0, horizon, opts);

    ComplexMatrix out(dim);
    std::copy(yT.begin(), yT.end(), out.data());
    return out;
}

GoatEvolution integrate_goat(const ControlSystem& system, const AnalyticPulse& pulse,
                             const std::vector<int>& param_subset, const OdeOptions& opts) {
    system.validate();
    pulse.validate();
    const int nc = static_cast<int>(system.controls.size());
    if (pulse.n_controls() != nc) throw DimMismatch("pulse control count does not match system");
    if (param_subset.empty()) throw BadIndex("integrate_goat: empty parameter subset");
    for (int idx : param_subset)
        if (idx < 0 || idx >= pulse.n_params())
            throw BadIndex("integrate_goat: parameter index out of range");

    const int d = system.dim();
    const size_t d2 = static_cast<size_t>(d) * d;
    const int S = static_cast<int>(param_subset.size());

    std::vector<cplx> y((1 + S) * d2, 0.0);
    for (int i = 0; i < d; ++i) y[static_cast<size_t>(i) * d + i] = 1.0;

    std::vector<double> u(nc);
    std::vector<cplx> hi_u0(static_cast<size_t>(nc) * d2);  // per-control H_i * U blocks
    ComplexMatrix h(d);
    auto rhs = [&](double t, const std::vector<cplx>& yy, std::vector<cplx>& dy) {
        for (int i = 0; i < nc; ++i) u[i] = pulse.value(i, t);
        h = system.hamiltonian(u);
        dy.assign(yy.size(), 0.0);

        const cplx* u_block = yy.data();
        cplx* du_block = dy.data();
        accumulate_product(du_block, h, u_block, d, cplx(0.0, -1.0));

        // Products H_i U feed every parameter block via the chain rule.
        std::fill(hi_u0.begin(), hi_u0.end(), cplx(0.0));
        for (int i = 0; i < nc; ++i)
            accumulate_product(hi_u0.data() + i * d2, system.controls[i], u_block, d,
                               cplx(1.0, 0.0));

        for (int m = 0; m < S; ++m) {
            const cplx* ym = yy.data() + (1 + m) * d2;
            cplx* dym = dy.data() + (1 + m) * d2;
            accumulate_product(dym, h, ym, d, cplx(0.0, -1.0));
            for (int i = 0; i < nc; ++i) {
                const double coeff = pulse.param_derivative(i, t, param_subset[m]);
                if (coeff == 0.0) continue;
                const cplx factor(0.0, -coeff);
                const cplx* src = hi_u0.data() + i * d2;
                for (size_t q = 0; q < d2; ++q) dym[q] += factor * src[q];
            }
        }
    };

    std::vector<cplx> yT = integrate_rk45(rhs, std::move(y), 0.0, pulse.horizon(), opts);

    GoatEvolution out;
    out.u = ComplexMatrix(d);
    std::copy(yT.begin(), yT.begin() + d2, out.u.data());
    out.du.resize(S, ComplexMatrix(d));
    for (int m = 0; m < S; ++m)
        std::copy(yT.begin() + (1 + m) * d2, yT.begin() + (2 + m) * d2, out.du[m].data());
    return out;
}

std::vector<cplx> vec_density(const ComplexMatrix& x) {
    const int d = x.dim();
    std::vector<cplx> v(static_cast<size_t>(d) * d);
    for (int col = 0; col < d; ++col)
        for (int row = 0; row < d; ++row) v[static_cast<size_t>(col) * d + row] = x(row, col);
    return v;
}

ComplexMatrix unvec_density(const std::vector<cplx>& v) {
    const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (static_cast<size_t>(d) * d != v.size())
        throw DimMismatch("vectorized density length is not a perfect square");
    ComplexMatrix x(d);
    for (int col = 0; col < d; ++col)
        for (int row = 0; row < d; ++row) x(row, col) = v[static_cast<size_t>(col) * d + row];
    return x;
}

ComplexMatrix channel_from_unitary(const ComplexMatrix& u) {
    return kron(conj_elementwise(u), u);
}

void LindbladModel::validate() const {
    system.validate();
    if (collapse.size() != rates.size())
        throw DimMismatch("collapse operator and rate counts differ");
    for (const ComplexMatrix& l : collapse)
        if (l.dim() != dim()) throw DimMismatch("collapse operator dimension mismatch");
    for (double g : rates)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw OutOfRange("collapse rates must be finite and nonnegative");
}

ComplexMatrix LindbladModel::dissipator() const {
    const int d = dim();
    const ComplexMatrix eye = ComplexMatrix::identity(d);
    ComplexMatrix out(d * d);
    for (size_t k = 0; k < collapse.size(); ++k) {
        const ComplexMatrix& l = collapse[k];
        const ComplexMatrix ldl = l.adjoint() * l;
        ComplexMatrix term = kron(conj_elementwise(l), l);
        term *= 2.0;
        term -= kron(eye, ldl);
        term -= kron(transpose(ldl), eye);
        term *= rates[k];
        out += term;
    }
    return out;
}

ComplexMatrix LindbladModel::generator(const std::vector<double>& u) const {
    const ComplexMatrix h = system.hamiltonian(u);
    const ComplexMatrix eye = ComplexMatrix::identity(dim());
    ComplexMatrix gen = kron(eye, h) - kron(transpose(h), eye);
    gen *= cplx(0.0, -1.0);
    gen += dissipator();
    return gen;
}

namespace {

// X(t1) for Xdot = gen X from X(t0), flattening X row-major.
ComplexMatrix propagate_by_generator(const ComplexMatrix& gen, ComplexMatrix x, double t0,
                                     double t1, const OdeOptions& opts) {
    const int d = x.dim();
    std::vector<cplx> y(x.data(), x.data() + static_cast<size_t>(d) * d);
    auto rhs = [&](double, const std::vector<cplx>& v, std::vector<cplx>& dv) {
        dv.assign(v.size(), 0.0);
        accumulate_product(dv.data(), gen, v.data(), d, cplx(1.0, 0.0));
    };
    y = integrate_rk45(rhs, std::move(y), t0, t1, opts);
    std::copy(y.begin(), y.end(), x.data());
    return x;
}

}  // namespace

ComplexMatrix evolve_lindblad(const LindbladModel& model, const PiecewisePulse& pulse,
                              const OdeOptions& opts) {
    model.validate();
    pulse.validate();
    if (pulse.n_controls() != static_cast<int>(model.system.controls.size()))
        throw DimMismatch("pulse control count does not match open system");

    const int d = model.dim();
    ComplexMatrix f = ComplexMatrix::identity(d * d);
    std::vector<double> u(pulse.n_controls());
    for (int k = 0; k < pulse.n_slices(); ++k) {
        for (int i = 0; i < pulse.n_controls(); ++i) u[i] = pulse.at(k, i);
        f = propagate_by_generator(model.generator(u), std::move(f), k * pulse.dt(),
                                   (k + 1) * pulse.dt(), opts);
    }
    return f;
}

ComplexMatrix evolve_lindblad(const LindbladModel& model, const PiecewisePulse& pulse,
                              const ComplexMatrix& rho0, const OdeOptions& opts) {
    model.validate();
    pulse.validate();
    if (pulse.n_controls() != static_cast<int>(model.system.controls.size()))
        throw DimMismatch("pulse control count does not match open system");
    if (rho0.dim() != model.dim())
        throw DimMismatch("initial density matrix dimension mismatch");

    std::vector<cplx> y = vec_density(rho0);
    std::vector<double> u(pulse.n_controls());
    for (int k = 0; k < pulse.n_slices(); ++k) {
        for (int i = 0; i < pulse.n_controls(); ++i) u[i] = pulse.at(k, i);
        const ComplexMatrix gen = model.generator(u);
        auto rhs = [&gen](double, const std::vector<cplx>& v, std::vector<cplx>& dv) {
            dv = gen * v;
        };
        y = integrate_rk45(rhs, std::move(y), k * pulse.dt(), (k + 1) * pulse.dt(), opts);
    }
    return unvec_density(y);
}

ComplexMatrix evolve_lindblad(const LindbladModel& model,
                              const std::function<std::vector<double>(double)>& controls,
                              double horizon, const ComplexMatrix& rho0, const OdeOptions& opts) {
    model.validate();
    if (rho0.dim() != model.dim())
        throw DimMismatch("initial density matrix dimension mismatch");
    auto rhs = [&](double t, const std::vector<cplx>& v, std::vector<cplx>& dv) {
        dv = model.generator(controls(t)) * v;
    };
    return unvec_density(integrate_rk45(rhs, vec_density(rho0), 0.0, horizon, opts));
}

MagnusTerms magnus_terms(const std::vector<ComplexMatrix>& samples, double t) {
    const int M = static_cast<int>(samples.size());
    if (M < 3) throw BadGrid("magnus quadrature needs at least 3 samples");
    if (!(t > 0.0) || !std::isfinite(t)) throw BadGrid("magnus horizon must be positive");
    const int d = samples[0].dim();
    for (const ComplexMatrix& s : samples) {
        if (s.dim() != d) throw DimMismatch("magnus samples change dimension");
        if (!s.is_finite()) throw NonFinite("magnus sample is not finite");
    }

    const double h = t / (M - 1);
    auto weight = [&](int j) { return (j == 0 || j == M - 1) ? 0.5 * h : h; };

    // M_0 and the running integral S_j = int_0^{t_j} V.
    ComplexMatrix m0(d);
    std::vector<ComplexMatrix> s(M, ComplexMatrix(d));
    for (int j = 0; j < M; ++j) m0 += weight(j) * samples[j];
    for (int j = 1; j < M; ++j) {
        s[j] = s[j - 1];
        s[j] += (0.5 * h) * (samples[j - 1] + samples[j]);
    }

    // M_1 from K_j = [V_j, S_j]; the outer integral is a plain trapezoid.
    std::vector<ComplexMatrix> kk(M);
    ComplexMatrix acc1(d);
    for (int j = 0; j < M; ++j) {
        kk[j] = commutator(samples[j], s[j]);
        acc1 += weight(j) * kk[j];
    }
    ComplexMatrix m1 = cplx(0.0, -0.5) * acc1;

    // First third-order piece: int [V1, T(s1)] with T the cumulative integral
    // of K. Second piece runs the same contraction from the right end, using
    // Sbar_j = S(t) - S_j and a reverse cumulative integral.
    std::vector<ComplexMatrix> tt(M, ComplexMatrix(d));
    for (int j = 1; j < M; ++j) {
        tt[j] = tt[j - 1];
        tt[j] += (0.5 * h) * (kk[j - 1] + kk[j]);
    }
    std::vector<ComplexMatrix> kbar(M), rr(M, ComplexMatrix(d));
    for (int j = 0; j < M; ++j) kbar[j] = commutator(samples[j], s[M - 1] - s[j]);
    for (int j = M - 2; j >= 0; --j) {
        rr[j] = rr[j + 1];
        rr[j] += (0.5 * h) * (kbar[j] + kbar[j + 1]);
    }
    ComplexMatrix acc2(d);
    for (int j = 0; j < M; ++j) {
        acc2 += weight(j) * commutator(samples[j], tt[j]);
        acc2 += weight(j) * commutator(samples[j], rr[j]);
    }
    ComplexMatrix m2 = cplx(-1.0 / 6.0, 0.0) * acc2;

    MagnusTerms out;
    out.m0 = hermitian_part(m0);
    out.m1 = hermitian_part(m1);
    out.m2 = hermitian_part(m2);
    return out;
}

ComplexMatrix magnus_propagator(const std::vector<ComplexMatrix>& samples, double t, int order) {
    if (order < 0 || order > 2) throw OutOfRange("magnus order must be 0, 1, or 2");
    MagnusTerms terms = magnus_terms(samples, t);
    ComplexMatrix gen = terms.m0;
    if (order >= 1) gen += terms.m1;
    if (order >= 2) gen += terms.m2;
    return expm_hermitian(gen, cplx(0.0, -1.0));
}

std::vector<ComplexMatrix> sample_hamiltonian(const HamiltonianFn& v, double t, int n_samples) {
    if (n_samples < 2) throw BadGrid("need at least 2 samples over the interval");
    std::vector<ComplexMatrix> out(n_samples);
    const double h = t / (n_samples - 1);
    for (int j = 0; j < n_samples; ++j) out[j] = v(h * j);
    return out;
}

}  // namespace qoc
