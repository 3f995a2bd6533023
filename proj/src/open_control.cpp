#include "qoc/open_control.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace qoc {

namespace {

void check_finite(const std::vector<double>& x, const char* what) {
    for (double v : x) {
        if (!std::isfinite(v)) throw NonFinite(std::string(what) + " contains a non-finite entry");
    }
}

// Commutator parts of the vectorized generator: the drift piece (plus the
// control-independent dissipator) and one matrix per control, so that
// G(u) = parts[0] + sum_i u_i parts[1 + i].
std::vector<ComplexMatrix> generator_parts(const LindbladModel& model) {
    const int n = static_cast<int>(model.system.controls.size());
    std::vector<ComplexMatrix> parts;
    parts.reserve(n + 1);
    std::vector<double> u(n, 0.0);
    parts.push_back(model.generator(u));
    for (int i = 0; i < n; ++i) {
        u[i] = 1.0;
        parts.push_back(model.generator(u) - parts[0]);
        u[i] = 0.0;
    }
    return parts;
}

void pack(const ComplexMatrix& m, std::vector<cplx>& y, int offset) {
    const int nn = m.dim() * m.dim();
    for (int k = 0; k < nn; ++k) y[offset + k] = m.data()[k];
}

ComplexMatrix unpack(const std::vector<cplx>& y, int offset, int dim) {
    ComplexMatrix m(dim);
    const int nn = dim * dim;
    for (int k = 0; k < nn; ++k) m.data()[k] = y[offset + k];
    return m;
}

cplx trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
    const int d = a.dim();
    cplx s = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s += a(i, j) * b(j, i);
    return s;
}

// Joint map/sensitivity integration for the analytic ansatz. The stacked
// state is [vec F; vec dF_1; ...; vec dF_S] with S = free.size() (possibly
// zero), each block one row-major d^2 x d^2 matrix.
std::vector<cplx> integrate_joint_map(const LindbladModel& model, const AnalyticPulse& pulse,
                                      const std::vector<int>& free, const OdeOptions& opts) {
    const int d2 = model.dim() * model.dim();
    const int block = d2 * d2;
    const int n = static_cast<int>(model.system.controls.size());
    const int s = static_cast<int>(free.size());
    const std::vector<ComplexMatrix> parts = generator_parts(model);

    std::vector<cplx> y0(static_cast<size_t>(1 + s) * block, cplx(0.0));
    pack(ComplexMatrix::identity(d2), y0, 0);

    OdeRhs rhs = [&](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        ComplexMatrix f = unpack(y, 0, d2);
        ComplexMatrix g = parts[0];
        for (int i = 0; i < n; ++i) g += pulse.value(i, t) * parts[1 + i];
        pack(g * f, dy, 0);
        if (s == 0) return;
        std::vector<ComplexMatrix> gc_f(n);
        for (int i = 0; i < n; ++i) gc_f[i] = parts[1 + i] * f;
        for (int m = 0; m < s; ++m) {
            ComplexMatrix dm = g * unpack(y, (1 + m) * block, d2);
            for (int i = 0; i < n; ++i) {
                const double c = pulse.param_derivative(i, t, free[m]);
                if (c != 0.0) dm += c * gc_f[i];
            }
            pack(dm, dy, (1 + m) * block);
        }
    };
    return integrate_rk45(rhs, std::move(y0), 0.0, pulse.horizon(), opts);
}

// One piecewise slice: returns the slice map F_k and its derivatives with
// respect to each of the slice's control values.
std::pair<ComplexMatrix, std::vector<ComplexMatrix>> integrate_slice(
    const std::vector<ComplexMatrix>& parts, const std::vector<double>& u, double dt, int d2,
    bool with_grad, const OdeOptions& opts) {
    const int n = static_cast<int>(u.size());
    const int block = d2 * d2;
    const int s = with_grad ? n : 0;
    ComplexMatrix g = parts[0];
    for (int i = 0; i < n; ++i) g += u[i] * parts[1 + i];

    std::vector<cplx> y0(static_cast<size_t>(1 + s) * block, cplx(0.0));
    pack(ComplexMatrix::identity(d2), y0, 0);
    OdeRhs rhs = [&](double, const std::vector<cplx>& y, std::vector<cplx>& dy) {
        ComplexMatrix f = unpack(y, 0, d2);
        pack(g * f, dy, 0);
        for (int i = 0; i < s; ++i) {
            ComplexMatrix di = g * unpack(y, (1 + i) * block, d2) + parts[1 + i] * f;
            pack(di, dy, (1 + i) * block);
        }
    };
    std::vector<cplx> y = integrate_rk45(rhs, std::move(y0), 0.0, dt, opts);

    std::vector<ComplexMatrix> deriv(s);
    for (int i = 0; i < s; ++i) deriv[i] = unpack(y, (1 + i) * block, d2);
    return {unpack(y, 0, d2), std::move(deriv)};
}

OpenEval evaluate(const OpenProblem& prob, const std::vector<double>& params, bool with_grad) {
    prob.validate();
    check_finite(params, "open-system parameters");
    const int d = prob.model.dim();
    const int d2 = d * d;
    const double dd = static_cast<double>(d) * d;
    const ComplexMatrix fu = prob.target_map();

    OpenEval out;
    if (!prob.piecewise) {
        const std::vector<int> free = prob.effective_free();
        if (params.size() != free.size())
            throw DimMismatch("parameter vector does not match the free-parameter count");
        AnalyticPulse pulse = prob.pulse;
        for (size_t m = 0; m < free.size(); ++m) pulse.params()[free[m]] = params[m];
        pulse.validate();

        const int block = d2 * d2;
        std::vector<cplx> y =
            integrate_joint_map(prob.model, pulse, with_grad ? free : std::vector<int>{}, prob.ode);
        out.map = unpack(y, 0, d2);
        out.value = 1.0 - trace_inner(fu, out.map).real() / dd;
        if (with_grad) {
            out.gradient.resize(free.size());
            for (size_t m = 0; m < free.size(); ++m) {
                ComplexMatrix dfm = unpack(y, static_cast<int>(1 + m) * block, d2);
                out.gradient[m] = -trace_inner(fu, dfm).real() / dd;
            }
        }
        return out;
    }

    PiecewisePulse pwc = prob.pwc;
    if (params.size() != pwc.values().size())
        throw DimMismatch("parameter vector does not match the slice table size");
    pwc.values() = params;
    const int nslices = pwc.n_slices();
    const int n = pwc.n_controls();
    const std::vector<ComplexMatrix> parts = generator_parts(prob.model);

    std::vector<ComplexMatrix> slice_maps(nslices);
    std::vector<std::vector<ComplexMatrix>> slice_derivs(nslices);
    std::vector<ComplexMatrix> prefix(nslices + 1);
    prefix[0] = ComplexMatrix::identity(d2);
    std::vector<double> u(n);
    for (int k = 0; k < nslices; ++k) {
        for (int i = 0; i < n; ++i) u[i] = pwc.at(k, i);
        auto [fk, dk] = integrate_slice(parts, u, pwc.dt(), d2, with_grad, prob.ode);
        slice_maps[k] = std::move(fk);
        slice_derivs[k] = std::move(dk);
        prefix[k + 1] = slice_maps[k] * prefix[k];
    }
    out.map = prefix[nslices];
    out.value = 1.0 - trace_inner(fu, out.map).real() / dd;
    if (with_grad) {
        // d phi / du_i(k) = Re Tr(F_U^+ suffix_{k+1} D_{k,i} prefix_k) / d^2;
        // fold the fixed factors into one matrix per slice so each control
        // costs a single trace.
        out.gradient.resize(params.size());
        ComplexMatrix suffix = ComplexMatrix::identity(d2);
        const ComplexMatrix fu_adj = fu.adjoint();
        for (int k = nslices - 1; k >= 0; --k) {
            ComplexMatrix fold = prefix[k] * fu_adj * suffix;
            for (int i = 0; i < n; ++i)
                out.gradient[static_cast<size_t>(k) * n + i] =
                    -trace_product(fold, slice_derivs[k][i]).real() / dd;
            suffix = suffix * slice_maps[k];
        }
    }
    return out;
}

}  // namespace

void OpenProblem::validate() const {
    model.validate();
    const int d = model.dim();
    if (target_unitary.dim() != d)
        throw DimMismatch("open-system target does not match the model dimension");
    ComplexMatrix defect = target_unitary.adjoint() * target_unitary - ComplexMatrix::identity(d);
    if (defect.frobenius_norm() > 1e-10 * d)
        throw NotAChannel("open-system target must be unitary");
    const int n = static_cast<int>(model.system.controls.size());
    if (piecewise) {
        pwc.validate();
        if (pwc.n_controls() != n)
            throw DimMismatch("slice table control count does not match the model");
        if (!free_params.empty())
            throw ConfigError("free_params applies to the analytic ansatz only");
        return;
    }
    // Parameter values are validated once the candidate vector is
    // substituted, so only the ansatz shape is checked here.
    if (pulse.n_controls() != n)
        throw DimMismatch("ansatz control count does not match the model");
    for (int idx : free_params) {
        if (idx < 0 || idx >= pulse.n_params())
            throw BadIndex("free parameter index out of range");
    }
}

std::vector<int> OpenProblem::effective_free() const {
    if (!free_params.empty()) return free_params;
    std::vector<int> all(static_cast<size_t>(pulse.n_params()));
    std::iota(all.begin(), all.end(), 0);
    return all;
}

ComplexMatrix OpenProblem::target_map() const { return channel_from_unitary(target_unitary); }

double open_value(const OpenProblem& prob, const std::vector<double>& params) {
    return evaluate(prob, params, false).value;
}

OpenEval open_value_and_gradient(const OpenProblem& prob, const std::vector<double>& params) {
    return evaluate(prob, params, true);
}

OpenResult open_optimize(const OpenProblem& prob, std::vector<double> params0) {
    prob.validate();
    if (params0.empty()) {
        if (prob.piecewise) {
            params0 = prob.pwc.values();
        } else {
            for (int idx : prob.effective_free()) params0.push_back(prob.pulse.params()[idx]);
        }
    }
    GradFn fn = [&prob](const std::vector<double>& x, std::vector<double>& grad) {
        OpenEval eval = open_value_and_gradient(prob, x);
        grad = eval.gradient;
        return eval.value;
    };
    OpenResult result;
    result.run = lbfgs_minimize(fn, std::move(params0), prob.optimizer);
    result.infidelity = result.run.value;
    result.pulse = prob.pulse;
    result.pwc = prob.pwc;
    if (prob.piecewise) {
        result.pwc.values() = result.run.x;
    } else {
        const std::vector<int> free = prob.effective_free();
        for (size_t m = 0; m < free.size(); ++m) result.pulse.params()[free[m]] = result.run.x[m];
    }
    return result;
}

}  // namespace qoc
