#include "qoc/optimizers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>

namespace qoc {

namespace {

class WallClock {
  public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    }

  private:
    using Clock = std::chrono::steady_clock;
    Clock::time_point start_ = Clock::now();
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_finite(double f, const std::vector<double>& g, const char* who) {
    if (!std::isfinite(f)) throw NonFinite(std::string(who) + ": objective is not finite");
    for (double x : g) {
        if (!std::isfinite(x)) throw NonFinite(std::string(who) + ": gradient is not finite");
    }
}

struct LinePoint {
    double alpha = 0.0;
    double f = 0.0;
    double df = 0.0;  // directional derivative at alpha
    std::vector<double> x;
    std::vector<double> g;
};

// Strong Wolfe line search (bracket + zoom). `evaluate` computes the
// objective and gradient at x + alpha * dir and reports the directional
// derivative along dir.
bool wolfe_search(const GradFn& fn, const std::vector<double>& x, const std::vector<double>& dir,
                  double f0, double df0, double c1, double c2, int budget, LinePoint& out) {
    const size_t n = x.size();
    auto evaluate = [&](double alpha, LinePoint& p) {
        p.alpha = alpha;
        p.x.resize(n);
        for (size_t i = 0; i < n; ++i) p.x[i] = x[i] + alpha * dir[i];
        p.g.assign(n, 0.0);
        p.f = fn(p.x, p.g);
        check_finite(p.f, p.g, "lbfgs line search");
        p.df = dot(p.g, dir);
    };

    auto zoom = [&](LinePoint lo, LinePoint hi) -> bool {
        for (int i = 0; i < budget; ++i) {
            // Quadratic interpolation using lo's value/slope and hi's value,
            // guarded towards bisection when the model step is poor.
            double span = hi.alpha - lo.alpha;
            double denom = 2.0 * (hi.f - lo.f - lo.df * span);
            double alpha = lo.alpha + 0.5 * span;
            if (std::abs(denom) > 1e-300) {
                double cand = lo.alpha - lo.df * span * span / denom;
                double a = std::min(lo.alpha, hi.alpha), b = std::max(lo.alpha, hi.alpha);
                double margin = 0.1 * (b - a);
                if (cand > a + margin && cand < b - margin) alpha = cand;
            }
            LinePoint p;
            evaluate(alpha, p);
            if (p.f > f0 + c1 * p.alpha * df0 || p.f >= lo.f) {
                hi = p;
            } else {
                if (std::abs(p.df) <= -c2 * df0) {
                    out = p;
                    return true;
                }
                if (p.df * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = p;
            }
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) {
                // Interval collapsed; accept the best point if it at least
                // makes Armijo progress.
                if (lo.f <= f0 + c1 * lo.alpha * df0 && lo.alpha > 0.0) {
                    out = lo;
                    return true;
                }
                return false;
            }
        }
        return false;
    };

    LinePoint prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.df = df0;
    prev.x = x;

    double alpha = 1.0;
    const double alpha_max = 1e6;
    for (int i = 0; i < budget; ++i) {
        LinePoint p;
        evaluate(alpha, p);
        if (p.f > f0 + c1 * alpha * df0 || (i > 0 && p.f >= prev.f)) {
            return zoom(prev, p);
        }
        if (std::abs(p.df) <= -c2 * df0) {
            out = p;
            return true;
        }
        if (p.df >= 0.0) {
            return zoom(p, prev);
        }
        prev = p;
        alpha = std::min(2.0 * alpha, alpha_max);
        if (alpha >= alpha_max) return false;
    }
    return false;
}

}  // namespace

OptimizeResult lbfgs_minimize(const GradFn& fn, std::vector<double> x0,
                              const LbfgsOptions& opts) {
    const size_t n = x0.size();
    WallClock clock;
    OptimizeResult res;
    res.x = std::move(x0);

    std::vector<double> g(n, 0.0);
    double f = fn(res.x, g);
    check_finite(f, g, "lbfgs");
    res.value = f;
    res.value_trace.push_back(f);
    res.gradient_trace.push_back(inf_norm(g));
    res.wall_ms_trace.push_back(clock.ms());

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (inf_norm(g) <= opts.gradient_tolerance) {
            res.converged = true;
            res.reason = "gradient tolerance reached";
            return res;
        }
        if (opts.value_tolerance != 0.0 && f <= opts.value_tolerance) {
            res.converged = true;
            res.reason = "value tolerance reached";
            return res;
        }

        // Two-loop recursion for d = -H g.
        std::vector<double> q = g;
        std::vector<double> alphas(history.size());
        for (size_t i = history.size(); i-- > 0;) {
            const Pair& h = history[i];
            alphas[i] = h.rho * dot(h.s, q);
            for (size_t k = 0; k < n; ++k) q[k] -= alphas[i] * h.y[k];
        }
        if (opts.scale_initial_hessian && !history.empty()) {
            const Pair& last = history.back();
            double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& v : q) v *= gamma;
        }
        for (size_t i = 0; i < history.size(); ++i) {
            const Pair& h = history[i];
            double beta = h.rho * dot(h.y, q);
            for (size_t k = 0; k < n; ++k) q[k] += (alphas[i] - beta) * h.s[k];
        }
        std::vector<double> dir(n);
        for (size_t k = 0; k < n; ++k) dir[k] = -q[k];

        double slope = dot(g, dir);
        if (slope >= 0.0) {
            // Curvature information went stale; restart from steepest descent.
            history.clear();
            for (size_t k = 0; k < n; ++k) dir[k] = -g[k];
            slope = -dot(g, g);
        }

        LinePoint accepted;
        if (!wolfe_search(fn, res.x, dir, f, slope, opts.wolfe_c1, opts.wolfe_c2,
                          opts.max_line_iterations, accepted)) {
            res.reason = "line search failure";
            res.iterations = iter;
            return res;
        }

        Pair pair;
        pair.s.resize(n);
        pair.y.resize(n);
        for (size_t k = 0; k < n; ++k) {
            pair.s[k] = accepted.x[k] - res.x[k];
            pair.y[k] = accepted.g[k] - g[k];
        }
        double sy = dot(pair.s, pair.y);
        double curvature_floor =
            1e-10 * std::sqrt(dot(pair.s, pair.s)) * std::sqrt(dot(pair.y, pair.y));
        if (sy > curvature_floor) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
        }

        res.x = std::move(accepted.x);
        g = std::move(accepted.g);
        f = accepted.f;
        res.value = f;
        res.iterations = iter + 1;
        res.value_trace.push_back(f);
        res.gradient_trace.push_back(inf_norm(g));
        res.wall_ms_trace.push_back(clock.ms());
    }
    res.reason = "iteration budget exhausted";
    return res;
}

OptimizeResult nelder_mead_minimize(const ValueFn& fn, std::vector<double> x0,
                                    const NelderMeadOptions& opts) {
    const size_t n = x0.size();
    WallClock clock;
    OptimizeResult res;

    auto safe_eval = [&](const std::vector<double>& x) {
        double v = fn(x);
        if (!std::isfinite(v)) throw NonFinite("nelder_mead: objective is not finite");
        return v;
    };

    // Initial simplex: 5% coordinate offsets, absolute 0.00025 at zeros.
    std::vector<std::vector<double>> verts(n + 1, x0);
    for (size_t i = 0; i < n; ++i) {
        double& c = verts[i + 1][i];
        c = (c != 0.0) ? 1.05 * c : 0.00025;
    }
    std::vector<double> vals(n + 1);
    for (size_t i = 0; i <= n; ++i) vals[i] = safe_eval(verts[i]);

    std::vector<size_t> order(n + 1);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return vals[a] < vals[b]; });
        const size_t best = order[0], second_worst = order[n - 1], worst = order[n];

        double spread = vals[worst] - vals[best];
        double size = 0.0;
        for (size_t i = 0; i <= n; ++i) {
            for (size_t k = 0; k < n; ++k) {
                size = std::max(size, std::abs(verts[i][k] - verts[best][k]));
            }
        }

        res.x = verts[best];
        res.value = vals[best];
        res.iterations = iter;
        res.value_trace.push_back(vals[best]);
        res.gradient_trace.push_back(spread);
        res.wall_ms_trace.push_back(clock.ms());
        if (spread <= opts.value_spread_tolerance || size <= opts.simplex_size_tolerance) {
            res.converged = true;
            res.reason = "simplex collapsed";
            return res;
        }

        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (size_t k = 0; k < n; ++k) centroid[k] += verts[i][k];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double coeff) {
            std::vector<double> p(n);
            for (size_t k = 0; k < n; ++k) {
                p[k] = centroid[k] + coeff * (centroid[k] - verts[worst][k]);
            }
            return p;
        };

        std::vector<double> xr = blend(1.0);  // reflection
        double fr = safe_eval(xr);

        if (fr < vals[best]) {
            std::vector<double> xe = blend(2.0);  // expansion
            double fe = safe_eval(xe);
            if (fe < fr) {
                verts[worst] = std::move(xe);
                vals[worst] = fe;
            } else {
                verts[worst] = std::move(xr);
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second_worst]) {
            verts[worst] = std::move(xr);
            vals[worst] = fr;
            continue;
        }

        bool outside = fr < vals[worst];
        std::vector<double> xc = blend(outside ? 0.5 : -0.5);  // contraction
        double fc = safe_eval(xc);
        if ((outside && fc <= fr) || (!outside && fc < vals[worst])) {
            verts[worst] = std::move(xc);
            vals[worst] = fc;
            continue;
        }

        // Shrink towards the best vertex.
        for (size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (size_t k = 0; k < n; ++k) {
                verts[i][k] = verts[best][k] + 0.5 * (verts[i][k] - verts[best][k]);
            }
            vals[i] = safe_eval(verts[i]);
        }
    }
    res.reason = "iteration budget exhausted";
    return res;
}

std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) throw SingularJacobian("solve_dense: zero matrix");

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (std::abs(a[pivot * n + col]) < 1e-14 * scale) {
            throw SingularJacobian("solve_dense: matrix is numerically singular");
        }
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        for (int r = col + 1; r < n; ++r) {
            double factor = a[r * n + col] / a[col * n + col];
            if (factor == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

GaussNewtonResult gauss_newton_fit(const ResidualFn& fn, std::vector<double> x0, int n_residuals,
                                   const GaussNewtonOptions& opts) {
    const int n = static_cast<int>(x0.size());
    const int m = n_residuals;

    GaussNewtonResult res;
    res.x = std::move(x0);

    std::vector<double> r(m), jac(static_cast<size_t>(m) * n);
    fn(res.x, r, jac);
    double cost = dot(r, r);
    double damping = opts.initial_damping;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.iterations = iter + 1;

        // Normal equations J^T J dx = -J^T r with Levenberg damping on the
        // diagonal; the damping grows until a step is accepted.
        std::vector<double> jtj(static_cast<size_t>(n) * n, 0.0);
        std::vector<double> jtr(n, 0.0);
        for (int i = 0; i < m; ++i) {
            for (int a = 0; a < n; ++a) {
                jtr[a] -= jac[static_cast<size_t>(i) * n + a] * r[i];
                for (int b = a; b < n; ++b) {
                    jtj[static_cast<size_t>(a) * n + b] +=
                        jac[static_cast<size_t>(i) * n + a] * jac[static_cast<size_t>(i) * n + b];
                }
            }
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < a; ++b) jtj[static_cast<size_t>(a) * n + b] = jtj[static_cast<size_t>(b) * n + a];

        bool accepted = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            std::vector<double> damped = jtj;
            for (int a = 0; a < n; ++a) damped[static_cast<size_t>(a) * n + a] += damping;

            std::vector<double> dx;
            try {
                dx = solve_dense(damped, jtr, n);
            } catch (const SingularJacobian&) {
                damping = std::max(1e-8, damping * 10.0);
                if (attempt == 39) throw;
                continue;
            }

            std::vector<double> x_try = res.x;
            for (int a = 0; a < n; ++a) x_try[a] += dx[a];
            std::vector<double> r_try(m), jac_try(static_cast<size_t>(m) * n);
            fn(x_try, r_try, jac_try);
            double cost_try = dot(r_try, r_try);

            if (std::isfinite(cost_try) && cost_try <= cost) {
                res.x = std::move(x_try);
                r = std::move(r_try);
                jac = std::move(jac_try);
                cost = cost_try;
                damping *= 0.3;
                if (damping < 1e-12) damping = 0.0;
                accepted = true;
                if (inf_norm(dx) <= opts.step_tolerance) {
                    res.converged = true;
                    res.residual_norm = std::sqrt(cost);
                    return res;
                }
            } else {
                damping = std::max(1e-8, damping * 10.0);
            }
        }
        if (!accepted) {
            res.residual_norm = std::sqrt(cost);
            return res;  // stuck: damping saturated without progress
        }
    }
    res.residual_norm = std::sqrt(cost);
    return res;
}

double armijo_backtrack(const std::function<double(double)>& value_at_step, double f0,
                        double slope, double initial_step, double c, double shrink,
                        int max_halvings) {
    if (!(slope > 0.0)) return 0.0;
    double step = initial_step;
    for (int i = 0; i < max_halvings; ++i) {
        double f = value_at_step(step);
        if (std::isfinite(f) && f <= f0 - c * step * slope) return step;
        step *= shrink;
    }
    return 0.0;
}

}  // namespace qoc
