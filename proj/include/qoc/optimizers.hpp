#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qoc/errors.hpp"

namespace qoc {

// Objective with gradient: returns f(x) and fills grad (same size as x).
using GradFn = std::function<double(const std::vector<double>&, std::vector<double>&)>;
// Objective without gradient.
using ValueFn = std::function<double(const std::vector<double>&)>;

struct OptimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
    std::vector<double> value_trace;  // best value after each iteration
    // Aligned with value_trace: convergence surrogate (||g||_inf for L-BFGS,
    // simplex value spread for Nelder-Mead) and wall-clock ms since entry.
    std::vector<double> gradient_trace;
    std::vector<double> wall_ms_trace;
};

// Limited-memory BFGS (two-loop recursion) with a strong Wolfe line search.
// Minimizes f. Maximization is always expressed by the caller as -f.
struct LbfgsOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-10;  // stop when ||g||_inf falls below
    double value_tolerance = 0.0;       // stop when f falls below (0 disables)
    int memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_iterations = 60;
    // Scale the implicit initial Hessian by s.y/y.y each iteration (the usual
    // choice). Disable to recover the textbook BFGS trajectory when the
    // memory is unlimited.
    bool scale_initial_hessian = true;
};
OptimizeResult lbfgs_minimize(const GradFn& fn, std::vector<double> x0,
                              const LbfgsOptions& opts = {});

// Nelder-Mead simplex with the classic coefficients: reflection 1,
// expansion 2, contraction 0.5, shrink 0.5. The initial simplex offsets each
// coordinate by 5% of its value, or by 0.00025 when the coordinate is zero.
struct NelderMeadOptions {
    int max_iterations = 2000;
    double value_spread_tolerance = 1e-12;  // stop when max-min over vertices is below
    double simplex_size_tolerance = 1e-12;
};
OptimizeResult nelder_mead_minimize(const ValueFn& fn, std::vector<double> x0,
                                    const NelderMeadOptions& opts = {});

// Residuals and Jacobian for least-squares fitting: fills r (size m) and
// J (row-major m x n) at x.
using ResidualFn =
    std::function<void(const std::vector<double>&, std::vector<double>&, std::vector<double>&)>;

struct GaussNewtonOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-12;
    double initial_damping = 0.0;  // Levenberg parameter, grown on rejected steps
};
struct GaussNewtonResult {
    std::vector<double> x;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};
// Minimizes ||r(x)||^2. Throws SingularJacobian when the damped normal
// equations stay unsolvable.
GaussNewtonResult gauss_newton_fit(const ResidualFn& fn, std::vector<double> x0, int n_residuals,
                                   const GaussNewtonOptions& opts = {});

// Backtracking (Armijo) line search shared by the gradient-ascent style
// optimizers: starting from step, halve until
//   f(x + step * dir) <= f(x) - c * step * slope        (minimization)
// where slope = -<grad f, dir> must be positive for a descent direction.
// Returns the accepted step, or 0 when max_halvings is exhausted.
double armijo_backtrack(const std::function<double(double)>& value_at_step, double f0,
                        double slope, double initial_step, double c = 1e-4,
                        double shrink = 0.5, int max_halvings = 40);

// Dense solve of a small linear system A x = b (row-major n x n) by Gaussian
// elimination with partial pivoting. Throws SingularJacobian on a zero pivot.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n);

}  // namespace qoc
