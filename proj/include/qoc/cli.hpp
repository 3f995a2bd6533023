#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qoc/benchmarking.hpp"
#include "qoc/config.hpp"
#include "qoc/drag.hpp"

namespace qoc {

// Command implementations behind the `qoc` binary, kept callable in-process
// so tests can run a command and inspect both the returned summary and the
// files it wrote. Each command writes its CSV outputs under out_dir (created
// on demand) and prints a one-line summary to stdout.

// Shared flags. `seed_set` records whether --seed was given on the command
// line, in which case it overrides any seed from the config file. threads = 0
// means "use QOC_THREADS if set, else 1".
struct CliContext {
    std::string out_dir;
    bool out_set = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

int resolve_threads(int requested);

// Run fn(0), ..., fn(n-1) on up to `threads` workers. Items must write to
// disjoint slots; the call returns only after every item finished, so output
// assembled afterwards is deterministic regardless of scheduling. The first
// exception thrown by any item is rethrown here.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Named dense operators accepted by config files: pauli_x, pauli_y, pauli_z
// (two-level), ladder (a + a^+), number (a^+ a), identity, zero, hadamard
// (two-level). Anything else is a ConfigError; explicit matrices come
// through parse_matrix_rows instead.
ComplexMatrix named_operator(const std::string& name, int dim);

// Rows separated by ';', entries by whitespace, complex entries in the forms
// 1.5, -2i, 1+2i, 3.0-4.5e-2i. `what` names the config key in errors.
ComplexMatrix parse_matrix_rows(const std::string& rows, int dim, const std::string& what);

struct OptimizeOutcome {
    double objective = 0.0;   // the engine's own measure at the final iterate
    double infidelity = 0.0;  // recomputed from the final propagator
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

// [system]/[pulse]/[objective]/[optimizer]/[output] config run. Writes
// trace.csv (iter, J, grad_norm, wall_ms) and pulse_final.csv (t, u_1..u_n).
OptimizeOutcome cmd_optimize(Config cfg, const CliContext& ctx);

struct QslPoint {
    double horizon = 0.0;
    double best_infidelity = 0.0;
    int iterations = 0;
};

// Re-optimizes the configured problem on an inclusive horizon grid, warm
// starting each point from the previous winner rescaled in time plus
// `restarts` fresh seeded draws. A point that comes out worse than its
// predecessor triggers one retry round with three times the restarts before
// it is accepted. Writes qsl.csv (T, best_infidelity, iterations).
std::vector<QslPoint> cmd_qsl_sweep(Config cfg, const CliContext& ctx, double t_min, double t_max,
                                    int steps, int restarts = 1);

struct RbCliOptions {
    double p = 0.99;  // ambient depolarizing parameter applied after every gate
    std::vector<int> lengths = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    int sequences = 100;
    int interleave = -1;     // Clifford index to interleave; -1 for reference only
    double target_q = 1.0;   // extra depolarizing strength on the interleaved gate
    double prep_fidelity = 1.0;
    double meas_fidelity = 1.0;
};

struct RbOutcome {
    std::vector<RbPoint> reference;
    std::vector<RbPoint> interleaved;  // empty without --interleave
    RbFit reference_fit;
    RbFit interleaved_fit;
    double target_depolarization = 0.0;
    bool has_interleaved = false;
};

// Writes rb.csv (curve, length, survival, std_error, sequences) and prints
// the fitted (offset, amplitude, lambda) per curve.
RbOutcome cmd_rb(const RbCliOptions& opts, const CliContext& ctx);

struct DragCliOptions {
    double gate_time = 0.0;  // 0 sweeps [2 pi / Delta, 12 pi / Delta]
    bool first_order = true;
    double lambda_leak = 1.4142135623730951;
    double anharmonicity = 6.283185307179586;
    int sweep_points = 21;
    int n_samples = 401;
    int n_slices = 400;
};

struct DragRow {
    double gate_time = 0.0;
    double infidelity = 0.0;
    double leakage = 0.0;
};

// Writes drag.csv (t_g, infidelity, leakage), one row per gate time.
std::vector<DragRow> cmd_drag(const DragCliOptions& opts, const CliContext& ctx);

struct ShoCliOptions {
    double omega = 1.0;
    double a = 1.0;
    double horizon = 6.283185307179586;
    int n_slices = 400;
    int max_iterations = 2000;
};

struct ShoOutcome {
    double cost = 0.0;
    double x_error = 0.0;  // |x(T) - a|
    double v_error = 0.0;  // |v(T)|
    int iterations = 0;
    bool converged = false;
};

// Steers the controlled oscillator to (a, 0). Writes sho_trace.csv (t, x, v)
// on the node grid and controls.csv (t, u) on the slice grid.
ShoOutcome cmd_classical_sho(const ShoCliOptions& opts, const CliContext& ctx);

}  // namespace qoc
