#include "qoc/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include "qoc/classical.hpp"
#include "qoc/csv.hpp"
#include "qoc/errors.hpp"
#include "qoc/goat.hpp"
#include "qoc/grape.hpp"
#include "qoc/objectives.hpp"
#include "qoc/propagation.hpp"
#include "qoc/rng.hpp"

namespace qoc {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string pick_out_dir(const CliContext& ctx, const std::string& from_config) {
    if (ctx.out_set) return ctx.out_dir;
    if (!from_config.empty()) return from_config;
    return ".";
}

}  // namespace

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const char* env = std::getenv("QOC_THREADS");
    if (env != nullptr && *env != '\0') {
        int t = parse_int_token(env, "QOC_THREADS");
        if (t < 1) throw ConfigError("QOC_THREADS must be at least 1, got '" + std::string(env) + "'");
        return t;
    }
    return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex mu;
    std::exception_ptr first;
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

namespace {

// "1.5", "-2i", "1+2i", "3.0-4.5e-2i"; `what` names the config key in errors.
cplx parse_complex_token(const std::string& token, const std::string& what) {
    if (token.empty()) throw ConfigError("empty matrix entry in " + what);
    if (token.back() != 'i' && token.back() != 'I')
        return cplx(parse_double_token(token, what), 0.0);
    const std::string body = token.substr(0, token.size() - 1);
    size_t split = std::string::npos;
    for (size_t i = body.size(); i-- > 1;) {
        char c = body[i];
        if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    auto imag_part = [&](const std::string& s) {
        if (s.empty() || s == "+") return 1.0;
        if (s == "-") return -1.0;
        return parse_double_token(s, what);
    };
    if (split == std::string::npos) return cplx(0.0, imag_part(body));
    return cplx(parse_double_token(body.substr(0, split), what), imag_part(body.substr(split)));
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

ComplexMatrix parse_matrix_rows(const std::string& rows, int dim, const std::string& what) {
    std::vector<std::string> row_strs;
    std::string cur;
    for (char c : rows) {
        if (c == ';') {
            row_strs.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    row_strs.push_back(cur);
    if (static_cast<int>(row_strs.size()) != dim)
        throw ConfigError(what + ": expected " + std::to_string(dim) + " rows, got " +
                          std::to_string(row_strs.size()));
    ComplexMatrix m(dim);
    for (int r = 0; r < dim; ++r) {
        std::vector<std::string> toks = whitespace_tokens(row_strs[static_cast<size_t>(r)]);
        if (static_cast<int>(toks.size()) != dim)
            throw ConfigError(what + ": row " + std::to_string(r + 1) + " has " +
                              std::to_string(toks.size()) + " entries, expected " +
                              std::to_string(dim));
        for (int c = 0; c < dim; ++c)
            m(r, c) = parse_complex_token(toks[static_cast<size_t>(c)], what);
    }
    return m;
}

ComplexMatrix named_operator(const std::string& name, int dim) {
    auto need_qubit = [&] {
        if (dim != 2)
            throw ConfigError("operator '" + name + "' is two-level only, but dim = " +
                              std::to_string(dim));
    };
    ComplexMatrix m(dim);
    if (name == "pauli_x") {
        need_qubit();
        m(0, 1) = 1.0;
        m(1, 0) = 1.0;
    } else if (name == "pauli_y") {
        need_qubit();
        m(0, 1) = cplx(0.0, -1.0);
        m(1, 0) = cplx(0.0, 1.0);
    } else if (name == "pauli_z") {
        need_qubit();
        m(0, 0) = 1.0;
        m(1, 1) = -1.0;
    } else if (name == "hadamard") {
        need_qubit();
        const double r = 1.0 / std::sqrt(2.0);
        m(0, 0) = r;
        m(0, 1) = r;
        m(1, 0) = r;
        m(1, 1) = -r;
    } else if (name == "ladder") {
        for (int j = 1; j < dim; ++j) {
            m(j - 1, j) = std::sqrt(static_cast<double>(j));
            m(j, j - 1) = std::sqrt(static_cast<double>(j));
        }
    } else if (name == "number") {
        for (int j = 0; j < dim; ++j) m(j, j) = static_cast<double>(j);
    } else if (name == "identity") {
        m = ComplexMatrix::identity(dim);
    } else if (name == "zero") {
        // already zero
    } else {
        throw ConfigError("unknown operator name '" + name +
                          "' (expected pauli_x/pauli_y/pauli_z, hadamard, ladder, number, "
                          "identity, zero, or custom)");
    }
    return m;
}

namespace {

// Everything cmd_optimize and cmd_qsl_sweep need, assembled once from the
// config file. The pulse member matching `piecewise` carries the initial
// guess; randomize() redraws it for restarts.
struct EngineSetup {
    ControlSystem system;
    bool piecewise = true;
    PiecewisePulse pwc;
    AnalyticPulse analytic{AnsatzKind::FourierSum, 1, 1, 1.0};
    bool gate = true;
    ComplexMatrix target;
    StateVector psi0;
    StateVector psi1;
    double penalty_bandwidth = 0.0;
    std::string engine;  // grape | goat | nelder_mead
    GrapeOptions grape;
    LbfgsOptions lbfgs;
    NelderMeadOptions nm;
    OdeOptions ode;
    std::uint64_t seed = 0;
    double init_scale = 0.5;
    std::string out_dir = ".";
};

void randomize_piecewise(PiecewisePulse& p, const ControlSystem& sys, double scale,
                         std::uint64_t seed) {
    Rng rng(seed);
    for (int k = 0; k < p.n_slices(); ++k) {
        for (int c = 0; c < p.n_controls(); ++c) {
            const auto& box = sys.amplitude_limits[static_cast<size_t>(c)];
            double lo = box ? box->first : -scale;
            double hi = box ? box->second : scale;
            p.at(k, c) = rng.uniform(lo, hi);
        }
    }
}

void randomize_analytic(AnalyticPulse& p, double scale, std::uint64_t seed) {
    Rng rng(seed);
    const double t_final = p.horizon();
    for (int c = 0; c < p.n_controls(); ++c) {
        for (int k = 0; k < p.n_terms(); ++k) {
            const int base = c * p.params_per_control() + 3 * k;
            const auto& box = p.bound(base);
            if (box) {
                double amp = box->lo + (box->hi - box->lo) * rng.uniform();
                p.params()[static_cast<size_t>(base)] = box->inverse(amp);
            } else {
                p.params()[static_cast<size_t>(base)] = rng.uniform(-scale, scale);
            }
            if (p.kind() == AnsatzKind::FourierSum) {
                p.params()[static_cast<size_t>(base) + 1] =
                    rng.uniform(kPi / t_final, 4.0 * kPi / t_final);
                p.params()[static_cast<size_t>(base) + 2] = rng.uniform(0.0, 2.0 * kPi);
            } else {
                p.params()[static_cast<size_t>(base) + 1] =
                    rng.uniform(0.2 * t_final, 0.8 * t_final);
                p.params()[static_cast<size_t>(base) + 2] =
                    rng.uniform(0.1 * t_final, 0.3 * t_final);
            }
        }
    }
}

ComplexMatrix scaled(ComplexMatrix m, double s) {
    m *= cplx(s, 0.0);
    return m;
}

StateVector basis_state(int index, int dim, const std::string& what) {
    if (index < 0 || index >= dim)
        throw ConfigError(what + ": basis index " + std::to_string(index) +
                          " outside dimension " + std::to_string(dim));
    StateVector v(static_cast<size_t>(dim), cplx(0.0, 0.0));
    v[static_cast<size_t>(index)] = 1.0;
    return v;
}

EngineSetup load_setup(Config& cfg, const CliContext& ctx) {
    EngineSetup s;

    // [system]
    const int dim = cfg.get_int("system", "dim");
    if (dim < 2) throw ConfigError("[system] dim must be at least 2, got " + std::to_string(dim));
    const std::string drift_name = cfg.get_string("system", "drift", "zero");
    const double drift_scale = cfg.get_double("system", "drift_scale", 1.0);
    ComplexMatrix drift =
        drift_name == "custom"
            ? parse_matrix_rows(cfg.get_string("system", "drift_rows"), dim, "[system] drift_rows")
            : named_operator(drift_name, dim);
    s.system.drift = scaled(std::move(drift), drift_scale);
    const std::vector<std::string> control_names = cfg.get_list("system", "controls");
    for (size_t i = 0; i < control_names.size(); ++i) {
        const std::string& name = control_names[i];
        if (name == "custom") {
            const std::string key = "control_" + std::to_string(i + 1) + "_rows";
            s.system.controls.push_back(
                parse_matrix_rows(cfg.get_string("system", key), dim, "[system] " + key));
        } else {
            s.system.controls.push_back(named_operator(name, dim));
        }
    }
    if (cfg.has("system", "u_min") && !cfg.has("system", "u_max"))
        throw ConfigError("[system] u_min given without u_max");
    std::optional<std::pair<double, double>> box;
    if (cfg.has("system", "u_max")) {
        const double hi = cfg.get_double("system", "u_max");
        const double lo = cfg.get_double("system", "u_min", -hi);
        if (!(lo < hi))
            throw ConfigError("[system] amplitude box is empty: u_min = " +
                              std::to_string(lo) + ", u_max = " + std::to_string(hi));
        box = std::make_pair(lo, hi);
    }
    s.system.amplitude_limits.assign(s.system.controls.size(), box);
    try {
        s.system.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid [system]: ") + e.what());
    }
    const int n_controls = static_cast<int>(s.system.controls.size());

    // [optimizer] seed first; the pulse draw below may consume it.
    s.seed = cfg.get_seed("optimizer", "seed", 0);
    if (ctx.seed_set) s.seed = ctx.seed;

    // [pulse]
    const std::string pulse_kind = cfg.get_string("pulse", "kind");
    const double horizon = cfg.get_double("pulse", "horizon");
    if (!(horizon > 0.0)) throw ConfigError("[pulse] horizon must be positive");
    s.init_scale = cfg.get_double("pulse", "init_scale", 0.5);
    if (pulse_kind == "piecewise") {
        s.piecewise = true;
        const int n_slices = cfg.get_int("pulse", "n_slices");
        if (n_slices < 1) throw ConfigError("[pulse] n_slices must be at least 1");
        s.pwc = PiecewisePulse(n_controls, n_slices, horizon / n_slices);
        if (cfg.has("pulse", "params")) {
            std::vector<double> vals = cfg.get_double_list("pulse", "params");
            if (vals.size() != s.pwc.values().size())
                throw ConfigError("[pulse] params needs n_slices * n_controls = " +
                                  std::to_string(s.pwc.values().size()) + " values, got " +
                                  std::to_string(vals.size()));
            s.pwc.values() = std::move(vals);
            clip_to_limits(s.pwc, s.system);
        } else if (cfg.has("pulse", "init")) {
            const double fill = cfg.get_double("pulse", "init");
            std::fill(s.pwc.values().begin(), s.pwc.values().end(), fill);
            clip_to_limits(s.pwc, s.system);
        } else {
            randomize_piecewise(s.pwc, s.system, s.init_scale, Rng::mix(s.seed, 0));
        }
    } else if (pulse_kind == "fourier" || pulse_kind == "gaussian") {
        s.piecewise = false;
        const int n_terms = cfg.get_int("pulse", "n_terms", 1);
        if (n_terms < 1) throw ConfigError("[pulse] n_terms must be at least 1");
        const AnsatzKind kind =
            pulse_kind == "fourier" ? AnsatzKind::FourierSum : AnsatzKind::GaussianSum;
        s.analytic = AnalyticPulse(kind, n_controls, n_terms, horizon);
        if (box) {
            for (int c = 0; c < n_controls; ++c)
                for (int k = 0; k < n_terms; ++k)
                    s.analytic.set_bound(c * s.analytic.params_per_control() + 3 * k,
                                         BoundingTransform{box->first, box->second});
        }
        if (cfg.has("pulse", "params")) {
            std::vector<double> vals = cfg.get_double_list("pulse", "params");
            if (static_cast<int>(vals.size()) != s.analytic.n_params())
                throw ConfigError("[pulse] params needs " +
                                  std::to_string(s.analytic.n_params()) + " values, got " +
                                  std::to_string(vals.size()));
            // Explicit values are physical; bounded entries store the raw
            // preimage so the ansatz reproduces them exactly.
            for (int i = 0; i < s.analytic.n_params(); ++i) {
                const auto& b = s.analytic.bound(i);
                s.analytic.params()[static_cast<size_t>(i)] =
                    b ? b->inverse(vals[static_cast<size_t>(i)]) : vals[static_cast<size_t>(i)];
            }
        } else {
            randomize_analytic(s.analytic, s.init_scale, Rng::mix(s.seed, 0));
        }
    } else {
        throw ConfigError("[pulse] kind must be piecewise, fourier, or gaussian, got '" +
                          pulse_kind + "'");
    }

    // [objective]
    const std::string obj_kind = cfg.get_string("objective", "kind");
    if (obj_kind == "gate") {
        s.gate = true;
        const std::string target_name = cfg.get_string("objective", "target");
        s.target = target_name == "custom"
                       ? parse_matrix_rows(cfg.get_string("objective", "target_rows"), dim,
                                           "[objective] target_rows")
                       : named_operator(target_name, dim);
    } else if (obj_kind == "state") {
        s.gate = false;
        s.psi0 = basis_state(cfg.get_int("objective", "initial_state"), dim,
                             "[objective] initial_state");
        s.psi1 = basis_state(cfg.get_int("objective", "target_state"), dim,
                             "[objective] target_state");
    } else {
        throw ConfigError("[objective] kind must be gate or state, got '" + obj_kind + "'");
    }
    s.penalty_bandwidth = cfg.get_double("objective", "penalty_bandwidth", 0.0);
    if (s.penalty_bandwidth < 0.0)
        throw ConfigError("[objective] penalty_bandwidth must be nonnegative");

    // [optimizer]
    s.engine = cfg.get_string("optimizer", "kind", s.piecewise ? "grape" : "goat");
    if (s.engine == "grape") {
        if (!s.piecewise)
            throw ConfigError("[optimizer] kind = grape requires [pulse] kind = piecewise");
        s.grape.max_iterations = cfg.get_int("optimizer", "max_iterations", 500);
        const std::string scheme = cfg.get_string("optimizer", "scheme", "concurrent");
        if (scheme == "concurrent")
            s.grape.scheme = UpdateScheme::Concurrent;
        else if (scheme == "sequential")
            s.grape.scheme = UpdateScheme::Sequential;
        else if (scheme == "hybrid")
            s.grape.scheme = UpdateScheme::Hybrid;
        else
            throw ConfigError("[optimizer] scheme must be concurrent, sequential, or hybrid");
        s.grape.hybrid_block = cfg.get_int("optimizer", "hybrid_block", s.grape.hybrid_block);
        s.grape.j_stop = cfg.get_double("optimizer", "j_stop", s.grape.j_stop);
        s.grape.gradient_tolerance =
            cfg.get_double("optimizer", "gradient_tolerance", s.grape.gradient_tolerance);
        s.grape.initial_step = cfg.get_double("optimizer", "initial_step", s.grape.initial_step);
        if (s.penalty_bandwidth > 0.0 && s.grape.scheme != UpdateScheme::Concurrent)
            throw ConfigError("[objective] penalty_bandwidth needs the concurrent scheme");
    } else if (s.engine == "goat" || s.engine == "nelder_mead") {
        if (s.piecewise)
            throw ConfigError("[optimizer] kind = " + s.engine +
                              " requires an analytic [pulse] kind (fourier or gaussian)");
        if (s.penalty_bandwidth > 0.0)
            throw ConfigError("[objective] penalty_bandwidth is a grape-only option");
        if (s.engine == "goat") {
            s.lbfgs.max_iterations = cfg.get_int("optimizer", "max_iterations", 500);
            s.lbfgs.gradient_tolerance =
                cfg.get_double("optimizer", "gradient_tolerance", s.lbfgs.gradient_tolerance);
            s.lbfgs.value_tolerance =
                cfg.get_double("optimizer", "tolerance", s.lbfgs.value_tolerance);
        } else {
            s.nm.max_iterations = cfg.get_int("optimizer", "max_iterations", 2000);
            s.nm.value_spread_tolerance =
                cfg.get_double("optimizer", "tolerance", s.nm.value_spread_tolerance);
        }
    } else {
        throw ConfigError("[optimizer] kind must be grape, goat, or nelder_mead, got '" +
                          s.engine + "'");
    }

    // [output]
    s.out_dir = pick_out_dir(ctx, cfg.get_string("output", "directory", ""));

    cfg.require_consumed();
    return s;
}

ComplexMatrix pwc_unitary(const ControlSystem& sys, const PiecewisePulse& p) {
    ComplexMatrix u = ComplexMatrix::identity(sys.dim());
    std::vector<double> amps(static_cast<size_t>(p.n_controls()));
    for (int k = 0; k < p.n_slices(); ++k) {
        for (int c = 0; c < p.n_controls(); ++c) amps[static_cast<size_t>(c)] = p.at(k, c);
        u = expm_hermitian(sys.hamiltonian(amps), cplx(0.0, -p.dt())) * u;
    }
    return u;
}

HamiltonianFn analytic_hamiltonian(ControlSystem sys, AnalyticPulse pulse) {
    return [sys = std::move(sys), pulse = std::move(pulse)](double t) {
        return sys.hamiltonian(sample_pulse(pulse, t));
    };
}

struct EngineRun {
    PiecewisePulse pwc;
    AnalyticPulse analytic{AnsatzKind::FourierSum, 1, 1, 1.0};
    std::vector<double> j_trace;
    std::vector<double> grad_trace;
    std::vector<double> wall_trace;
    double objective = 0.0;
    double infidelity = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

EngineRun run_engine(const EngineSetup& s) {
    EngineRun out;
    ComplexMatrix u_final;
    if (s.engine == "grape") {
        Objective obj;
        obj.kind = s.gate ? ObjectiveKind::GateFidelity : ObjectiveKind::StateOverlap;
        if (s.gate) {
            obj.target_unitary = s.target;
        } else {
            obj.initial_state = s.psi0;
            obj.target_state = s.psi1;
        }
        if (s.penalty_bandwidth > 0.0)
            obj.penalties.push_back({PenaltyKind::Bandwidth, s.penalty_bandwidth});
        GrapeResult r = grape_optimize(s.system, s.pwc, obj, s.grape);
        out.pwc = r.pulse;
        out.j_trace = r.trace;
        out.grad_trace = r.gradient_trace;
        out.wall_trace = r.wall_ms_trace;
        out.objective = r.objective;
        out.iterations = r.iterations;
        out.converged = r.converged;
        out.reason = r.reason;
        u_final = pwc_unitary(s.system, r.pulse);
    } else {
        Objective obj;
        obj.kind = s.gate ? ObjectiveKind::ProjectiveSUInfidelity : ObjectiveKind::StateOverlap;
        if (s.gate) {
            obj.target_unitary = s.target;
        } else {
            obj.initial_state = s.psi0;
            obj.target_state = s.psi1;
        }
        if (s.engine == "goat") {
            GoatProblem prob{s.system, s.analytic, obj, {}, s.ode, s.lbfgs};
            GoatResult r = goat_optimize(prob);
            out.analytic = r.pulse;
            out.j_trace = r.run.value_trace;
            out.grad_trace = r.run.gradient_trace;
            out.wall_trace = r.run.wall_ms_trace;
            out.objective = r.run.value;
            out.iterations = r.run.iterations;
            out.converged = r.run.converged;
            out.reason = r.run.reason;
        } else {
            const int dim = s.system.dim();
            ValueFn fn = [&s, dim](const std::vector<double>& x) {
                AnalyticPulse p = s.analytic;
                p.params() = x;
                ComplexMatrix u =
                    evolve_unitary(analytic_hamiltonian(s.system, p), dim, p.horizon(), s.ode);
                return s.gate ? projective_su_infidelity(s.target, u)
                              : 1.0 - state_overlap(s.psi1, u, s.psi0);
            };
            OptimizeResult r = nelder_mead_minimize(fn, s.analytic.params(), s.nm);
            out.analytic = s.analytic;
            out.analytic.params() = r.x;
            out.j_trace = r.value_trace;
            out.grad_trace = r.gradient_trace;
            out.wall_trace = r.wall_ms_trace;
            out.objective = r.value;
            out.iterations = r.iterations;
            out.converged = r.converged;
            out.reason = r.reason;
        }
        u_final = evolve_unitary(analytic_hamiltonian(s.system, out.analytic), s.system.dim(),
                                 out.analytic.horizon(), s.ode);
    }
    out.infidelity = s.gate ? 1.0 - gate_fidelity(s.target, u_final)
                            : 1.0 - state_overlap(s.psi1, u_final, s.psi0);
    return out;
}

void write_trace_csv(const std::string& path, const EngineRun& r) {
    CsvWriter csv(path, {"iter", "J", "grad_norm", "wall_ms"});
    for (size_t i = 0; i < r.j_trace.size(); ++i) {
        csv.row({std::to_string(i), CsvWriter::num(r.j_trace[i]),
                 CsvWriter::num(i < r.grad_trace.size() ? r.grad_trace[i] : 0.0),
                 CsvWriter::num(i < r.wall_trace.size() ? r.wall_trace[i] : 0.0)});
    }
}

void write_pulse_csv(const std::string& path, const EngineRun& r, bool piecewise) {
    const int n_controls = piecewise ? r.pwc.n_controls() : r.analytic.n_controls();
    std::vector<std::string> header = {"t"};
    for (int c = 1; c <= n_controls; ++c) header.push_back("u_" + std::to_string(c));
    CsvWriter csv(path, header);
    std::vector<std::string> fields(header.size());
    if (piecewise) {
        for (int k = 0; k < r.pwc.n_slices(); ++k) {
            fields[0] = CsvWriter::num(k * r.pwc.dt());
            for (int c = 0; c < n_controls; ++c)
                fields[static_cast<size_t>(c) + 1] = CsvWriter::num(r.pwc.at(k, c));
            csv.row(fields);
        }
    } else {
        const int samples = 201;
        const double t_final = r.analytic.horizon();
        for (int i = 0; i < samples; ++i) {
            const double t = t_final * i / (samples - 1);
            fields[0] = CsvWriter::num(t);
            for (int c = 0; c < n_controls; ++c)
                fields[static_cast<size_t>(c) + 1] = CsvWriter::num(r.analytic.value(c, t));
            csv.row(fields);
        }
    }
}

}  // namespace

OptimizeOutcome cmd_optimize(Config cfg, const CliContext& ctx) {
    EngineSetup s = load_setup(cfg, ctx);
    EngineRun r = run_engine(s);
    ensure_dir(s.out_dir);
    write_trace_csv(join(s.out_dir, "trace.csv"), r);
    write_pulse_csv(join(s.out_dir, "pulse_final.csv"), r, s.piecewise);
    std::printf("optimize: engine = %s, J = %.12g, infidelity = %.12g, iterations = %d, %s\n",
                s.engine.c_str(), r.objective, r.infidelity, r.iterations, r.reason.c_str());
    OptimizeOutcome out;
    out.objective = r.objective;
    out.infidelity = r.infidelity;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.reason = r.reason;
    return out;
}

namespace {

AnalyticPulse rescale_analytic(const AnalyticPulse& src, double new_horizon) {
    AnalyticPulse dst(src.kind(), src.n_controls(), src.n_terms(), new_horizon);
    for (int i = 0; i < src.n_params(); ++i)
        if (src.bound(i)) dst.set_bound(i, *src.bound(i));
    dst.params() = src.params();
    // Frequencies scale inversely with time, centers and widths directly;
    // amplitudes carry over. Only unbounded entries are touched, so raw
    // values are physical values here.
    const double stretch = new_horizon / src.horizon();
    for (int c = 0; c < src.n_controls(); ++c) {
        for (int k = 0; k < src.n_terms(); ++k) {
            const size_t base =
                static_cast<size_t>(c) * static_cast<size_t>(src.params_per_control()) +
                3 * static_cast<size_t>(k);
            if (src.kind() == AnsatzKind::FourierSum) {
                dst.params()[base + 1] /= stretch;
            } else {
                dst.params()[base + 1] *= stretch;
                dst.params()[base + 2] *= stretch;
            }
        }
    }
    return dst;
}

// One optimization at horizon `t_final` from either the warm-started pulse
// (when given) or a fresh draw for stream `draw`.
EngineRun qsl_candidate(const EngineSetup& base, double t_final, const EngineRun* warm,
                        std::uint64_t draw_seed) {
    EngineSetup point = base;
    if (base.piecewise) {
        if (warm) {
            point.pwc = warm->pwc.rescaled_to(t_final);
            clip_to_limits(point.pwc, point.system);
        } else {
            point.pwc = PiecewisePulse(base.pwc.n_controls(), base.pwc.n_slices(),
                                       t_final / base.pwc.n_slices());
            randomize_piecewise(point.pwc, point.system, point.init_scale, draw_seed);
        }
    } else {
        if (warm) {
            point.analytic = rescale_analytic(warm->analytic, t_final);
        } else {
            point.analytic = rescale_analytic(base.analytic, t_final);
            randomize_analytic(point.analytic, point.init_scale, draw_seed);
        }
    }
    return run_engine(point);
}

}  // namespace

std::vector<QslPoint> cmd_qsl_sweep(Config cfg, const CliContext& ctx, double t_min, double t_max,
                                    int steps, int restarts) {
    if (steps < 1) throw ConfigError("qsl-sweep needs at least one grid point");
    if (!(t_min > 0.0)) throw ConfigError("qsl-sweep horizons must be positive");
    if (steps > 1 && !(t_max > t_min))
        throw ConfigError("qsl-sweep needs t_max > t_min when steps > 1");
    if (restarts < 0) throw ConfigError("qsl-sweep restarts must be nonnegative");

    EngineSetup base = load_setup(cfg, ctx);
    std::vector<QslPoint> out;
    EngineRun prev;
    bool have_prev = false;
    for (int i = 0; i < steps; ++i) {
        const double t_final =
            steps == 1 ? t_min : t_min + (t_max - t_min) * i / static_cast<double>(steps - 1);
        const std::uint64_t point_seed = Rng::mix(base.seed, static_cast<std::uint64_t>(i) + 1);
        EngineRun best;
        bool have_best = false;
        auto consider = [&](EngineRun run) {
            if (!have_best || run.infidelity < best.infidelity) {
                best = std::move(run);
                have_best = true;
            }
        };
        if (have_prev) consider(qsl_candidate(base, t_final, &prev, 0));
        const int fresh = have_prev ? restarts : std::max(1, restarts);
        for (int r = 0; r < fresh; ++r)
            consider(qsl_candidate(base, t_final, nullptr,
                                   Rng::mix(point_seed, static_cast<std::uint64_t>(r))));
        // The reachable set only grows with the horizon, so a point that
        // lands above its predecessor means a restart got stuck; retry
        // harder once before accepting it.
        if (have_prev && have_best &&
            best.infidelity > out.back().best_infidelity + 1e-12) {
            const int extra = 3 * std::max(1, restarts);
            for (int r = 0; r < extra; ++r)
                consider(qsl_candidate(base, t_final, nullptr,
                                       Rng::mix(point_seed,
                                                static_cast<std::uint64_t>(fresh + r))));
        }
        out.push_back({t_final, best.infidelity, best.iterations});
        prev = best;
        have_prev = true;
    }

    ensure_dir(base.out_dir);
    CsvWriter csv(join(base.out_dir, "qsl.csv"), {"T", "best_infidelity", "iterations"});
    for (const QslPoint& p : out)
        csv.row({CsvWriter::num(p.horizon), CsvWriter::num(p.best_infidelity),
                 std::to_string(p.iterations)});
    std::printf("qsl-sweep: %d horizons in [%.12g, %.12g], final infidelity %.12g\n", steps,
                t_min, steps == 1 ? t_min : t_max, out.back().best_infidelity);
    return out;
}

RbOutcome cmd_rb(const RbCliOptions& opts, const CliContext& ctx) {
    if (opts.p < 0.0 || opts.p > 1.0)
        throw ConfigError("rb: depolarizing parameter p must lie in [0, 1]");
    if (opts.target_q < 0.0 || opts.target_q > 1.0)
        throw ConfigError("rb: interleaved gate parameter q must lie in [0, 1]");
    if (opts.prep_fidelity < 0.0 || opts.prep_fidelity > 1.0 || opts.meas_fidelity < 0.0 ||
        opts.meas_fidelity > 1.0)
        throw ConfigError("rb: SPAM fidelities must lie in [0, 1]");
    if (opts.lengths.empty()) throw ConfigError("rb: need at least one sequence length");
    for (int len : opts.lengths)
        if (len < 1) throw ConfigError("rb: sequence lengths must be at least 1");
    if (opts.sequences < 2) throw ConfigError("rb: need at least 2 sequences per length");

    const CliffordGroup1Q group = build_clifford_group_1q();
    if (opts.interleave >= group.size())
        throw ConfigError("rb: interleave index must be below " + std::to_string(group.size()));
    const QuantumChannel error = depolarizing_channel(2, opts.p);
    SpamModel spam;
    spam.prep_fidelity = opts.prep_fidelity;
    spam.meas_fidelity = opts.meas_fidelity;
    const int threads = resolve_threads(ctx.threads);

    RbOutcome out;
    if (opts.interleave < 0) {
        // Sequence seeds depend only on (seed, length, slot), so splitting
        // the lengths across workers reproduces the single-call result.
        const int n = static_cast<int>(opts.lengths.size());
        out.reference.resize(static_cast<size_t>(n));
        parallel_for(n, threads, [&](int i) {
            RbOptions ro;
            ro.lengths = {opts.lengths[static_cast<size_t>(i)]};
            ro.sequences = opts.sequences;
            ro.seed = ctx.seed;
            out.reference[static_cast<size_t>(i)] = rb_experiment(group, error, spam, ro)[0];
        });
        out.reference_fit = fit_rb_decay(out.reference);
    } else {
        RbOptions ro;
        ro.lengths = opts.lengths;
        ro.sequences = opts.sequences;
        ro.seed = ctx.seed;
        const QuantumChannel target_error = depolarizing_channel(2, opts.target_q);
        InterleavedResult r =
            interleaved_rb(group, opts.interleave, error, target_error, spam, ro);
        out.reference = r.reference;
        out.interleaved = r.interleaved;
        out.reference_fit = fit_rb_decay(r.reference);
        out.interleaved_fit = fit_rb_decay(r.interleaved);
        out.target_depolarization = r.target_depolarization;
        out.has_interleaved = true;
    }

    const std::string dir = pick_out_dir(ctx, "");
    ensure_dir(dir);
    CsvWriter csv(join(dir, "rb.csv"),
                  {"curve", "length", "survival", "std_error", "sequences"});
    auto emit = [&csv](const char* curve, const std::vector<RbPoint>& points) {
        for (const RbPoint& pt : points)
            csv.row({curve, std::to_string(pt.length), CsvWriter::num(pt.mean),
                     CsvWriter::num(pt.std_error), std::to_string(pt.sequences)});
    };
    emit("reference", out.reference);
    emit("interleaved", out.interleaved);

    std::printf("rb: reference fit p0 = %.12g, A = %.12g, lambda = %.12g\n",
                out.reference_fit.offset, out.reference_fit.amplitude, out.reference_fit.lambda);
    if (out.has_interleaved)
        std::printf("rb: interleaved fit p0 = %.12g, A = %.12g, lambda = %.12g, target q = %.12g\n",
                    out.interleaved_fit.offset, out.interleaved_fit.amplitude,
                    out.interleaved_fit.lambda, out.target_depolarization);
    return out;
}

std::vector<DragRow> cmd_drag(const DragCliOptions& opts, const CliContext& ctx) {
    if (opts.anharmonicity == 0.0) throw ConfigError("drag: anharmonicity must be nonzero");
    if (!(opts.lambda_leak > 0.0)) throw ConfigError("drag: lambda_leak must be positive");
    if (opts.n_samples < 2) throw ConfigError("drag: need at least 2 envelope samples");
    if (opts.n_slices < 100) throw ConfigError("drag: need at least 100 propagation slices");
    if (opts.gate_time <= 0.0 && opts.sweep_points < 1)
        throw ConfigError("drag: sweep needs at least one point");

    ThreeLevelSystem sys;
    sys.omega1 = 0.0;
    sys.anharmonicity = opts.anharmonicity;
    sys.lambda_leak = opts.lambda_leak;
    sys.drive_frequency = 0.0;  // resonant drive
    sys.validate();

    std::vector<double> gate_times;
    if (opts.gate_time > 0.0) {
        gate_times.push_back(opts.gate_time);
    } else {
        const double lo = 2.0 * kPi / std::abs(opts.anharmonicity);
        const double hi = 12.0 * kPi / std::abs(opts.anharmonicity);
        for (int i = 0; i < opts.sweep_points; ++i)
            gate_times.push_back(opts.sweep_points == 1
                                     ? lo
                                     : lo + (hi - lo) * i / (opts.sweep_points - 1.0));
    }

    std::vector<DragRow> rows(gate_times.size());
    const int threads = resolve_threads(ctx.threads);
    parallel_for(static_cast<int>(gate_times.size()), threads, [&](int i) {
        const double tg = gate_times[static_cast<size_t>(i)];
        const std::vector<double> env = gaussian_envelope(opts.n_samples, tg);
        DragPulse pulse;
        if (opts.first_order) {
            pulse = first_order_drag(env, tg, opts.anharmonicity, opts.lambda_leak);
        } else {
            pulse.u_x = env;
            pulse.u_y.assign(env.size(), 0.0);
            pulse.delta1.assign(env.size(), 0.0);
            pulse.gate_time = tg;
        }
        const GateMetrics m = simulate_3level_gate(sys, pulse, opts.n_slices);
        rows[static_cast<size_t>(i)] = {tg, m.infidelity, m.leakage};
    });

    const std::string dir = pick_out_dir(ctx, "");
    ensure_dir(dir);
    CsvWriter csv(join(dir, "drag.csv"), {"t_g", "infidelity", "leakage"});
    for (const DragRow& r : rows)
        csv.row({CsvWriter::num(r.gate_time), CsvWriter::num(r.infidelity),
                 CsvWriter::num(r.leakage)});
    std::printf("drag: %zu gate time(s), order %s, last infidelity = %.12g, leakage = %.12g\n",
                rows.size(), opts.first_order ? "first" : "none", rows.back().infidelity,
                rows.back().leakage);
    return rows;
}

ShoOutcome cmd_classical_sho(const ShoCliOptions& opts, const CliContext& ctx) {
    if (!(opts.omega > 0.0)) throw ConfigError("classical-sho: omega must be positive");
    if (!(opts.horizon > 0.0)) throw ConfigError("classical-sho: horizon must be positive");
    if (opts.n_slices < 1) throw ConfigError("classical-sho: need at least one slice");
    if (opts.max_iterations < 1) throw ConfigError("classical-sho: need at least one iteration");

    const ShoProblem prob = sho_problem(opts.omega, opts.a);
    PmpOptions po;
    po.max_iterations = opts.max_iterations;
    const std::vector<double> x0 = {0.0, 0.0};
    const std::vector<double> u0(static_cast<size_t>(opts.n_slices), 0.0);
    PmpResult r = pmp_optimize(prob.system, prob.cost, x0, u0, opts.n_slices, opts.horizon, po);

    const std::string dir = pick_out_dir(ctx, "");
    ensure_dir(dir);
    const double dt = opts.horizon / opts.n_slices;
    {
        CsvWriter csv(join(dir, "sho_trace.csv"), {"t", "x", "v"});
        for (int j = 0; j <= opts.n_slices; ++j) {
            const double* node = r.trajectory.node(j);
            csv.row({CsvWriter::num(j * dt), CsvWriter::num(node[0]), CsvWriter::num(node[1])});
        }
    }
    {
        CsvWriter csv(join(dir, "controls.csv"), {"t", "u"});
        for (int k = 0; k < opts.n_slices; ++k)
            csv.row({CsvWriter::num(k * dt), CsvWriter::num(r.controls[static_cast<size_t>(k)])});
    }

    const std::vector<double> xt = r.trajectory.terminal();
    ShoOutcome out;
    out.cost = r.cost;
    out.x_error = std::abs(xt[0] - opts.a);
    out.v_error = std::abs(xt[1]);
    out.iterations = r.iterations;
    out.converged = r.converged;
    std::printf(
        "classical-sho: cost = %.12g, |x(T) - a| = %.12g, |v(T)| = %.12g, iterations = %d\n",
        out.cost, out.x_error, out.v_error, out.iterations);
    return out;
}

}  // namespace qoc
