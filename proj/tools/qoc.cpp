// Command-line front end: config-driven optimization plus the canned
// experiment drivers. Exit codes: 0 success, 1 engine or I/O failure,
// 2 malformed configuration or command line.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qoc/cli.hpp"
#include "qoc/config.hpp"
#include "qoc/errors.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_config) {
    if (with_config)
        cmd->add_option("--config", flags.config_path, "configuration file (INI format)")
            ->required();
    cmd->add_option("--out", flags.out_dir, "output directory for CSV files");
    cmd->add_option("--seed", flags.seed, "base seed for every random draw");
    cmd->add_option("--threads", flags.threads,
                    "worker threads (default: QOC_THREADS environment variable, else 1)");
}

qoc::CliContext make_context(const CLI::App* cmd, const CommonFlags& flags) {
    qoc::CliContext ctx;
    ctx.out_dir = flags.out_dir;
    ctx.out_set = cmd->count("--out") > 0;
    ctx.seed = flags.seed;
    ctx.seed_set = cmd->count("--seed") > 0;
    ctx.threads = flags.threads;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qoc: quantum optimal control toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    CLI::App* optimize = app.add_subcommand(
        "optimize", "run the optimization described by a config file");
    add_common(optimize, flags, true);

    CLI::App* qsl = app.add_subcommand(
        "qsl-sweep", "re-optimize the configured problem over a horizon grid");
    add_common(qsl, flags, true);
    double t_min = 1.0;
    double t_max = 2.0;
    int steps = 21;
    int restarts = 1;
    qsl->add_option("--t-min", t_min, "shortest horizon")->required();
    qsl->add_option("--t-max", t_max, "longest horizon")->required();
    qsl->add_option("--steps", steps, "grid points, inclusive of both ends");
    qsl->add_option("--restarts", restarts, "fresh random starts per grid point");

    CLI::App* rb = app.add_subcommand(
        "rb", "randomized benchmarking with a depolarizing error channel");
    add_common(rb, flags, false);
    qoc::RbCliOptions rb_opts;
    rb->add_option("--p", rb_opts.p, "depolarizing parameter applied after every Clifford");
    rb->add_option("--lengths", rb_opts.lengths, "sequence lengths")->delimiter(',');
    rb->add_option("--sequences", rb_opts.sequences, "random sequences per length");
    rb->add_option("--interleave", rb_opts.interleave,
                   "Clifford index to interleave (omit for reference only)");
    rb->add_option("--target-q", rb_opts.target_q,
                   "depolarizing parameter of the interleaved gate's own error");
    rb->add_option("--prep-fidelity", rb_opts.prep_fidelity, "state preparation fidelity");
    rb->add_option("--meas-fidelity", rb_opts.meas_fidelity, "readout fidelity");

    CLI::App* drag = app.add_subcommand(
        "drag", "three-level leakage metrics for Gaussian and DRAG pulses");
    add_common(drag, flags, false);
    qoc::DragCliOptions drag_opts;
    std::string order = "first";
    drag->add_option("--tg", drag_opts.gate_time,
                     "gate time; 0 sweeps [2 pi / Delta, 12 pi / Delta]");
    drag->add_option("--order", order, "correction order")
        ->check(CLI::IsMember({"none", "first"}));
    drag->add_option("--lambda", drag_opts.lambda_leak, "relative 1-2 coupling strength");
    drag->add_option("--delta", drag_opts.anharmonicity, "anharmonicity Delta");
    drag->add_option("--points", drag_opts.sweep_points, "sweep points when --tg is 0");
    drag->add_option("--samples", drag_opts.n_samples, "envelope samples per pulse");
    drag->add_option("--slices", drag_opts.n_slices, "propagation slices per gate");

    CLI::App* sho = app.add_subcommand(
        "classical-sho", "steer the controlled oscillator to rest at x = a");
    add_common(sho, flags, false);
    qoc::ShoCliOptions sho_opts;
    sho->add_option("--omega", sho_opts.omega, "oscillator frequency");
    sho->add_option("--a", sho_opts.a, "target position");
    sho->add_option("--horizon", sho_opts.horizon, "control horizon T");
    sho->add_option("--slices", sho_opts.n_slices, "control slices N");
    sho->add_option("--max-iterations", sho_opts.max_iterations, "gradient iteration budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* active = app.get_subcommands().front();
    const qoc::CliContext ctx = make_context(active, flags);
    try {
        if (active == optimize) {
            qoc::cmd_optimize(qoc::Config::parse_file(flags.config_path), ctx);
        } else if (active == qsl) {
            qoc::cmd_qsl_sweep(qoc::Config::parse_file(flags.config_path), ctx, t_min, t_max,
                               steps, restarts);
        } else if (active == rb) {
            qoc::cmd_rb(rb_opts, ctx);
        } else if (active == drag) {
            drag_opts.first_order = order == "first";
            qoc::cmd_drag(drag_opts, ctx);
        } else {
            qoc::cmd_classical_sho(sho_opts, ctx);
        }
    } catch (const qoc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
