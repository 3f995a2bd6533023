#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "qoc/cli.hpp"
#include "qoc/config.hpp"
#include "qoc/csv.hpp"
#include "qoc/errors.hpp"

using namespace qoc;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Fresh scratch directory per tag so reruns never see stale files.
std::string scratch(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / "qoc_cli_tests" / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find("\r\n", pos);
        REQUIRE(end != std::string::npos);  // every row CRLF-terminated
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 2;
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// trace.csv with the wall_ms column blanked, for determinism comparisons:
// the wall clock is the one honest nondeterminism in the file.
std::string mask_wall_ms(const std::string& text) {
    std::vector<std::string> lines = csv_lines(text);
    std::string out;
    for (size_t i = 0; i < lines.size(); ++i) {
        std::vector<std::string> fields = split_fields(lines[i]);
        REQUIRE(fields.size() == 4);
        if (i > 0) fields[3] = "-";
        out += fields[0] + "," + fields[1] + "," + fields[2] + "," + fields[3] + "\r\n";
    }
    return out;
}

CliContext ctx_with(const std::string& out_dir, std::uint64_t seed, int threads = 1) {
    CliContext ctx;
    ctx.out_dir = out_dir;
    ctx.out_set = true;
    ctx.seed = seed;
    ctx.seed_set = true;
    ctx.threads = threads;
    return ctx;
}

const char* kBangBangConfig = R"(
[system]
dim = 2
controls = pauli_x
u_max = 1.0

[pulse]
kind = piecewise
n_slices = 32
horizon = 2.0
init = 0.9

[objective]
kind = gate
target = pauli_x

[optimizer]
kind = grape
max_iterations = 400
)";

}  // namespace

TEST_CASE("config parser: sections, comments, lists, and strict key accounting") {
    Config cfg = Config::parse_string(
        "# leading comment\n"
        "[system]\n"
        "dim = 3        ; trailing comment\n"
        "controls = pauli_x , pauli_y\n"
        "\n"
        "[pulse]\n"
        "horizon = 1.5e1\n",
        "inline.cfg");
    CHECK(cfg.has("system", "dim"));
    CHECK(!cfg.has("system", "horizon"));
    CHECK(cfg.get_int("system", "dim") == 3);
    std::vector<std::string> controls = cfg.get_list("system", "controls");
    REQUIRE(controls.size() == 2);
    CHECK(controls[0] == "pauli_x");
    CHECK(controls[1] == "pauli_y");
    CHECK(cfg.get_double("pulse", "horizon") == 15.0);
    CHECK_NOTHROW(cfg.require_consumed());

    CHECK(cfg.get_double("pulse", "missing", 2.5) == 2.5);
    CHECK_THROWS_AS(cfg.get_string("pulse", "missing"), ConfigError);
}

TEST_CASE("config parser: unconsumed keys are named, parse errors are located") {
    Config cfg = Config::parse_string("[system]\ndim = 2\ntypo_key = 1\n", "bad.cfg");
    cfg.get_int("system", "dim");
    CHECK_THROWS_WITH_AS(cfg.require_consumed(),
                         doctest::Contains("[system] typo_key"), ConfigError);

    CHECK_THROWS_WITH_AS(Config::parse_string("[s]\nno equals sign\n", "x.cfg"),
                         doctest::Contains("x.cfg:2"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("key = 1\n"), ConfigError);          // before any section
    CHECK_THROWS_AS(Config::parse_string("[s]\na = 1\na = 2\n"), ConfigError);  // duplicate
    CHECK_THROWS_AS(Config::parse_string("[s\na = 1\n"), ConfigError);        // broken header
    CHECK_THROWS_AS(Config::parse_file("/nonexistent/qoc.cfg"), ConfigError);

    Config nums = Config::parse_string("[s]\na = 1.5x\nb = ,\n");
    CHECK_THROWS_WITH_AS(nums.get_double("s", "a"), doctest::Contains("[s] a"), ConfigError);
    CHECK_THROWS_AS(nums.get_double_list("s", "b"), ConfigError);
}

TEST_CASE("named operators and dense matrix parsing") {
    ComplexMatrix sx = named_operator("pauli_x", 2);
    CHECK(sx(0, 1) == cplx(1.0, 0.0));
    CHECK(sx(0, 0) == cplx(0.0, 0.0));
    ComplexMatrix sy = named_operator("pauli_y", 2);
    CHECK(sy(0, 1) == cplx(0.0, -1.0));
    CHECK(sy(1, 0) == cplx(0.0, 1.0));
    ComplexMatrix ladder = named_operator("ladder", 3);
    CHECK(ladder(0, 1) == cplx(1.0, 0.0));
    CHECK(ladder(1, 2).real() == doctest::Approx(std::sqrt(2.0)));
    CHECK(ladder(2, 1).real() == doctest::Approx(std::sqrt(2.0)));
    CHECK(named_operator("number", 3)(2, 2) == cplx(2.0, 0.0));
    CHECK(named_operator("identity", 4)(3, 3) == cplx(1.0, 0.0));
    CHECK_THROWS_AS(named_operator("pauli_x", 3), ConfigError);
    CHECK_THROWS_AS(named_operator("sigma_q", 2), ConfigError);

    ComplexMatrix m = parse_matrix_rows("0 1+1i; 1-1i 0", 2, "test");
    CHECK(m(0, 1) == cplx(1.0, 1.0));
    CHECK(m(1, 0) == cplx(1.0, -1.0));
    ComplexMatrix t = parse_matrix_rows("1 0; 0 -2.5e-1i", 2, "test");
    CHECK(t(1, 1) == cplx(0.0, -0.25));
    CHECK(parse_matrix_rows("i -i; 2I 0", 2, "test")(0, 0) == cplx(0.0, 1.0));
    CHECK(parse_matrix_rows("i -i; 2I 0", 2, "test")(1, 0) == cplx(0.0, 2.0));
    CHECK_THROWS_AS(parse_matrix_rows("0 1; 1", 2, "test"), ConfigError);     // short row
    CHECK_THROWS_AS(parse_matrix_rows("0 1", 2, "test"), ConfigError);        // missing row
    CHECK_THROWS_AS(parse_matrix_rows("0 zz; 0 0", 2, "test"), ConfigError);  // bad entry
}

TEST_CASE("csv writer: rfc 4180 shape and 17-digit round trips") {
    const std::string dir = scratch("csv");
    const std::string path = dir + "/t.csv";
    {
        CsvWriter csv(path, {"a", "b"});
        csv.row({CsvWriter::num(0.1), "plain"});
        csv.row({CsvWriter::num(1.0), "needs,quote"});
        csv.row({CsvWriter::num(-2.5e300), "em\"bedded"});
        CHECK(csv.rows_written() == 3);
        CHECK_THROWS_AS(csv.row({"too", "many", "fields"}), DimMismatch);
    }
    const std::string text = read_file(path);
    std::vector<std::string> lines = csv_lines(text);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "a,b");
    CHECK(lines[1] == "0.10000000000000001,plain");
    CHECK(lines[2] == "1,\"needs,quote\"");
    CHECK(lines[3].find("\"em\"\"bedded\"") != std::string::npos);

    for (double v : {1.0 / 3.0, 0.1, -2.5e300, 6.02e23, 1e-17}) {
        CHECK(std::strtod(CsvWriter::num(v).c_str(), nullptr) == v);
    }
    CHECK_THROWS_AS(CsvWriter("/nonexistent-dir/x.csv", {"a"}), IoError);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
    std::vector<int> hits(257, 0);
    std::atomic<int> sum{0};
    parallel_for(257, 8, [&](int i) {
        hits[static_cast<size_t>(i)] += 1;
        sum.fetch_add(i);
    });
    for (int h : hits) CHECK(h == 1);
    CHECK(sum.load() == 257 * 256 / 2);

    CHECK_THROWS_AS(parallel_for(64, 4,
                                 [](int i) {
                                     if (i == 13) throw OutOfRange("boom");
                                 }),
                    OutOfRange);

    unsetenv("QOC_THREADS");
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) == 1);
    setenv("QOC_THREADS", "5", 1);
    CHECK(resolve_threads(0) == 5);
    CHECK(resolve_threads(2) == 2);  // explicit flag wins
    setenv("QOC_THREADS", "soup", 1);
    CHECK_THROWS_AS(resolve_threads(0), ConfigError);
    unsetenv("QOC_THREADS");
}

TEST_CASE("cmd_optimize: bundled pi-pulse config trains to J > 1 - 1e-8") {
    const std::string dir = scratch("optimize_pi");
    Config cfg = Config::parse_file(QOC_QUBIT_PI_CFG);
    OptimizeOutcome out = cmd_optimize(std::move(cfg), ctx_with(dir, 0));
    CHECK(out.objective > 1.0 - 1e-8);
    CHECK(out.infidelity < 1e-8);
    CHECK(out.converged);

    const std::string trace = read_file(dir + "/trace.csv");
    std::vector<std::string> lines = csv_lines(trace);
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0] == "iter,J,grad_norm,wall_ms");
    CHECK(static_cast<int>(lines.size()) == out.iterations + 2);  // header + J0 row
    std::vector<std::string> first = split_fields(lines[1]);
    std::vector<std::string> last = split_fields(lines.back());
    CHECK(first[0] == "0");
    CHECK(std::stod(last[1]) > std::stod(first[1]));  // ascent
    CHECK(std::stod(last[2]) >= 0.0);
    CHECK(std::stod(last[3]) >= std::stod(first[3]));  // wall clock is monotone

    std::vector<std::string> pulse_lines = csv_lines(read_file(dir + "/pulse_final.csv"));
    REQUIRE(pulse_lines.size() == 21);  // header + 20 slices
    CHECK(pulse_lines[0] == "t,u_1");
    std::vector<std::string> row0 = split_fields(pulse_lines[1]);
    CHECK(std::stod(row0[0]) == 0.0);
}

TEST_CASE("cmd_optimize: reruns with one seed reproduce the files byte for byte") {
    const std::string config =
        "[system]\n"
        "dim = 2\n"
        "controls = pauli_x, pauli_y\n"
        "[pulse]\n"
        "kind = piecewise\n"
        "n_slices = 16\n"
        "horizon = 1.5\n"
        "[objective]\n"
        "kind = gate\n"
        "target = hadamard\n"
        "[optimizer]\n"
        "kind = grape\n"
        "max_iterations = 60\n";
    const std::string d1 = scratch("repro_a");
    const std::string d2 = scratch("repro_b");
    cmd_optimize(Config::parse_string(config), ctx_with(d1, 42));
    cmd_optimize(Config::parse_string(config), ctx_with(d2, 42));
    // Random initial pulse, same seed: identical trajectories. Only the wall
    // clock column may differ between the runs.
    CHECK(mask_wall_ms(read_file(d1 + "/trace.csv")) ==
          mask_wall_ms(read_file(d2 + "/trace.csv")));
    CHECK(read_file(d1 + "/pulse_final.csv") == read_file(d2 + "/pulse_final.csv"));

    const std::string d3 = scratch("repro_c");
    cmd_optimize(Config::parse_string(config), ctx_with(d3, 43));
    CHECK(read_file(d1 + "/pulse_final.csv") != read_file(d3 + "/pulse_final.csv"));
}

TEST_CASE("cmd_optimize: goat and nelder_mead engines drive analytic pulses") {
    const std::string goat_config =
        "[system]\n"
        "dim = 2\n"
        "controls = pauli_x, pauli_y\n"
        "[pulse]\n"
        "kind = fourier\n"
        "n_terms = 2\n"
        "horizon = 3.0\n"
        "[objective]\n"
        "kind = gate\n"
        "target = hadamard\n"
        "[optimizer]\n"
        "kind = goat\n"
        "max_iterations = 300\n";
    double best = 1.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const std::string dir = scratch("goat_" + std::to_string(seed));
        OptimizeOutcome out = cmd_optimize(Config::parse_string(goat_config),
                                           ctx_with(dir, seed));
        best = std::min(best, out.infidelity);
        std::vector<std::string> lines = csv_lines(read_file(dir + "/pulse_final.csv"));
        CHECK(lines.size() == 202);  // header + 201 samples
        CHECK(lines[0] == "t,u_1,u_2");
    }
    CHECK(best < 1e-4);

    const std::string nm_config =
        "[system]\n"
        "dim = 2\n"
        "controls = pauli_x\n"
        "[pulse]\n"
        "kind = gaussian\n"
        "n_terms = 1\n"
        "horizon = 4.0\n"
        "[objective]\n"
        "kind = state\n"
        "initial_state = 0\n"
        "target_state = 1\n"
        "[optimizer]\n"
        "kind = nelder_mead\n"
        "max_iterations = 600\n";
    best = 1.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const std::string dir = scratch("nm_" + std::to_string(seed));
        OptimizeOutcome out = cmd_optimize(Config::parse_string(nm_config), ctx_with(dir, seed));
        best = std::min(best, out.infidelity);
    }
    CHECK(best < 1e-3);
}

TEST_CASE("cmd_optimize: schema violations come back as ConfigError") {
    const std::string dir = scratch("schema");
    auto run = [&](const std::string& text) {
        return cmd_optimize(Config::parse_string(text), ctx_with(dir, 0));
    };
    // grape needs a piecewise pulse
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = pauli_x\n"
                        "[pulse]\nkind = fourier\nhorizon = 1\n"
                        "[objective]\nkind = gate\ntarget = pauli_x\n"
                        "[optimizer]\nkind = grape\n"),
                    ConfigError);
    // unknown key is reported by name
    CHECK_THROWS_WITH_AS(run("[system]\ndim = 2\ncontrols = pauli_x\nfoo = 1\n"
                             "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1\ninit = 1\n"
                             "[objective]\nkind = gate\ntarget = pauli_x\n"),
                         doctest::Contains("[system] foo"), ConfigError);
    // basis index outside the dimension
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = pauli_x\n"
                        "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1\ninit = 1\n"
                        "[objective]\nkind = state\ninitial_state = 0\ntarget_state = 2\n"),
                    ConfigError);
    // u_min without u_max
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = pauli_x\nu_min = -1\n"
                        "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1\ninit = 1\n"
                        "[objective]\nkind = gate\ntarget = pauli_x\n"),
                    ConfigError);
    // non-Hermitian custom control is rejected while loading
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = custom\n"
                        "control_1_rows = 0 1; 0 0\n"
                        "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1\ninit = 1\n"
                        "[objective]\nkind = gate\ntarget = pauli_x\n"),
                    ConfigError);
    // penalties only exist on the grape path
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = pauli_x\n"
                        "[pulse]\nkind = fourier\nhorizon = 1\n"
                        "[objective]\nkind = gate\ntarget = pauli_x\npenalty_bandwidth = 0.1\n"
                        "[optimizer]\nkind = goat\n"),
                    ConfigError);
    // explicit parameter list must have the right length
    CHECK_THROWS_AS(run("[system]\ndim = 2\ncontrols = pauli_x\n"
                        "[pulse]\nkind = fourier\nhorizon = 1\nparams = 1, 2\n"
                        "[objective]\nkind = gate\ntarget = pauli_x\n"
                        "[optimizer]\nkind = goat\n"),
                    ConfigError);
}

TEST_CASE("cmd_optimize: explicit pulse parameters are honored, boxes clip") {
    const std::string dir = scratch("explicit");
    // One slice at u = 3 with u_max = 1: the box clips the start point, and
    // four constant unit slices over T = pi/2 give a quarter rotation each.
    Config cfg = Config::parse_string(
        "[system]\ndim = 2\ncontrols = pauli_x\nu_max = 1.0\n"
        "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1.5707963267948966\n"
        "params = 3, 3, 3, 3\n"
        "[objective]\nkind = gate\ntarget = pauli_x\n"
        "[optimizer]\nkind = grape\nmax_iterations = 0\n");
    OptimizeOutcome out = cmd_optimize(std::move(cfg), ctx_with(dir, 0));
    // clipped to u = 1 everywhere, total area pi/2: X up to phase
    CHECK(out.infidelity < 1e-9);
    std::vector<std::string> lines = csv_lines(read_file(dir + "/pulse_final.csv"));
    for (size_t i = 1; i < lines.size(); ++i)
        CHECK(std::stod(split_fields(lines[i])[1]) == 1.0);
}

TEST_CASE("cmd_qsl_sweep: bang-bang grid is monotone and saturates past pi/2") {
    const std::string dir = scratch("qsl");
    Config cfg = Config::parse_string(kBangBangConfig);
    std::vector<QslPoint> points =
        cmd_qsl_sweep(std::move(cfg), ctx_with(dir, 7), 1.0, 2.0, 5, 1);
    REQUIRE(points.size() == 5);
    CHECK(points.front().horizon == 1.0);
    CHECK(points.back().horizon == 2.0);
    for (size_t i = 1; i < points.size(); ++i)
        CHECK(points[i].best_infidelity <= points[i - 1].best_infidelity + 1e-9);
    // T = 2.0 > pi/2: full rotation is reachable
    CHECK(points.back().best_infidelity < 1e-6);
    // T = 1.0 < pi/2: the rail bound cos^2(T) applies
    CHECK(points.front().best_infidelity > 0.2);

    std::vector<std::string> lines = csv_lines(read_file(dir + "/qsl.csv"));
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "T,best_infidelity,iterations");

    // deterministic: same seed, same bytes
    const std::string dir2 = scratch("qsl_again");
    cmd_qsl_sweep(Config::parse_string(kBangBangConfig), ctx_with(dir2, 7), 1.0, 2.0, 5, 1);
    CHECK(read_file(dir + "/qsl.csv") == read_file(dir2 + "/qsl.csv"));

    CHECK_THROWS_AS(cmd_qsl_sweep(Config::parse_string(kBangBangConfig), ctx_with(dir, 7),
                                  2.0, 1.0, 5, 1),
                    ConfigError);
}

TEST_CASE("cmd_rb: depolarizing decay is recovered exactly, workers agree") {
    const std::string dir = scratch("rb");
    RbCliOptions opts;
    opts.p = 0.98;
    opts.lengths = {1, 2, 4, 8, 16, 32};
    opts.sequences = 40;
    RbOutcome out = cmd_rb(opts, ctx_with(dir, 11));
    // Depolarizing noise commutes with every Clifford, so each sequence
    // decays identically and the fit is exact.
    CHECK(out.reference_fit.lambda == doctest::Approx(0.98).epsilon(1e-6));
    CHECK(out.reference_fit.offset == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(out.reference_fit.amplitude == doctest::Approx(0.49).epsilon(1e-5));
    for (const RbPoint& pt : out.reference) CHECK(pt.std_error < 1e-12);

    std::vector<std::string> lines = csv_lines(read_file(dir + "/rb.csv"));
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] == "curve,length,survival,std_error,sequences");
    CHECK(split_fields(lines[1])[0] == "reference");

    // three workers, same sequence seeds, same bytes
    const std::string dir3 = scratch("rb_threads");
    cmd_rb(opts, ctx_with(dir3, 11, 3));
    CHECK(read_file(dir + "/rb.csv") == read_file(dir3 + "/rb.csv"));

    const std::string dir4 = scratch("rb_interleaved");
    opts.interleave = 5;
    opts.target_q = 0.99;
    RbOutcome ir = cmd_rb(opts, ctx_with(dir4, 11));
    CHECK(ir.has_interleaved);
    CHECK(ir.target_depolarization == doctest::Approx(0.99).epsilon(1e-4));
    std::vector<std::string> ilines = csv_lines(read_file(dir4 + "/rb.csv"));
    REQUIRE(ilines.size() == 13);  // header + 6 reference + 6 interleaved
    CHECK(split_fields(ilines[7])[0] == "interleaved");

    opts.interleave = 24;
    CHECK_THROWS_AS(cmd_rb(opts, ctx_with(dir4, 11)), ConfigError);
    opts.interleave = -1;
    opts.p = 1.5;
    CHECK_THROWS_AS(cmd_rb(opts, ctx_with(dir4, 11)), ConfigError);
}

TEST_CASE("cmd_drag: first order beats the plain gaussian at the short gate") {
    const std::string dir = scratch("drag_single");
    DragCliOptions opts;
    opts.anharmonicity = 2.0 * kPi;
    opts.gate_time = 4.0 * kPi / opts.anharmonicity;
    std::vector<DragRow> corrected = cmd_drag(opts, ctx_with(dir, 0));
    REQUIRE(corrected.size() == 1);
    opts.first_order = false;
    std::vector<DragRow> plain = cmd_drag(opts, ctx_with(dir, 0));
    CHECK(corrected[0].leakage * 10.0 <= plain[0].leakage);
    CHECK(corrected[0].infidelity < plain[0].infidelity);

    std::vector<std::string> lines = csv_lines(read_file(dir + "/drag.csv"));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "t_g,infidelity,leakage");

    const std::string sweep_dir = scratch("drag_sweep");
    DragCliOptions sweep;
    sweep.sweep_points = 6;
    sweep.n_slices = 200;
    std::vector<DragRow> rows = cmd_drag(sweep, ctx_with(sweep_dir, 0));
    REQUIRE(rows.size() == 6);
    CHECK(rows.front().gate_time == doctest::Approx(2.0 * kPi / sweep.anharmonicity));
    CHECK(rows.back().gate_time == doctest::Approx(12.0 * kPi / sweep.anharmonicity));

    const std::string sweep_dir2 = scratch("drag_sweep_threads");
    cmd_drag(sweep, ctx_with(sweep_dir2, 0, 4));
    CHECK(read_file(sweep_dir + "/drag.csv") == read_file(sweep_dir2 + "/drag.csv"));

    DragCliOptions bad;
    bad.n_slices = 10;
    CHECK_THROWS_AS(cmd_drag(bad, ctx_with(dir, 0)), ConfigError);
}

TEST_CASE("cmd_classical_sho: reaches the rest target and writes both grids") {
    const std::string dir = scratch("sho");
    ShoCliOptions opts;
    opts.omega = 1.0;
    opts.a = 1.0;
    opts.horizon = 2.0 * kPi;
    opts.n_slices = 100;
    ShoOutcome out = cmd_classical_sho(opts, ctx_with(dir, 0));
    CHECK(out.x_error < 1e-2);
    CHECK(out.v_error < 1e-2);
    CHECK(out.cost < 1e-3);

    std::vector<std::string> trace = csv_lines(read_file(dir + "/sho_trace.csv"));
    REQUIRE(trace.size() == 102);  // header + 101 nodes
    CHECK(trace[0] == "t,x,v");
    std::vector<std::string> controls = csv_lines(read_file(dir + "/controls.csv"));
    REQUIRE(controls.size() == 101);  // header + 100 slices
    CHECK(controls[0] == "t,u");
    CHECK(std::stod(split_fields(trace[1])[1]) == 0.0);  // starts at rest

    ShoOutcome again = cmd_classical_sho(opts, ctx_with(scratch("sho2"), 0));
    CHECK(again.cost == out.cost);  // fully deterministic, no randomness anywhere

    opts.omega = 0.0;
    CHECK_THROWS_AS(cmd_classical_sho(opts, ctx_with(dir, 0)), ConfigError);
}

// Process-level checks of the installed binary: exit codes and file side
// effects as a shell user sees them.
namespace {

int run_cli(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string("\"") + QOC_CLI_PATH + "\" " + args + " > " + log_path +
                            " 2> " + log_path + ".err";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("qoc binary: exit codes 0 / 1 / 2 and the documented outputs") {
    const std::string dir = scratch("proc");
    const std::string log = dir + "/log.txt";

    CHECK(run_cli("--help", log) == 0);
    CHECK(run_cli("optimize --config \"" QOC_QUBIT_PI_CFG "\" --out " + dir + "/run1", log) == 0);
    CHECK(read_file(log).find("optimize:") != std::string::npos);
    CHECK(fs::exists(dir + "/run1/trace.csv"));
    CHECK(fs::exists(dir + "/run1/pulse_final.csv"));

    // no subcommand, unknown flag, missing required --config: all usage errors
    CHECK(run_cli("", log) == 2);
    CHECK(run_cli("optimize --config x.cfg --frobnicate", log) == 2);
    CHECK(run_cli("optimize", log) == 2);
    CHECK(run_cli("drag --order tenth", log) == 2);

    // malformed config file: exit 2 and the offending key is named
    const std::string bad_cfg = dir + "/bad.cfg";
    {
        std::ofstream out(bad_cfg);
        out << "[system]\ndim = 2\ncontrols = pauli_x\nmystery = 1\n"
            << "[pulse]\nkind = piecewise\nn_slices = 4\nhorizon = 1\ninit = 1\n"
            << "[objective]\nkind = gate\ntarget = pauli_x\n";
    }
    CHECK(run_cli("optimize --config " + bad_cfg, log) == 2);
    CHECK(read_file(log + ".err").find("[system] mystery") != std::string::npos);
    CHECK(run_cli("optimize --config " + dir + "/missing.cfg", log) == 2);

    // engine-side failure: output directory collides with a regular file
    const std::string blocker = dir + "/blocker";
    {
        std::ofstream out(blocker);
        out << "file\n";
    }
    CHECK(run_cli("optimize --config \"" QOC_QUBIT_PI_CFG "\" --out " + blocker + "/sub", log) ==
          1);

    CHECK(run_cli("rb --p 0.97 --lengths 1,2,4 --sequences 8 --out " + dir + "/rb", log) == 0);
    CHECK(fs::exists(dir + "/rb/rb.csv"));
    CHECK(read_file(log).find("rb: reference fit") != std::string::npos);

    CHECK(run_cli("drag --tg 2.0 --slices 150 --out " + dir + "/drag", log) == 0);
    CHECK(fs::exists(dir + "/drag/drag.csv"));

    CHECK(run_cli("classical-sho --slices 40 --max-iterations 400 --out " + dir + "/sho", log) ==
          0);
    CHECK(fs::exists(dir + "/sho/sho_trace.csv"));
    CHECK(fs::exists(dir + "/sho/controls.csv"));

    CHECK(run_cli("qsl-sweep --config \"" QOC_QUBIT_PI_CFG "\" --t-min 1.5 --t-max 2.0 "
                  "--steps 2 --out " +
                      dir + "/qsl",
                  log) == 0);
    CHECK(fs::exists(dir + "/qsl/qsl.csv"));
}
