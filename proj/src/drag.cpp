#include "qoc/drag.hpp"

#include <cmath>

#include "qoc/errors.hpp"
#include "qoc/rng.hpp"

namespace qoc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Linear interpolation on the pulse's uniform sample grid.
double interp(const std::vector<double>& samples, double gate_time, double t) {
    const int m = static_cast<int>(samples.size());
    if (m == 1) return samples[0];
    const double x = t / gate_time * (m - 1);
    int i = static_cast<int>(std::floor(x));
    if (i < 0) i = 0;
    if (i > m - 2) i = m - 2;
    const double frac = x - i;
    return samples[i] + frac * (samples[i + 1] - samples[i]);
}

}  // namespace

void ThreeLevelSystem::validate() const {
    if (anharmonicity == 0.0)
        throw ZeroAnharmonicity("three-level model needs a nonzero anharmonicity");
    if (!(lambda_leak > 0.0)) throw OutOfRange("leakage coupling must be positive");
}

void DragPulse::validate() const {
    if (gate_time <= 0.0) throw BadGrid("gate time must be positive");
    if (u_x.size() < 2) throw BadGrid("drag pulse needs at least two samples");
    if (u_y.size() != u_x.size() || delta1.size() != u_x.size())
        throw DimMismatch("drag pulse sample arrays differ in length");
}

ComplexMatrix rotating_frame_hamiltonian(const ThreeLevelSystem& sys, double u_x, double u_y,
                                         double delta_shift) {
    sys.validate();
    // The pulse detuning moves the 0-1 transition only; the level-2 diagonal keeps the
    // static drive detuning. Shifting both (a drive chirp) would modulate the 1-2 gap
    // and costs roughly a factor 4 in the achievable leakage suppression.
    const double d1 = sys.delta1() + delta_shift;
    const double d2 = sys.anharmonicity + 2.0 * sys.delta1();
    ComplexMatrix h(3);
    h(1, 1) = d1;
    h(2, 2) = d2;
    const cplx drive(u_x / 2.0, -u_y / 2.0);  // (u_x sx + u_y sy) / 2 upper entry
    h(0, 1) = drive;
    h(1, 0) = std::conj(drive);
    h(1, 2) = sys.lambda_leak * drive;
    h(2, 1) = std::conj(h(1, 2));
    return h;
}

std::vector<double> gaussian_envelope(int n_samples, double gate_time) {
    if (n_samples < 2) throw BadGrid("envelope needs at least two samples");
    if (gate_time <= 0.0) throw BadGrid("gate time must be positive");
    const double sigma = gate_time / 6.0;
    const double mid = gate_time / 2.0;
    const double dt = gate_time / (n_samples - 1);
    std::vector<double> env(n_samples);
    const double pedestal = std::exp(-mid * mid / (2.0 * sigma * sigma));
    for (int i = 0; i < n_samples; ++i) {
        const double t = i * dt;
        env[i] = std::exp(-(t - mid) * (t - mid) / (2.0 * sigma * sigma)) - pedestal;
    }
    double area = 0.0;
    for (int i = 0; i + 1 < n_samples; ++i) area += 0.5 * (env[i] + env[i + 1]) * dt;
    for (double& v : env) v *= kPi / area;
    return env;
}

DragPulse first_order_drag(const std::vector<double>& u_x, double gate_time, double anharmonicity,
                           double lambda_leak) {
    if (anharmonicity == 0.0)
        throw ZeroAnharmonicity("first-order DRAG divides by the anharmonicity");
    const int m = static_cast<int>(u_x.size());
    if (m < 2) throw BadGrid("drag pulse needs at least two samples");
    if (gate_time <= 0.0) throw BadGrid("gate time must be positive");
    DragPulse pulse;
    pulse.u_x = u_x;
    pulse.gate_time = gate_time;

    const double dt = gate_time / (m - 1);
    pulse.u_y.resize(m);
    pulse.delta1.resize(m);
    for (int i = 0; i < m; ++i) {
        double du;
        if (i == 0) {
            du = (u_x[1] - u_x[0]) / dt;
        } else if (i == m - 1) {
            du = (u_x[m - 1] - u_x[m - 2]) / dt;
        } else {
            du = (u_x[i + 1] - u_x[i - 1]) / (2.0 * dt);
        }
        pulse.u_y[i] = -du / anharmonicity;
        pulse.delta1[i] =
            (lambda_leak * lambda_leak - 4.0) * u_x[i] * u_x[i] / (4.0 * anharmonicity);
    }
    return pulse;
}

ComplexMatrix evolve_drag_propagator(const ThreeLevelSystem& sys, const DragPulse& pulse,
                                     int n_slices) {
    sys.validate();
    pulse.validate();
    if (n_slices < 100) throw OutOfRange("three-level simulation needs at least 100 slices");

    const double dt = pulse.gate_time / n_slices;
    ComplexMatrix u = ComplexMatrix::identity(3);
    for (int k = 0; k < n_slices; ++k) {
        const double t = (k + 0.5) * dt;
        ComplexMatrix h = rotating_frame_hamiltonian(
            sys, interp(pulse.u_x, pulse.gate_time, t), interp(pulse.u_y, pulse.gate_time, t),
            interp(pulse.delta1, pulse.gate_time, t));
        u = expm_hermitian(h, cplx(0.0, -dt)) * u;
    }
    return u;
}

GateMetrics simulate_3level_gate(const ThreeLevelSystem& sys, const DragPulse& pulse,
                                 int n_slices) {
    const ComplexMatrix u = evolve_drag_propagator(sys, pulse, n_slices);
    GateMetrics out;
    const cplx overlap = u(0, 1) + u(1, 0);  // Tr(sigma_x^+ P) over the 0-1 block
    out.infidelity = 1.0 - std::norm(overlap) / 4.0;
    out.leakage = std::max(std::norm(u(2, 0)), std::norm(u(2, 1)));
    return out;
}

CalibrationResult calibrate_prefactors(const ThreeLevelSystem& sys, const DragPulse& base,
                                       const CalibrationOptions& opts) {
    sys.validate();
    base.validate();
    if (opts.measurement_noise < 0.0) throw OutOfRange("measurement noise must be nonnegative");

    auto scaled = [&base](const std::vector<double>& alpha) {
        DragPulse p = base;
        for (double& v : p.u_x) v *= 1.0 + alpha[0];
        for (double& v : p.u_y) v *= 1.0 + alpha[1];
        for (double& v : p.delta1) v *= 1.0 + alpha[2];
        return p;
    };
    Rng rng(opts.seed);
    ValueFn objective = [&](const std::vector<double>& alpha) {
        double value = simulate_3level_gate(sys, scaled(alpha), opts.n_slices).infidelity;
        if (opts.measurement_noise > 0.0) value += opts.measurement_noise * rng.normal();
        return value;
    };

    CalibrationResult result;
    result.run = nelder_mead_minimize(objective, {0.0, 0.0, 0.0}, opts.simplex);
    result.alpha_x = result.run.x[0];
    result.alpha_y = result.run.x[1];
    result.alpha_delta = result.run.x[2];
    result.infidelity = simulate_3level_gate(sys, scaled(result.run.x), opts.n_slices).infidelity;
    return result;
}

}  // namespace qoc
