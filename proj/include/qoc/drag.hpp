#pragma once

#include <cstdint>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/optimizers.hpp"

namespace qoc {

// Lowest three levels of a weakly anharmonic qubit driven through a single
// charge line: levels 0/1 are the computational subspace, level 2 the
// leakage level at 2 omega1 + anharmonicity, coupled to the drive
// lambda_leak times as strongly as the 0-1 transition.
struct ThreeLevelSystem {
    double omega1 = 0.0;           // 0-1 transition angular frequency
    double anharmonicity = 0.0;    // Delta = omega2 - 2 omega1, never 0
    double lambda_leak = 1.4142135623730951;  // harmonic-ladder ratio sqrt(2)
    double drive_frequency = 0.0;  // omega_d

    void validate() const;
    double delta1() const { return omega1 - drive_frequency; }  // drive detuning
};

// Sampled control triple on a uniform grid over [0, gate_time], endpoints
// included. delta1 is the time-dependent drive-detuning correction, on top
// of the system's static detuning.
struct DragPulse {
    std::vector<double> u_x;
    std::vector<double> u_y;
    std::vector<double> delta1;
    double gate_time = 0.0;

    int n_samples() const { return static_cast<int>(u_x.size()); }
    void validate() const;
};

// Rotating-frame Hamiltonian (rotating-wave approximation) at one instant,
//   H = (d1 + shift)|1><1| + d2|2><2|
//       + (u_x sx + u_y sy)/2 on 0-1 + lambda_leak * the same on 1-2,
// with d1 = omega1 - omega_d and d2 = Delta + 2 d1. The shift argument is
// the DRAG detuning correction applied to the 0-1 transition alone; the
// 1-2 spacing keeps its static value.
ComplexMatrix rotating_frame_hamiltonian(const ThreeLevelSystem& sys, double u_x, double u_y,
                                         double delta_shift = 0.0);

// Default sigma_x drive: Gaussian centered at gate_time/2 with width
// gate_time/6, pedestal-subtracted so both endpoints are exactly zero, then
// scaled so the trapezoid area is pi (a pi rotation on the 0-1 transition).
std::vector<double> gaussian_envelope(int n_samples, double gate_time);

// u_y = -du_x/dt / Delta (centered differences, one-sided at the ends) and
// delta1 = (lambda^2 - 4) u_x^2 / (4 Delta).
DragPulse first_order_drag(const std::vector<double>& u_x, double gate_time, double anharmonicity,
                           double lambda_leak);

struct GateMetrics {
    double infidelity = 0.0;  // vs sigma_x on the 0-1 block, phase invariant
    double leakage = 0.0;     // worst final level-2 population over basis inputs
};

// Piecewise-constant rotating-frame propagator with n_slices
// midpoint-sampled slices (linear interpolation between pulse samples),
// n_slices >= 100.
ComplexMatrix evolve_drag_propagator(const ThreeLevelSystem& sys, const DragPulse& pulse,
                                     int n_slices);

// Projected gate quality of that propagator.
GateMetrics simulate_3level_gate(const ThreeLevelSystem& sys, const DragPulse& pulse,
                                 int n_slices);

struct CalibrationResult {
    double alpha_x = 0.0;
    double alpha_y = 0.0;
    double alpha_delta = 0.0;
    double infidelity = 0.0;  // noiseless re-simulation at the returned point
    OptimizeResult run;
};

struct CalibrationOptions {
    int n_slices = 400;
    double measurement_noise = 0.0;  // sigma of the Gaussian added per evaluation
    std::uint64_t seed = 0;
    NelderMeadOptions simplex;
};

// Closed-loop prefactor tune-up: Nelder-Mead over (alpha_x, alpha_y,
// alpha_delta) scaling the pulse as (1+alpha_x) u_x and so on, objective the
// simulated infidelity plus seeded measurement noise.
CalibrationResult calibrate_prefactors(const ThreeLevelSystem& sys, const DragPulse& base,
                                       const CalibrationOptions& opts = {});

}  // namespace qoc
