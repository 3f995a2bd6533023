#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

// Smooth squashing of an unbounded optimizer variable into [lo, hi]:
//   v(x) = (hi - lo)/2 * sin(x) + (hi + lo)/2
// Optimizers always work on the unbounded x; physical amplitudes read v(x).
struct BoundingTransform {
    double lo = -1.0;
    double hi = 1.0;

    double value(double x) const;
    double derivative(double x) const;  // dv/dx
    double inverse(double v) const;     // an x with value(x) = clamp(v); for warm starts
};

// (value, dvalue/dx) in one call.
std::pair<double, double> bound_param(const BoundingTransform& bt, double x);

// Piecewise-constant pulse table: n_controls values per slice, slice duration dt.
class PiecewisePulse {
  public:
    PiecewisePulse() = default;
    PiecewisePulse(int n_controls, int n_slices, double dt);

    int n_controls() const { return n_controls_; }
    int n_slices() const { return n_slices_; }
    double dt() const { return dt_; }
    double horizon() const { return dt_ * n_slices_; }

    double& at(int slice, int control);
    double at(int slice, int control) const;
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    // Keep the slice count and values, stretch the slice duration so the
    // pulse covers `new_horizon`. This is the warm start used when sweeping
    // gate durations: a solution found at a longer duration is replayed,
    // time-rescaled, at the next one.
    PiecewisePulse rescaled_to(double new_horizon) const;

    void validate() const;  // BadGrid / NonFinite on malformed tables

  private:
    int n_controls_ = 0;
    int n_slices_ = 0;
    double dt_ = 0.0;
    std::vector<double> values_;  // slice-major: values_[slice * n_controls + control]
};

// Analytic pulse ansatz. Two families:
//   FourierSum:  c(t) = sum_k A_k cos(w_k t + phi_k)      params (A, w, phi) per term
//   GaussianSum: c(t) = sum_k A_k exp(-(t - tau_k)^2 / s_k^2)   params (A, tau, s)
// Parameters are stored raw (unbounded); per-parameter bounds, when present,
// squash the raw value through a BoundingTransform before it enters c(t).
enum class AnsatzKind { FourierSum, GaussianSum };

class AnalyticPulse {
  public:
    AnalyticPulse() = default;
    AnalyticPulse(AnsatzKind kind, int n_controls, int n_terms, double horizon);

    AnsatzKind kind() const { return kind_; }
    int n_controls() const { return n_controls_; }
    int n_terms() const { return n_terms_; }
    double horizon() const { return horizon_; }

    int params_per_control() const { return 3 * n_terms_; }
    int n_params() const { return n_controls_ * params_per_control(); }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    double& param(int control, int term, int which);  // which: 0=A, 1=w/tau, 2=phi/s

    void set_bound(int param_index, BoundingTransform b);
    const std::optional<BoundingTransform>& bound(int param_index) const;

    // Physical (bounded) parameter entering the waveform.
    double effective_param(int param_index) const;

    double value(int control, double t) const;
    // d value / d raw parameter (bounding chain rule included). Zero for
    // parameters belonging to other controls.
    double param_derivative(int control, double t, int param_index) const;

    void validate() const;

  private:
    AnsatzKind kind_ = AnsatzKind::FourierSum;
    int n_controls_ = 0;
    int n_terms_ = 0;
    double horizon_ = 0.0;
    std::vector<double> params_;
    std::vector<std::optional<BoundingTransform>> bounds_;
};

// Drift plus linearly coupled control operators, all Hermitian (hbar = 1).
// Optional per-control amplitude boxes apply to piecewise pulses via clipping.
struct ControlSystem {
    ComplexMatrix drift;
    std::vector<ComplexMatrix> controls;
    std::vector<std::optional<std::pair<double, double>>> amplitude_limits;

    int dim() const { return drift.dim(); }
    void validate() const;

    // H0 + sum_i u_i H_i
    ComplexMatrix hamiltonian(const std::vector<double>& u) const;
};

// Amplitudes at a single time point, for 0 <= t <= horizon (OutOfRange
// otherwise). Piecewise slices are left-closed / right-open, with the final
// slice right-closed so t = horizon is still defined.
std::vector<double> sample_pulse(const PiecewisePulse& pulse, double t);
std::vector<double> sample_pulse(const AnalyticPulse& pulse, double t);

// Project every slice value into its control's amplitude box (no-op for
// unbounded controls).
void clip_to_limits(PiecewisePulse& pulse, const ControlSystem& system);

// Midpoint-sample an analytic pulse onto an n_slices piecewise table.
PiecewisePulse sample_to_pwc(const AnalyticPulse& pulse, int n_slices);

// Forward-difference bandwidth penalty
//   w * sum_i sum_j (u_i(j+1) - u_i(j))^2 / dt
// and its gradient with respect to the slice values.
struct PenaltyValue {
    double value = 0.0;
    std::vector<double> gradient;  // same layout as PiecewisePulse::values()
};
PenaltyValue bandwidth_penalty(const PiecewisePulse& pulse, double weight);

}  // namespace qoc
