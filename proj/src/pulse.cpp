#include "qoc/pulse.hpp"

#include <algorithm>
#include <cmath>

namespace qoc {

double BoundingTransform::value(double x) const {
    return 0.5 * (hi - lo) * std::sin(x) + 0.5 * (hi + lo);
}

double BoundingTransform::derivative(double x) const {
    return 0.5 * (hi - lo) * std::cos(x);
}

double BoundingTransform::inverse(double v) const {
    if (hi <= lo) throw OutOfRange("BoundingTransform: hi must exceed lo");
    double s = (2.0 * v - (hi + lo)) / (hi - lo);
    s = std::clamp(s, -1.0, 1.0);
    return std::asin(s);
}

std::pair<double, double> bound_param(const BoundingTransform& bt, double x) {
    return {bt.value(x), bt.derivative(x)};
}

PiecewisePulse::PiecewisePulse(int n_controls, int n_slices, double dt)
    : n_controls_(n_controls),
      n_slices_(n_slices),
      dt_(dt),
      values_(static_cast<size_t>(std::max(n_controls, 0)) * std::max(n_slices, 0), 0.0) {
    validate();
}

double& PiecewisePulse::at(int slice, int control) {
    if (slice < 0 || slice >= n_slices_ || control < 0 || control >= n_controls_) {
        throw BadIndex("PiecewisePulse: slice/control index out of range");
    }
    return values_[static_cast<size_t>(slice) * n_controls_ + control];
}

double PiecewisePulse::at(int slice, int control) const {
    return const_cast<PiecewisePulse*>(this)->at(slice, control);
}

PiecewisePulse PiecewisePulse::rescaled_to(double new_horizon) const {
    if (new_horizon <= 0.0) throw BadGrid("rescaled_to: horizon must be positive");
    PiecewisePulse out = *this;
    out.dt_ = new_horizon / n_slices_;
    return out;
}

void PiecewisePulse::validate() const {
    if (n_controls_ < 1) throw BadGrid("PiecewisePulse: need at least one control");
    if (n_slices_ < 1) throw BadGrid("PiecewisePulse: need at least one slice");
    if (!(dt_ > 0.0)) throw BadGrid("PiecewisePulse: slice duration must be positive");
    for (double v : values_) {
        if (!std::isfinite(v)) throw NonFinite("PiecewisePulse: non-finite amplitude");
    }
}

AnalyticPulse::AnalyticPulse(AnsatzKind kind, int n_controls, int n_terms, double horizon)
    : kind_(kind),
      n_controls_(n_controls),
      n_terms_(n_terms),
      horizon_(horizon),
      params_(static_cast<size_t>(std::max(n_controls, 0)) * 3 * std::max(n_terms, 0), 0.0),
      bounds_(params_.size()) {
    // Structural checks only; value-level checks (finiteness, positive
    // Gaussian widths) run in validate() once parameters are filled in.
    if (n_controls_ < 1) throw BadGrid("AnalyticPulse: need at least one control");
    if (n_terms_ < 1) throw BadGrid("AnalyticPulse: need at least one term");
    if (!(horizon_ > 0.0)) throw BadGrid("AnalyticPulse: horizon must be positive");
}

double& AnalyticPulse::param(int control, int term, int which) {
    if (control < 0 || control >= n_controls_ || term < 0 || term >= n_terms_ || which < 0 ||
        which > 2) {
        throw BadIndex("AnalyticPulse: parameter index out of range");
    }
    return params_[static_cast<size_t>(control) * params_per_control() + 3 * term + which];
}

void AnalyticPulse::set_bound(int param_index, BoundingTransform b) {
    if (param_index < 0 || param_index >= n_params()) {
        throw BadIndex("AnalyticPulse: bound index out of range");
    }
    if (b.hi <= b.lo) throw OutOfRange("AnalyticPulse: bound upper edge must exceed lower");
    bounds_[param_index] = b;
}

const std::optional<BoundingTransform>& AnalyticPulse::bound(int param_index) const {
    if (param_index < 0 || param_index >= n_params()) {
        throw BadIndex("AnalyticPulse: bound index out of range");
    }
    return bounds_[param_index];
}

double AnalyticPulse::effective_param(int param_index) const {
    double raw = params_[param_index];
    const auto& b = bounds_[param_index];
    return b ? b->value(raw) : raw;
}

double AnalyticPulse::value(int control, double t) const {
    if (control < 0 || control >= n_controls_) {
        throw BadIndex("AnalyticPulse: control index out of range");
    }
    const int base = control * params_per_control();
    double acc = 0.0;
    for (int k = 0; k < n_terms_; ++k) {
        double a = effective_param(base + 3 * k);
        double p1 = effective_param(base + 3 * k + 1);
        double p2 = effective_param(base + 3 * k + 2);
        if (kind_ == AnsatzKind::FourierSum) {
            acc += a * std::cos(p1 * t + p2);
        } else {
            double r = t - p1;
            acc += a * std::exp(-r * r / (p2 * p2));
        }
    }
    return acc;
}

double AnalyticPulse::param_derivative(int control, double t, int param_index) const {
    if (control < 0 || control >= n_controls_) {
        throw BadIndex("AnalyticPulse: control index out of range");
    }
    const int base = control * params_per_control();
    if (param_index < base || param_index >= base + params_per_control()) return 0.0;

    const int term = (param_index - base) / 3;
    const int which = (param_index - base) % 3;
    double a = effective_param(base + 3 * term);
    double p1 = effective_param(base + 3 * term + 1);
    double p2 = effective_param(base + 3 * term + 2);

    double d;  // derivative with respect to the bounded (physical) parameter
    if (kind_ == AnsatzKind::FourierSum) {
        if (which == 0) {
            d = std::cos(p1 * t + p2);
        } else if (which == 1) {
            d = -a * t * std::sin(p1 * t + p2);
        } else {
            d = -a * std::sin(p1 * t + p2);
        }
    } else {
        double r = t - p1;
        double g = std::exp(-r * r / (p2 * p2));
        if (which == 0) {
            d = g;
        } else if (which == 1) {
            d = a * g * 2.0 * r / (p2 * p2);
        } else {
            d = a * g * 2.0 * r * r / (p2 * p2 * p2);
        }
    }
    const auto& b = bounds_[param_index];
    return b ? d * b->derivative(params_[param_index]) : d;
}

void AnalyticPulse::validate() const {
    if (n_controls_ < 1) throw BadGrid("AnalyticPulse: need at least one control");
    if (n_terms_ < 1) throw BadGrid("AnalyticPulse: need at least one term");
    if (!(horizon_ > 0.0)) throw BadGrid("AnalyticPulse: horizon must be positive");
    for (double p : params_) {
        if (!std::isfinite(p)) throw NonFinite("AnalyticPulse: non-finite parameter");
    }
    if (kind_ == AnsatzKind::GaussianSum) {
        for (int c = 0; c < n_controls_; ++c) {
            for (int k = 0; k < n_terms_; ++k) {
                if (!(effective_param(c * params_per_control() + 3 * k + 2) > 0.0)) {
                    throw OutOfRange("AnalyticPulse: Gaussian width must be positive");
                }
            }
        }
    }
}

void ControlSystem::validate() const {
    const int d = drift.dim();
    if (d < 2) throw DimMismatch("ControlSystem: Hilbert dimension must be at least 2");
    auto check_hermitian = [&](const ComplexMatrix& m, const char* what) {
        if (m.dim() != d) {
            throw DimMismatch(std::string("ControlSystem: ") + what + " dimension mismatch");
        }
        double defect = (m - m.adjoint()).frobenius_norm();
        if (defect > 1e-10 * std::max(1.0, m.frobenius_norm())) {
            throw NonHermitian(std::string("ControlSystem: ") + what + " is not Hermitian");
        }
    };
    check_hermitian(drift, "drift");
    for (const auto& c : controls) check_hermitian(c, "control operator");
    if (!amplitude_limits.empty() && amplitude_limits.size() != controls.size()) {
        throw DimMismatch("ControlSystem: amplitude_limits size must match controls");
    }
    for (const auto& lim : amplitude_limits) {
        if (lim && !(lim->first < lim->second)) {
            throw OutOfRange("ControlSystem: amplitude limit lower edge must be below upper");
        }
    }
}

ComplexMatrix ControlSystem::hamiltonian(const std::vector<double>& u) const {
    if (u.size() != controls.size()) {
        throw DimMismatch("ControlSystem: control value count mismatch");
    }
    ComplexMatrix h = drift;
    for (size_t i = 0; i < controls.size(); ++i) {
        ComplexMatrix term = controls[i];
        term *= u[i];
        h += term;
    }
    return h;
}

std::vector<double> sample_pulse(const PiecewisePulse& pulse, double t) {
    if (!(t >= 0.0) || t > pulse.horizon()) {
        throw OutOfRange("sample_pulse: time outside the pulse horizon");
    }
    // Slices are left-closed, so t = j*dt reads slice j; the final slice also
    // claims t = horizon.
    int slice = static_cast<int>(t / pulse.dt());
    slice = std::min(slice, pulse.n_slices() - 1);
    std::vector<double> out(pulse.n_controls());
    for (int i = 0; i < pulse.n_controls(); ++i) out[i] = pulse.at(slice, i);
    return out;
}

std::vector<double> sample_pulse(const AnalyticPulse& pulse, double t) {
    if (!(t >= 0.0) || t > pulse.horizon()) {
        throw OutOfRange("sample_pulse: time outside the pulse horizon");
    }
    std::vector<double> out(pulse.n_controls());
    for (int i = 0; i < pulse.n_controls(); ++i) out[i] = pulse.value(i, t);
    return out;
}

void clip_to_limits(PiecewisePulse& pulse, const ControlSystem& system) {
    if (static_cast<size_t>(pulse.n_controls()) != system.controls.size()) {
        throw DimMismatch("clip_to_limits: pulse/system control count mismatch");
    }
    if (system.amplitude_limits.empty()) return;
    for (int j = 0; j < pulse.n_slices(); ++j) {
        for (int i = 0; i < pulse.n_controls(); ++i) {
            const auto& lim = system.amplitude_limits[i];
            if (lim) pulse.at(j, i) = std::clamp(pulse.at(j, i), lim->first, lim->second);
        }
    }
}

PiecewisePulse sample_to_pwc(const AnalyticPulse& pulse, int n_slices) {
    if (n_slices < 1) throw BadGrid("sample_to_pwc: need at least one slice");
    double dt = pulse.horizon() / n_slices;
    PiecewisePulse out(pulse.n_controls(), n_slices, dt);
    for (int j = 0; j < n_slices; ++j) {
        double t = (j + 0.5) * dt;
        for (int i = 0; i < pulse.n_controls(); ++i) out.at(j, i) = pulse.value(i, t);
    }
    return out;
}

PenaltyValue bandwidth_penalty(const PiecewisePulse& pulse, double weight) {
    PenaltyValue out;
    out.gradient.assign(pulse.values().size(), 0.0);
    const int n = pulse.n_slices();
    const int m = pulse.n_controls();
    const double dt = pulse.dt();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            double diff = pulse.at(j + 1, i) - pulse.at(j, i);
            out.value += weight * diff * diff / dt;
            double g = 2.0 * weight * diff / dt;
            out.gradient[static_cast<size_t>(j + 1) * m + i] += g;
            out.gradient[static_cast<size_t>(j) * m + i] -= g;
        }
    }
    return out;
}

}  // namespace qoc
