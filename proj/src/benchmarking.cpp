#include "qoc/benchmarking.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "qoc/errors.hpp"
#include "qoc/optimizers.hpp"
#include "qoc/pulse.hpp"
#include "qoc/rng.hpp"

namespace qoc {

namespace {

constexpr double kPi = 3.14159265358979323846;

ComplexMatrix canonical_phase(ComplexMatrix u) {
    const int d = u.dim();
    for (int i = 0; i < d * d; ++i) {
        const cplx z = u.data()[i];
        if (std::abs(z) > 1e-9) {
            u *= std::conj(z) / std::abs(z);
            return u;
        }
    }
    return u;
}

int find_element(const std::vector<ComplexMatrix>& list, const ComplexMatrix& u) {
    for (size_t i = 0; i < list.size(); ++i) {
        double diff = 0.0;
        for (int k = 0; k < u.dim() * u.dim(); ++k)
            diff = std::max(diff, std::abs(list[i].data()[k] - u.data()[k]));
        if (diff < 1e-6) return static_cast<int>(i);
    }
    return -1;
}

// One gate word: conjugate by each Clifford, then apply its error channel.
double run_word(const CliffordGroup1Q& group,
                const std::vector<std::pair<int, const QuantumChannel*>>& word,
                const SpamModel& spam) {
    DensityMatrix rho = spam.initial_state();
    for (const auto& [idx, channel] : word) {
        const ComplexMatrix& u = group.elements[idx];
        rho.rho = u * rho.rho * u.adjoint();
        rho = apply_channel(*channel, rho);
    }
    return spam.survival(rho);
}

RbPoint summarize(int length, const std::vector<double>& survivals) {
    RbPoint pt;
    pt.length = length;
    pt.sequences = static_cast<int>(survivals.size());
    double sum = 0.0;
    for (double s : survivals) sum += s;
    pt.mean = sum / pt.sequences;
    if (pt.sequences > 1) {
        double ss = 0.0;
        for (double s : survivals) ss += (s - pt.mean) * (s - pt.mean);
        pt.std_error = std::sqrt(ss / (static_cast<double>(pt.sequences) * (pt.sequences - 1)));
    }
    return pt;
}

void check_rb_inputs(const CliffordGroup1Q& group, const QuantumChannel& error,
                     const SpamModel& spam, const RbOptions& opts) {
    error.validate();
    if (error.dim() != 2) throw DimMismatch("RB error channel must act on a qubit");
    if (group.size() == 0) throw BadIndex("empty Clifford group");
    spam.validate();
    if (opts.lengths.empty()) throw OutOfRange("RB needs at least one sequence length");
    for (int n : opts.lengths) {
        if (n < 1) throw OutOfRange("RB sequence lengths must be at least 1");
    }
    if (opts.sequences < 1) throw OutOfRange("RB needs at least one sequence per length");
}

// The interleaved target index < 0 means plain reference RB. Draws depend on
// (seed, length, slot) only, never on evaluation order.
std::vector<RbPoint> run_experiment(const CliffordGroup1Q& group, const QuantumChannel& error,
                                    const QuantumChannel* target_error, int target,
                                    const SpamModel& spam, const RbOptions& opts) {
    std::vector<RbPoint> curve;
    curve.reserve(opts.lengths.size());
    for (int n : opts.lengths) {
        std::vector<double> survivals(opts.sequences);
        for (int k = 0; k < opts.sequences; ++k) {
            Rng rng(Rng::mix(Rng::mix(opts.seed, static_cast<std::uint64_t>(n)), k));
            std::vector<std::pair<int, const QuantumChannel*>> word;
            word.reserve(target >= 0 ? 2 * n + 1 : n + 1);
            int net = group.identity_index;
            for (int j = 0; j < n; ++j) {
                int g = static_cast<int>(rng.integer(group.size()));
                word.emplace_back(g, &error);
                net = group.compose(g, net);
                if (target >= 0) {
                    word.emplace_back(target, target_error);
                    net = group.compose(target, net);
                }
            }
            word.emplace_back(group.inverse(net), &error);
            survivals[k] = run_word(group, word, spam);
        }
        curve.push_back(summarize(n, survivals));
    }
    return curve;
}

}  // namespace

void DensityMatrix::validate() const {
    const int d = rho.dim();
    if (d < 1) throw DimMismatch("empty density matrix");
    double herm = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) herm = std::max(herm, std::abs(rho(i, j) - std::conj(rho(j, i))));
    if (herm > 1e-10) throw NonHermitian("density matrix is not Hermitian");
    if (std::abs(rho.trace() - cplx(1.0)) > 1e-10) throw OutOfRange("density matrix trace is not 1");
    HermitianDecomposition dec = hermitian_eig(0.5 * (rho + rho.adjoint()));
    if (dec.values.front() < -1e-9) throw OutOfRange("density matrix has a negative eigenvalue");
}

DensityMatrix pure_density(const StateVector& psi) {
    const int d = static_cast<int>(psi.size());
    DensityMatrix rho{ComplexMatrix(d)};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) rho.rho(i, j) = psi[i] * std::conj(psi[j]);
    return rho;
}

int QuantumChannel::dim() const { return kraus.empty() ? 0 : kraus.front().dim(); }

void QuantumChannel::validate() const {
    if (kraus.empty()) throw NotAChannel("channel has no Kraus operators");
    const int d = kraus.front().dim();
    ComplexMatrix sum(d);
    for (const ComplexMatrix& a : kraus) {
        if (a.dim() != d) throw DimMismatch("Kraus operators differ in dimension");
        sum += a.adjoint() * a;
    }
    sum -= ComplexMatrix::identity(d);
    if (sum.frobenius_norm() > 1e-9) throw NotAChannel("Kraus operators are not trace preserving");
}

QuantumChannel identity_channel(int d) {
    if (d < 1) throw DimMismatch("channel dimension must be positive");
    return {{ComplexMatrix::identity(d)}};
}

QuantumChannel depolarizing_channel(int d, double p) {
    if (d < 2) throw DimMismatch("depolarizing channel needs dimension at least 2");
    if (p < 0.0 || p > 1.0) throw BadProbability("depolarizing weight must lie in [0, 1]");
    QuantumChannel ch;
    if (d == 2) {
        ch.kraus = {std::sqrt((1.0 + 3.0 * p) / 4.0) * ComplexMatrix::identity(2),
                    std::sqrt((1.0 - p) / 4.0) * pauli_x(), std::sqrt((1.0 - p) / 4.0) * pauli_y(),
                    std::sqrt((1.0 - p) / 4.0) * pauli_z()};
        return ch;
    }
    // Heisenberg-Weyl set X^a Z^b; averaging over all of it is the fully
    // depolarizing map, so reweighting the identity term dials in p.
    const cplx omega = std::exp(cplx(0.0, 2.0 * kPi / d));
    const double w_rest = std::sqrt((1.0 - p) / (static_cast<double>(d) * d));
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            ComplexMatrix w(d);
            for (int j = 0; j < d; ++j) w((j + a) % d, j) = std::pow(omega, j * b);
            double weight = (a == 0 && b == 0)
                                ? std::sqrt(p + (1.0 - p) / (static_cast<double>(d) * d))
                                : w_rest;
            ch.kraus.push_back(weight * w);
        }
    }
    return ch;
}

ComplexMatrix apply_to_operator(const QuantumChannel& ch, const ComplexMatrix& m) {
    if (ch.dim() != m.dim()) throw DimMismatch("channel and operator dimensions differ");
    ComplexMatrix out(m.dim());
    for (const ComplexMatrix& a : ch.kraus) out += a * m * a.adjoint();
    return out;
}

DensityMatrix apply_channel(const QuantumChannel& ch, const DensityMatrix& rho) {
    return {apply_to_operator(ch, rho.rho)};
}

ComplexMatrix pauli_transfer_matrix(const QuantumChannel& ch) {
    if (ch.dim() != 2) throw DimMismatch("Pauli transfer matrix is defined for qubit channels");
    const ComplexMatrix basis[4] = {ComplexMatrix::identity(2), pauli_x(), pauli_y(), pauli_z()};
    ComplexMatrix r(4);
    for (int b = 0; b < 4; ++b) {
        ComplexMatrix mapped = apply_to_operator(ch, basis[b]);
        for (int a = 0; a < 4; ++a) r(a, b) = 0.5 * trace_inner(basis[a], mapped);
    }
    return r;
}

int CliffordGroup1Q::compose(int a, int b) const {
    if (a < 0 || a >= size() || b < 0 || b >= size()) throw BadIndex("Clifford index out of range");
    return compose_table[static_cast<size_t>(a) * size() + b];
}

int CliffordGroup1Q::inverse(int a) const {
    if (a < 0 || a >= size()) throw BadIndex("Clifford index out of range");
    return inverse_table[a];
}

CliffordGroup1Q build_clifford_group_1q() {
    std::vector<ComplexMatrix> seeds = {ComplexMatrix::identity(2)};
    const double s = 1.0 / std::sqrt(2.0);
    for (const ComplexMatrix& sigma : {pauli_x(), pauli_y(), pauli_z()}) {
        for (double sign : {-1.0, 1.0}) {
            // exp(sign * -i pi sigma / 4) = (I - sign * i sigma) / sqrt(2)
            ComplexMatrix g = s * ComplexMatrix::identity(2);
            g += cplx(0.0, -sign * s) * sigma;
            seeds.push_back(canonical_phase(g));
        }
    }

    CliffordGroup1Q group;
    for (const ComplexMatrix& g : seeds) {
        if (find_element(group.elements, g) < 0) group.elements.push_back(g);
    }
    // Multiply everything by everything until nothing new appears.
    for (size_t fresh = 0; fresh < group.elements.size();) {
        const size_t known = group.elements.size();
        for (size_t i = 0; i < known; ++i) {
            for (size_t j = fresh; j < known; ++j) {
                for (const ComplexMatrix& prod :
                     {group.elements[i] * group.elements[j], group.elements[j] * group.elements[i]}) {
                    ComplexMatrix c = canonical_phase(prod);
                    if (find_element(group.elements, c) < 0) group.elements.push_back(c);
                }
            }
        }
        fresh = known;
    }
    if (group.size() != 24)
        throw ConvergenceFailure("quarter-turn closure did not produce the 24 Cliffords");

    group.identity_index = find_element(group.elements, canonical_phase(ComplexMatrix::identity(2)));
    group.compose_table.resize(24 * 24);
    group.inverse_table.resize(24);
    for (int a = 0; a < 24; ++a) {
        for (int b = 0; b < 24; ++b) {
            int idx = find_element(group.elements,
                                   canonical_phase(group.elements[a] * group.elements[b]));
            if (idx < 0) throw ConvergenceFailure("Clifford composition left the group");
            group.compose_table[static_cast<size_t>(a) * 24 + b] = idx;
        }
        group.inverse_table[a] = find_element(group.elements, canonical_phase(group.elements[a].adjoint()));
        if (group.inverse_table[a] < 0) throw ConvergenceFailure("Clifford inverse left the group");
    }
    return group;
}

QuantumChannel twirl_channel(const QuantumChannel& ch, const CliffordGroup1Q& group) {
    if (ch.dim() != 2) throw DimMismatch("twirl is defined for qubit channels");
    QuantumChannel out;
    const double w = 1.0 / std::sqrt(static_cast<double>(group.size()));
    for (const ComplexMatrix& u : group.elements) {
        for (const ComplexMatrix& a : ch.kraus) out.kraus.push_back(w * (u.adjoint() * a * u));
    }
    return out;
}

void SpamModel::validate() const {
    if (prep_fidelity < 0.0 || prep_fidelity > 1.0 || meas_fidelity < 0.0 || meas_fidelity > 1.0)
        throw BadProbability("SPAM fidelities must lie in [0, 1]");
}

DensityMatrix SpamModel::initial_state() const {
    DensityMatrix rho{ComplexMatrix(2)};
    rho.rho(0, 0) = prep_fidelity;
    rho.rho(1, 1) = 1.0 - prep_fidelity;
    return rho;
}

double SpamModel::survival(const DensityMatrix& rho) const {
    if (rho.dim() != 2) throw DimMismatch("SPAM readout expects a qubit state");
    return meas_fidelity * rho.rho(0, 0).real() + (1.0 - meas_fidelity) * rho.rho(1, 1).real();
}

std::vector<RbPoint> rb_experiment(const CliffordGroup1Q& group, const QuantumChannel& error,
                                   const SpamModel& spam, const RbOptions& opts) {
    check_rb_inputs(group, error, spam, opts);
    return run_experiment(group, error, nullptr, -1, spam, opts);
}

RbFit fit_rb_decay(std::vector<RbPoint> curve) {
    if (curve.size() < 3) throw BadGrid("decay fit needs at least three lengths");
    std::sort(curve.begin(), curve.end(),
              [](const RbPoint& a, const RbPoint& b) { return a.length < b.length; });

    double lo = curve.front().mean, hi = curve.front().mean;
    for (const RbPoint& pt : curve) {
        lo = std::min(lo, pt.mean);
        hi = std::max(hi, pt.mean);
    }
    RbFit fit;
    if (hi - lo < 1e-12) {
        // Flat curve: any lambda reproduces it with zero amplitude.
        fit.offset = curve.front().mean;
        fit.amplitude = 0.0;
        fit.lambda = 0.0;
        fit.identifiable = false;
        return fit;
    }

    const BoundingTransform squash{0.0, 1.0};
    ResidualFn residuals = [&](const std::vector<double>& x, std::vector<double>& r,
                               std::vector<double>& jac) {
        const auto [lambda, dlambda] = bound_param(squash, x[2]);
        for (size_t i = 0; i < curve.size(); ++i) {
            const double n = curve[i].length;
            const double pw = std::pow(lambda, n);
            r[i] = x[0] + x[1] * pw - curve[i].mean;
            jac[i * 3 + 0] = 1.0;
            jac[i * 3 + 1] = pw;
            jac[i * 3 + 2] = x[1] * n * std::pow(lambda, n - 1.0) * dlambda;
        }
    };
    std::vector<double> x0 = {curve.back().mean, curve.front().mean - curve.back().mean,
                              squash.inverse(0.95)};
    GaussNewtonResult res = gauss_newton_fit(residuals, x0, static_cast<int>(curve.size()));
    fit.offset = res.x[0];
    fit.amplitude = res.x[1];
    fit.lambda = squash.value(res.x[2]);
    return fit;
}

InterleavedResult interleaved_rb(const CliffordGroup1Q& group, int target,
                                 const QuantumChannel& error, const QuantumChannel& target_error,
                                 const SpamModel& spam, const RbOptions& opts) {
    check_rb_inputs(group, error, spam, opts);
    if (target < 0 || target >= group.size()) throw BadIndex("interleaved target is not in the group");
    target_error.validate();
    if (target_error.dim() != 2) throw DimMismatch("target error channel must act on a qubit");

    InterleavedResult result;
    result.reference = run_experiment(group, error, nullptr, -1, spam, opts);
    result.interleaved = run_experiment(group, error, &target_error, target, spam, opts);
    result.lambda_ref = fit_rb_decay(result.reference).lambda;
    result.lambda_int = fit_rb_decay(result.interleaved).lambda;
    result.target_depolarization = result.lambda_int / result.lambda_ref;
    return result;
}

InterleavedResult interleaved_rb(const CliffordGroup1Q& group, int target,
                                 const QuantumChannel& error, const SpamModel& spam,
                                 const RbOptions& opts) {
    return interleaved_rb(group, target, error, identity_channel(2), spam, opts);
}

}  // namespace qoc
