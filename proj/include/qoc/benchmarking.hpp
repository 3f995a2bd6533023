#pragma once

#include <cstdint>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

// Density matrix with its physicality checks kept explicit: Hermitian and
// unit trace to 1e-10, eigenvalues above -1e-9.
struct DensityMatrix {
    ComplexMatrix rho;

    int dim() const { return rho.dim(); }
    void validate() const;
};

DensityMatrix pure_density(const StateVector& psi);

// Channel in Kraus form, rho -> sum_k A_k rho A_k^+.
struct QuantumChannel {
    std::vector<ComplexMatrix> kraus;

    int dim() const;
    void validate() const;  // completeness sum A^+A = I to 1e-9
};

QuantumChannel identity_channel(int d);
// p rho + (1 - p) I/d. Qubits use the Pauli Kraus set
// {sqrt((1+3p)/4) I, sqrt((1-p)/4) sigma_{x,y,z}}; higher dimensions the
// Heisenberg-Weyl generalization. Either way the affine action is what the
// tests pin down, entry by entry on an operator basis.
QuantumChannel depolarizing_channel(int d, double p);

DensityMatrix apply_channel(const QuantumChannel& ch, const DensityMatrix& rho);
// Same sum on an arbitrary operator (the channel is linear; basis elements
// need not be states).
ComplexMatrix apply_to_operator(const QuantumChannel& ch, const ComplexMatrix& m);

// Pauli transfer matrix R_ab = Tr(sigma_a ch[sigma_b]) / 2 over the basis
// {I, sigma_x, sigma_y, sigma_z}; entries are real for any channel, kept in
// a ComplexMatrix for convenience. Qubit channels only.
ComplexMatrix pauli_transfer_matrix(const QuantumChannel& ch);

// The 24 single-qubit Cliffords as phase-canonical unitaries (first nonzero
// entry in row-major order made real positive), closed over composition with
// exact integer lookup tables.
struct CliffordGroup1Q {
    std::vector<ComplexMatrix> elements;
    std::vector<int> compose_table;  // row-major 24 x 24, index of E_a * E_b
    std::vector<int> inverse_table;
    int identity_index = 0;

    int size() const { return static_cast<int>(elements.size()); }
    int compose(int a, int b) const;
    int inverse(int a) const;
};

// Breadth-first closure of the six quarter turns exp(-/+ i pi sigma / 4).
CliffordGroup1Q build_clifford_group_1q();

// Exact group average (1/24) sum_g U_g^+ ch[U_g rho U_g^+] U_g, returned in
// Kraus form. The Cliffords form a unitary 2-design, so the result is always
// a depolarizing channel.
QuantumChannel twirl_channel(const QuantumChannel& ch, const CliffordGroup1Q& group);

// Classical preparation/readout error: prepare |0><0| with probability
// prep_fidelity (|1><1| otherwise), read the correct bit with probability
// meas_fidelity.
struct SpamModel {
    double prep_fidelity = 1.0;
    double meas_fidelity = 1.0;

    void validate() const;
    DensityMatrix initial_state() const;
    double survival(const DensityMatrix& rho) const;  // ground-state readout probability
};

struct RbPoint {
    int length = 0;        // number of random Cliffords, excluding the inverse
    double mean = 0.0;     // mean survival over the K sequences
    double std_error = 0.0;
    int sequences = 0;
};

struct RbOptions {
    std::vector<int> lengths;
    int sequences = 100;  // K, per length
    std::uint64_t seed = 0;
};

// Standard RB: per sequence, `length` uniformly random Cliffords followed by
// the table-computed inverse, with the error channel applied after every
// gate, the inverting one included. Each sequence draws from an Rng seeded
// by (seed, length, slot), so results do not depend on evaluation order.
std::vector<RbPoint> rb_experiment(const CliffordGroup1Q& group, const QuantumChannel& error,
                                   const SpamModel& spam, const RbOptions& opts);

// Decay fit p(n) = offset + amplitude * lambda^n. The amplitude absorbs SPAM
// error, which pins neither offset = 1/2 nor amplitude = 1/2 in practice;
// lambda is driven through a (0, 1) squashing transform so the fit cannot
// wander into meaningless territory.
struct RbFit {
    double offset = 0.0;
    double amplitude = 0.0;
    double lambda = 0.0;
    bool identifiable = true;  // false for a flat curve, where lambda means nothing
};

RbFit fit_rb_decay(std::vector<RbPoint> curve);

// Interleaved RB: reference as above, plus a run with the target Clifford
// (carrying target_error) inserted after every random Clifford. The inverse
// is recomputed over the full interleaved word. The ratio of the two decays
// estimates the target's own depolarization.
struct InterleavedResult {
    std::vector<RbPoint> reference;
    std::vector<RbPoint> interleaved;
    double lambda_ref = 0.0;
    double lambda_int = 0.0;
    double target_depolarization = 0.0;  // lambda_int / lambda_ref
};

InterleavedResult interleaved_rb(const CliffordGroup1Q& group, int target,
                                 const QuantumChannel& error, const QuantumChannel& target_error,
                                 const SpamModel& spam, const RbOptions& opts);
// Error-free target: only the ambient channel acts.
InterleavedResult interleaved_rb(const CliffordGroup1Q& group, int target,
                                 const QuantumChannel& error, const SpamModel& spam,
                                 const RbOptions& opts);

}  // namespace qoc
