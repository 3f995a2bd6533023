#pragma once

#include <complex>
#include <vector>

#include "qoc/errors.hpp"
#include "qoc/rng.hpp"

namespace qoc {

using cplx = std::complex<double>;

// Dense square complex matrix, row major. Dimensions in this library are
// small (Hilbert space dims up to a few tens), so everything is stored flat
// and operations are written for clarity over blocking tricks.
class ComplexMatrix {
  public:
    ComplexMatrix() : d_(0) {}
    explicit ComplexMatrix(int d) : d_(d), a_(static_cast<size_t>(d) * d) {}

    static ComplexMatrix identity(int d);
    static ComplexMatrix zero(int d) { return ComplexMatrix(d); }

    int dim() const { return d_; }
    cplx& operator()(int i, int j) { return a_[static_cast<size_t>(i) * d_ + j]; }
    const cplx& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * d_ + j]; }
    cplx* data() { return a_.data(); }
    const cplx* data() const { return a_.data(); }

    ComplexMatrix adjoint() const;
    cplx trace() const;
    double frobenius_norm() const;
    bool is_finite() const;

    ComplexMatrix& operator+=(const ComplexMatrix& o);
    ComplexMatrix& operator-=(const ComplexMatrix& o);
    ComplexMatrix& operator*=(cplx s);

  private:
    int d_;
    std::vector<cplx> a_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(cplx s, ComplexMatrix a);

using StateVector = std::vector<cplx>;

StateVector operator*(const ComplexMatrix& m, const StateVector& v);
cplx inner(const StateVector& a, const StateVector& b);  // <a|b>, conjugate-linear in a
double norm(const StateVector& v);
void normalize(StateVector& v);

// Tr(A^dag B); the Frobenius inner product.
cplx trace_inner(const ComplexMatrix& a, const ComplexMatrix& b);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix conj_elementwise(const ComplexMatrix& a);
ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

// Eigensystem of a Hermitian matrix. Columns of `vectors` are the
// eigenvectors, `values[k]` belongs to column k, ascending order.
struct HermitianDecomposition {
    ComplexMatrix vectors;
    std::vector<double> values;
    int dim() const { return vectors.dim(); }
};

// Cyclic complex Jacobi iteration. Throws NonHermitian when the input fails
// the Hermiticity check and ConvergenceFailure when the off-diagonal mass has
// not fallen below 1e-12 * ||H||_F within the 30-sweep budget.
HermitianDecomposition hermitian_eig(const ComplexMatrix& h);

// exp(scale * H) for Hermitian H via the eigendecomposition. `scale` is an
// arbitrary complex number; the common case is scale = -i*dt.
ComplexMatrix expm_from_decomposition(const HermitianDecomposition& dec, cplx scale);
ComplexMatrix expm_hermitian(const ComplexMatrix& h, cplx scale);

// Directional derivative of the matrix exponential:
//   d/dh exp(scale * (X + h B)) at h = 0,
// where `dec` decomposes X and B is Hermitian. In the eigenbasis of X the
// entries are  B_lk * (e^{s e_l} - e^{s e_k}) / (e_l - e_k)  and the limit
// s * B_lk * e^{s e_l} on (near-)degenerate pairs, which keeps the result
// continuous as e_l -> e_k. Pairs count as degenerate when
// |e_l - e_k| <= 1e-12 * max(1, spectral radius).
ComplexMatrix expm_directional_derivative(const HermitianDecomposition& dec,
                                          const ComplexMatrix& b, cplx scale);

// Pauli matrices and friends, used all over the tests and examples.
ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();
ComplexMatrix lowering_operator(int d);          // a, with a|n> = sqrt(n)|n-1>
ComplexMatrix ladder_x(int d);                   // a + a^dag
ComplexMatrix ladder_p(int d);                   // i(a^dag - a)
ComplexMatrix number_operator(int d);            // a^dag a

// Random draws for tests and randomized protocols.
ComplexMatrix random_hermitian(Rng& rng, int d, double scale = 1.0);
ComplexMatrix random_unitary(Rng& rng, int d);
StateVector random_state(Rng& rng, int d);

}  // namespace qoc
