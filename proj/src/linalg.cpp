#include "qoc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qoc {

namespace {

void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* op) {
    if (a.dim() != b.dim()) {
        throw DimMismatch(std::string(op) + ": dimensions " + std::to_string(a.dim()) +
                          " and " + std::to_string(b.dim()) + " differ");
    }
}

double hermiticity_defect(const ComplexMatrix& h) {
    double acc = 0.0;
    for (int i = 0; i < h.dim(); ++i) {
        for (int j = 0; j < h.dim(); ++j) {
            cplx diff = h(i, j) - std::conj(h(j, i));
            acc += std::norm(diff);
        }
    }
    return std::sqrt(acc);
}

}  // namespace

ComplexMatrix ComplexMatrix::identity(int d) {
    ComplexMatrix m(d);
    for (int i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix m(d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
}

cplx ComplexMatrix::trace() const {
    cplx t = 0.0;
    for (int i = 0; i < d_; ++i) t += (*this)(i, i);
    return t;
}

double ComplexMatrix::frobenius_norm() const {
    double acc = 0.0;
    for (const cplx& z : a_) acc += std::norm(z);
    return std::sqrt(acc);
}

bool ComplexMatrix::is_finite() const {
    for (const cplx& z : a_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o) {
    require_same_dim(*this, o, "matrix add");
    for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o) {
    require_same_dim(*this, o, "matrix subtract");
    for (size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
    for (cplx& z : a_) z *= s;
    return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_dim(a, b, "matrix multiply");
    const int d = a.dim();
    ComplexMatrix c(d);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            cplx aik = a(i, k);
            if (aik == cplx(0.0)) continue;
            for (int j = 0; j < d; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

StateVector operator*(const ComplexMatrix& m, const StateVector& v) {
    if (static_cast<size_t>(m.dim()) != v.size()) {
        throw DimMismatch("matrix-vector product: matrix dim " + std::to_string(m.dim()) +
                          " vs vector size " + std::to_string(v.size()));
    }
    StateVector out(v.size(), 0.0);
    for (int i = 0; i < m.dim(); ++i) {
        cplx acc = 0.0;
        for (int j = 0; j < m.dim(); ++j) acc += m(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

cplx inner(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) throw DimMismatch("inner product: vector sizes differ");
    cplx acc = 0.0;
    for (size_t k = 0; k < a.size(); ++k) acc += std::conj(a[k]) * b[k];
    return acc;
}

double norm(const StateVector& v) { return std::sqrt(std::abs(inner(v, v))); }

void normalize(StateVector& v) {
    double n = norm(v);
    if (n == 0.0) throw OutOfRange("normalize: zero vector");
    for (cplx& z : v) z /= n;
}

cplx trace_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_dim(a, b, "trace_inner");
    cplx acc = 0.0;
    const int d = a.dim();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc += std::conj(a(i, j)) * b(i, j);
    return acc;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    const int da = a.dim(), db = b.dim();
    ComplexMatrix c(da * db);
    for (int i = 0; i < da; ++i)
        for (int j = 0; j < da; ++j) {
            cplx aij = a(i, j);
            if (aij == cplx(0.0)) continue;
            for (int k = 0; k < db; ++k)
                for (int l = 0; l < db; ++l) c(i * db + k, j * db + l) = aij * b(k, l);
        }
    return c;
}

ComplexMatrix conj_elementwise(const ComplexMatrix& a) {
    ComplexMatrix c(a.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) c(i, j) = std::conj(a(i, j));
    return c;
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

HermitianDecomposition hermitian_eig(const ComplexMatrix& h) {
    const int d = h.dim();
    if (d < 1) throw DimMismatch("hermitian_eig: empty matrix");

    const double hnorm = h.frobenius_norm();
    if (hermiticity_defect(h) > 1e-10 * std::max(1.0, hnorm)) {
        throw NonHermitian("hermitian_eig: input is not Hermitian within tolerance");
    }

    ComplexMatrix a = h;
    ComplexMatrix v = ComplexMatrix::identity(d);
    const double off_tol = 1e-12 * hnorm;

    auto off_norm = [&]() {
        double acc = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) acc += std::norm(a(i, j));
        return std::sqrt(acc);
    };

    constexpr int kMaxSweeps = 30;
    bool converged = off_norm() <= off_tol;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                cplx b = a(p, q);
                double ab = std::abs(b);
                if (ab == 0.0) continue;

                // Unitary two-sided rotation in the (p, q) plane that zeroes
                // a(p, q). phase carries the complex angle of the pivot.
                cplx phase = b / ab;
                double app = a(p, p).real();
                double aqq = a(q, q).real();
                double tau = (aqq - app) / (2.0 * ab);
                double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                        : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                double cs = 1.0 / std::sqrt(1.0 + t * t);
                double sn = t * cs;

                // Column update: A <- A R with R(p,p)=R(q,q)=cs,
                // R(p,q)=sn*phase, R(q,p)=-sn*conj(phase).
                for (int i = 0; i < d; ++i) {
                    cplx aip = a(i, p), aiq = a(i, q);
                    a(i, p) = cs * aip - sn * std::conj(phase) * aiq;
                    a(i, q) = sn * phase * aip + cs * aiq;
                }
                // Row update: A <- R^dag A.
                for (int j = 0; j < d; ++j) {
                    cplx apj = a(p, j), aqj = a(q, j);
                    a(p, j) = cs * apj - sn * phase * aqj;
                    a(q, j) = sn * std::conj(phase) * apj + cs * aqj;
                }
                // Accumulate eigenvectors: V <- V R.
                for (int i = 0; i < d; ++i) {
                    cplx vip = v(i, p), viq = v(i, q);
                    v(i, p) = cs * vip - sn * std::conj(phase) * viq;
                    v(i, q) = sn * phase * vip + cs * viq;
                }
            }
        }
        converged = off_norm() <= off_tol;
    }
    if (!converged) {
        throw ConvergenceFailure("hermitian_eig: Jacobi sweeps exhausted before off-diagonal tolerance");
    }

    std::vector<double> vals(d);
    for (int i = 0; i < d; ++i) vals[i] = a(i, i).real();

    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return vals[i] < vals[j]; });

    HermitianDecomposition dec;
    dec.vectors = ComplexMatrix(d);
    dec.values.resize(d);
    for (int k = 0; k < d; ++k) {
        dec.values[k] = vals[order[k]];
        for (int i = 0; i < d; ++i) dec.vectors(i, k) = v(i, order[k]);
    }
    return dec;
}

ComplexMatrix expm_from_decomposition(const HermitianDecomposition& dec, cplx scale) {
    const int d = dec.dim();
    const ComplexMatrix& vec = dec.vectors;
    ComplexMatrix out(d);
    // V diag(exp(scale * e)) V^dag without forming the diagonal matrix.
    std::vector<cplx> ph(d);
    for (int k = 0; k < d; ++k) ph[k] = std::exp(scale * dec.values[k]);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < d; ++k) acc += vec(i, k) * ph[k] * std::conj(vec(j, k));
            out(i, j) = acc;
        }
    return out;
}

ComplexMatrix expm_hermitian(const ComplexMatrix& h, cplx scale) {
    return expm_from_decomposition(hermitian_eig(h), scale);
}

ComplexMatrix expm_directional_derivative(const HermitianDecomposition& dec,
                                          const ComplexMatrix& b, cplx scale) {
    const int d = dec.dim();
    if (b.dim() != d) throw DimMismatch("expm_directional_derivative: direction dim differs");

    const ComplexMatrix& vec = dec.vectors;
    ComplexMatrix bt = vec.adjoint() * b * vec;  // direction in the eigenbasis

    double spectral_radius = 0.0;
    for (double e : dec.values) spectral_radius = std::max(spectral_radius, std::abs(e));
    const double degen_tol = 1e-12 * std::max(1.0, spectral_radius);

    std::vector<cplx> ex(d);
    for (int k = 0; k < d; ++k) ex[k] = std::exp(scale * dec.values[k]);

    ComplexMatrix dt(d);
    for (int l = 0; l < d; ++l) {
        for (int k = 0; k < d; ++k) {
            double gap = dec.values[l] - dec.values[k];
            cplx factor = (std::abs(gap) <= degen_tol) ? scale * ex[l]
                                                       : (ex[l] - ex[k]) / gap;
            dt(l, k) = bt(l, k) * factor;
        }
    }
    return vec * dt * vec.adjoint();
}

ComplexMatrix pauli_x() {
    ComplexMatrix m(2);
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    return m;
}

ComplexMatrix pauli_y() {
    ComplexMatrix m(2);
    m(0, 1) = cplx(0.0, -1.0);
    m(1, 0) = cplx(0.0, 1.0);
    return m;
}

ComplexMatrix pauli_z() {
    ComplexMatrix m(2);
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}

ComplexMatrix lowering_operator(int d) {
    ComplexMatrix m(d);
    for (int n = 1; n < d; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
    return m;
}

ComplexMatrix ladder_x(int d) {
    ComplexMatrix a = lowering_operator(d);
    return a + a.adjoint();
}

ComplexMatrix ladder_p(int d) {
    ComplexMatrix a = lowering_operator(d);
    ComplexMatrix out = a.adjoint() - a;
    return cplx(0.0, 1.0) * out;
}

ComplexMatrix number_operator(int d) {
    ComplexMatrix m(d);
    for (int n = 0; n < d; ++n) m(n, n) = static_cast<double>(n);
    return m;
}

ComplexMatrix random_hermitian(Rng& rng, int d, double scale) {
    ComplexMatrix m(d);
    for (int i = 0; i < d; ++i) {
        m(i, i) = scale * rng.normal();
        for (int j = i + 1; j < d; ++j) {
            cplx z(scale * rng.normal() * 0.5, scale * rng.normal() * 0.5);
            m(i, j) = z;
            m(j, i) = std::conj(z);
        }
    }
    return m;
}

ComplexMatrix random_unitary(Rng& rng, int d) {
    // exp(-i H) of a random Hermitian draw; Haar-ness is not needed anywhere,
    // a well-spread unitary is.
    return expm_hermitian(random_hermitian(rng, d), cplx(0.0, -1.0));
}

StateVector random_state(Rng& rng, int d) {
    StateVector v(d);
    for (int i = 0; i < d; ++i) v[i] = cplx(rng.normal(), rng.normal());
    normalize(v);
    return v;
}

}  // namespace qoc
