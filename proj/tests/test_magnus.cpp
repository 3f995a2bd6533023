#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qoc/propagation.hpp"
#include "test_util.hpp"

using namespace qoc;
using qoc_test::max_abs_diff;
using qoc_test::max_abs;
using qoc_test::unitarity_defect;

namespace {

// Least-squares slope of log(err) against log(t).
double fitted_slope(const std::vector<double>& ts, const std::vector<double>& errs) {
    const int n = static_cast<int>(ts.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = std::log(ts[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("magnus terms vanish when they must") {
    // Time-independent Hamiltonian: the average is H t and every commutator
    // integral is identically zero.
    ComplexMatrix h = 0.6 * pauli_x() + 0.3 * pauli_z();
    const double t = 0.9;
    std::vector<ComplexMatrix> flat(51, h);
    MagnusTerms terms = magnus_terms(flat, t);
    CHECK(max_abs_diff(terms.m0, t * h) < 1e-12);
    CHECK(max_abs(terms.m1) == 0.0);
    CHECK(max_abs(terms.m2) == 0.0);

    // A commuting family (all samples multiples of one matrix) kills the
    // corrections exactly even though the integrand varies.
    const int m = 201;
    std::vector<ComplexMatrix> comm(m);
    for (int j = 0; j < m; ++j) comm[j] = (1.0 + t * j / (m - 1)) * pauli_z();
    MagnusTerms cterms = magnus_terms(comm, t);
    CHECK(max_abs(cterms.m1) == 0.0);
    CHECK(max_abs(cterms.m2) == 0.0);

    // Order 0 propagator of a constant field is the plain exponential.
    ComplexMatrix u0 = magnus_propagator(flat, t, 0);
    CHECK(max_abs_diff(u0, expm_hermitian(h, cplx(0.0, -t))) < 1e-12);
}

TEST_CASE("magnus terms reproduce linear-in-time closed forms") {
    // For V(tau) = A + tau B the ordered integrals reduce to
    //   M0 = A t + B t^2 / 2
    //   M1 = (i t^3 / 12) [A, B]
    //   M2 = (t^5 / 240) [B, [A, B]]
    // derived by expanding the commutators into monomials in (tau_1, tau_2,
    // tau_3) and integrating over the ordered simplex.
    Rng rng(5);
    const int d = 3;
    ComplexMatrix a = random_hermitian(rng, d);
    ComplexMatrix b = random_hermitian(rng, d);
    const double t = 0.7;
    const int m = 2001;

    std::vector<ComplexMatrix> samples(m);
    for (int j = 0; j < m; ++j) samples[j] = a + (t * j / (m - 1)) * b;
    MagnusTerms terms = magnus_terms(samples, t);

    ComplexMatrix m0_ref = t * a + (0.5 * t * t) * b;
    ComplexMatrix m1_ref = cplx(0.0, t * t * t / 12.0) * commutator(a, b);
    ComplexMatrix m2_ref = (std::pow(t, 5) / 240.0) * commutator(b, commutator(a, b));

    CHECK(max_abs_diff(terms.m0, m0_ref) < 1e-10);
    CHECK(max_abs_diff(terms.m1, m1_ref) < 1e-6);
    CHECK(max_abs_diff(terms.m2, m2_ref) < 1e-6);

    // Every term comes out exactly self-adjoint, so the propagator is built
    // from a genuinely Hermitian exponent.
    CHECK(max_abs_diff(terms.m0, terms.m0.adjoint()) == 0.0);
    CHECK(max_abs_diff(terms.m1, terms.m1.adjoint()) == 0.0);
    CHECK(max_abs_diff(terms.m2, terms.m2.adjoint()) == 0.0);
    CHECK(unitarity_defect(magnus_propagator(samples, t, 2)) < 1e-12);
}

TEST_CASE("sample_hamiltonian grids a callback uniformly") {
    auto v = [](double tau) { return tau * pauli_x(); };
    std::vector<ComplexMatrix> s = sample_hamiltonian(v, 2.0, 5);
    REQUIRE(s.size() == 5);
    CHECK(max_abs_diff(s[0], ComplexMatrix::zero(2)) == 0.0);
    CHECK(max_abs_diff(s[2], pauli_x()) < 1e-15);
    CHECK(max_abs_diff(s[4], 2.0 * pauli_x()) < 1e-15);
    CHECK_THROWS_AS(sample_hamiltonian(v, 2.0, 1), BadGrid);
}

TEST_CASE("magnus validation") {
    std::vector<ComplexMatrix> two(2, pauli_x());
    CHECK_THROWS_AS(magnus_terms(two, 1.0), BadGrid);

    std::vector<ComplexMatrix> ok(5, pauli_x());
    CHECK_THROWS_AS(magnus_terms(ok, 0.0), BadGrid);
    CHECK_THROWS_AS(magnus_terms(ok, -1.0), BadGrid);
    CHECK_THROWS_AS(magnus_terms({}, 1.0), BadGrid);

    std::vector<ComplexMatrix> ragged = {pauli_x(), ComplexMatrix::identity(3), pauli_x()};
    CHECK_THROWS_AS(magnus_terms(ragged, 1.0), DimMismatch);

    std::vector<ComplexMatrix> poisoned(5, pauli_x());
    poisoned[3](0, 0) = cplx(std::nan(""), 0.0);
    CHECK_THROWS_AS(magnus_terms(poisoned, 1.0), NonFinite);

    CHECK_THROWS_AS(magnus_propagator(ok, 1.0, -1), OutOfRange);
    CHECK_THROWS_AS(magnus_propagator(ok, 1.0, 3), OutOfRange);
}

TEST_CASE("truncation error shrinks with the advertised order") {
    // Rotating field exercises all the commutators.
    auto v = [](double tau) { return std::cos(tau) * pauli_x() + std::sin(tau) * pauli_y(); };

    std::vector<double> ts;
    for (int i = 0; i < 6; ++i) ts.push_back(1.5 * std::pow(0.8, i));

    std::vector<std::vector<double>> errs(3);
    for (double t : ts) {
        // Midpoint-product reference on a fine grid.
        const int n = 10000;
        ComplexMatrix ref = ComplexMatrix::identity(2);
        for (int k = 0; k < n; ++k)
            ref = expm_hermitian(v(t * (k + 0.5) / n), cplx(0.0, -t / n)) * ref;

        std::vector<ComplexMatrix> samples = sample_hamiltonian(v, t, 2001);
        for (int order = 0; order <= 2; ++order) {
            ComplexMatrix u = magnus_propagator(samples, t, order);
            errs[order].push_back(max_abs_diff(u, ref));
        }
    }

    // At the largest window each extra term helps.
    CHECK(errs[1][0] < errs[0][0]);
    CHECK(errs[2][0] < errs[1][0]);

    const double s0 = fitted_slope(ts, errs[0]);
    const double s1 = fitted_slope(ts, errs[1]);
    const double s2 = fitted_slope(ts, errs[2]);
    INFO("slopes: ", s0, " ", s1, " ", s2);
    CHECK(s0 >= 1.9);
    CHECK(s1 >= 2.9);
    CHECK(s2 >= 3.9);
}
