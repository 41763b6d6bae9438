#include "gibbsflow/errors.hpp"
#include "gibbsflow/operator_core.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>
#include <vector>

using namespace gibbsflow;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
    }
    return m;
}

HermitianOperator random_spd(std::mt19937_64& rng, int dim, double shift) {
    const Matrix g = random_matrix(rng, dim, dim);
    return HermitianOperator(g * g.transpose() / dim + shift * Matrix::Identity(dim, dim));
}

// Truncated Taylor series of exp(-h); fine for ||h|| of order one.
Matrix taylor_exp_neg(const Matrix& h, int terms = 60) {
    Matrix sum = Matrix::Identity(h.rows(), h.cols());
    Matrix term = sum;
    for (int k = 1; k < terms; ++k) {
        term = -term * h / k;
        sum += term;
    }
    return sum;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("eigh on small closed-form matrices") {
    SUBCASE("identity") {
        const auto id = HermitianOperator::identity(3);
        const auto& sp = eigh(id);
        CHECK(max_abs(sp.eigenvalues - Vector::Ones(3)) < 1e-14);
    }
    SUBCASE("diagonal with permuted eigenvectors") {
        Vector d(3);
        d << 5, 1, 2;
        const auto h = HermitianOperator::diagonal(d);
        const auto& sp = eigh(h);
        CHECK(sp.eigenvalues(0) == doctest::Approx(1.0));
        CHECK(sp.eigenvalues(1) == doctest::Approx(2.0));
        CHECK(sp.eigenvalues(2) == doctest::Approx(5.0));
        // Each eigenvector is a signed unit coordinate vector.
        for (int k = 0; k < 3; ++k) CHECK(sp.eigenvectors.col(k).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    }
    SUBCASE("[[2,1],[1,2]]") {
        Matrix m(2, 2);
        m << 2, 1, 1, 2;
        const HermitianOperator h(m);
        const auto& sp = eigh(h);
        CHECK(sp.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(sp.eigenvalues(1) == doctest::Approx(3.0).epsilon(1e-14));
        const double r = 1.0 / std::sqrt(2.0);
        CHECK(std::abs(std::abs(sp.eigenvectors(0, 0)) - r) < 1e-14);
        CHECK(sp.eigenvectors(0, 0) * sp.eigenvectors(1, 0) < 0.0);  // (1,-1)/sqrt2
        CHECK(sp.eigenvectors(0, 1) * sp.eigenvectors(1, 1) > 0.0);  // (1, 1)/sqrt2
    }
}

TEST_CASE("spectral decomposition reconstructs and is cached") {
    std::mt19937_64 rng(11);
    for (int dim : {1, 2, 7, 24}) {
        const auto h = random_spd(rng, dim, 0.5);
        CHECK_FALSE(h.spectrum_cached());
        const auto& sp = eigh(h);
        CHECK(h.spectrum_cached());
        const Matrix q = sp.eigenvectors;
        const Matrix rec = q * sp.eigenvalues.asDiagonal() * q.transpose();
        CHECK(operator_norm(GeneralOperator(rec - h.matrix())) <= 1e-10 * (1.0 + operator_norm(h)));
        CHECK(operator_norm(GeneralOperator(q.transpose() * q - Matrix::Identity(dim, dim))) <= 1e-10);
        for (int k = 1; k < dim; ++k) CHECK(sp.eigenvalues(k - 1) <= sp.eigenvalues(k));
        CHECK(&eigh(h) == &sp);
    }
}

TEST_CASE("spectral cache is populated once under concurrent access") {
    std::mt19937_64 rng(5);
    const auto h = random_spd(rng, 20, 1.0);
    std::vector<const Spectrum*> seen(8, nullptr);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < seen.size(); ++i) {
        pool.emplace_back([&, i] { seen[i] = &h.spectrum(); });
    }
    for (auto& t : pool) t.join();
    for (auto* p : seen) CHECK(p == seen.front());
}

TEST_CASE("construction symmetrizes and rejects non-finite entries") {
    Matrix m(2, 2);
    m << 1.0, 2.0 + 1e-13, 2.0, 3.0;
    const HermitianOperator h(m);
    CHECK(h.matrix()(0, 1) == h.matrix()(1, 0));
    m(0, 0) = std::nan("");
    CHECK_THROWS_AS(HermitianOperator{m}, Error);
    CHECK_THROWS_AS(HermitianOperator(Matrix::Zero(2, 3)), ArgumentError);
}

TEST_CASE("operator functions") {
    SUBCASE("diagonal inverse square root") {
        Vector d(2);
        d << 1, 4;
        const auto r = fractional_power(HermitianOperator::diagonal(d), -0.5);
        CHECK(r.matrix()(0, 0) == doctest::Approx(1.0));
        CHECK(r.matrix()(1, 1) == doctest::Approx(0.5));
        CHECK(std::abs(r.matrix()(0, 1)) < 1e-15);
    }
    SUBCASE("heat kernel of the identity") {
        for (double t : {0.0, 0.3, 2.5}) {
            const auto g = heat_kernel(HermitianOperator::identity(4), t);
            CHECK(max_abs(g.matrix() - std::exp(-t) * Matrix::Identity(4, 4)) < 1e-15);
        }
    }
    SUBCASE("exp(-H) against a Taylor series") {
        Matrix m(2, 2);
        m << 2, 1, 1, 2;
        const auto g = heat_kernel(HermitianOperator(m), 1.0);
        CHECK(max_abs(g.matrix() - taylor_exp_neg(m)) < 1e-12);
        // Q diag(e^-1, e^-3) Q^T by hand.
        const double a = 0.5 * (std::exp(-1.0) + std::exp(-3.0));
        const double b = 0.5 * (std::exp(-3.0) - std::exp(-1.0));
        CHECK(g.matrix()(0, 0) == doctest::Approx(a).epsilon(1e-14));
        CHECK(g.matrix()(0, 1) == doctest::Approx(b).epsilon(1e-14));
    }
    SUBCASE("random heat kernels against Taylor series") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const auto h = random_spd(rng, 6, 0.1);
            const double t = 0.7;
            CHECK(max_abs(heat_kernel(h, t).matrix() - taylor_exp_neg(t * h.matrix())) < 1e-12);
        }
    }
    SUBCASE("domain errors name the eigenvalue") {
        Vector d(2);
        d << -2, 3;
        try {
            fractional_power(HermitianOperator::diagonal(d), -0.25);
            FAIL("expected DomainError");
        } catch (const DomainError& e) {
            CHECK(e.eigenvalue() == doctest::Approx(-2.0));
        }
        Vector z(2);
        z << 0, 1;
        CHECK_THROWS_AS(fractional_power(HermitianOperator::diagonal(z), -0.5), DomainError);
        CHECK_NOTHROW(fractional_power(HermitianOperator::diagonal(z), 0.5));
        CHECK_THROWS_AS(operator_function(HermitianOperator::identity(2), [](double) { return std::nan(""); }),
                        DomainError);
    }
}

TEST_CASE("semigroup law of the heat kernel") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> time(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = random_spd(rng, 1 + trial % 12, 1.0);
        const double t = time(rng), tau = time(rng);
        const Matrix lhs = heat_kernel(h, t).matrix() * heat_kernel(h, tau).matrix();
        CHECK(max_abs(lhs - heat_kernel(h, t + tau).matrix()) <= 1e-10);
    }
}

TEST_CASE("singular values") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = -2;
    const Vector s = singular_values(GeneralOperator(d));
    CHECK(s(0) == doctest::Approx(3.0));
    CHECK(s(1) == doctest::Approx(2.0));

    const Vector z = singular_values(GeneralOperator::zero(3));
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);

    Matrix n = Matrix::Zero(2, 2);
    n(0, 1) = 1;
    const Vector sn = singular_values(GeneralOperator(n));
    CHECK(sn(0) == doctest::Approx(1.0));
    CHECK(std::abs(sn(1)) < 1e-15);

    // Hermitian overload agrees with the general SVD.
    std::mt19937_64 rng(23);
    Matrix g = random_matrix(rng, 9, 9);
    const HermitianOperator h(g + g.transpose());
    const Vector a = singular_values(h);
    const Vector b = singular_values(h.as_general());
    CHECK(max_abs(a - b) < 1e-12);
    for (int k = 1; k < 9; ++k) CHECK(a(k - 1) >= a(k));
}

TEST_CASE("Schatten norms on closed-form matrices") {
    Vector d(3);
    d << 1, 2, 3;
    CHECK(schatten_norm(HermitianOperator::diagonal(d), SchattenP::One) == doctest::Approx(6.0));
    CHECK(schatten_norm(HermitianOperator::diagonal(d), SchattenP::Two) == doctest::Approx(std::sqrt(14.0)));
    CHECK(schatten_norm(GeneralOperator::identity(5), SchattenP::Infinity) == doctest::Approx(1.0));
    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    CHECK(trace_norm(GeneralOperator(m)) == doctest::Approx(4.0));
    CHECK(operator_norm(GeneralOperator(m)) == doctest::Approx(3.0));
}

TEST_CASE("norm ordering on 1000 random matrices") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 12);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = dim(rng);
        const GeneralOperator m(random_matrix(rng, d, d));
        const double inf = schatten_norm(m, SchattenP::Infinity);
        const double two = schatten_norm(m, SchattenP::Two);
        const double one = schatten_norm(m, SchattenP::One);
        REQUIRE(inf <= two * (1.0 + 1e-12));
        REQUIRE(two <= one * (1.0 + 1e-12));
        // p = 2 is the Frobenius norm.
        REQUIRE(two == doctest::Approx(m.matrix().norm()).epsilon(1e-12));
    }
}

TEST_CASE("Hoelder-type submultiplicativity") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const int d = 1 + trial % 10;
        const GeneralOperator m(random_matrix(rng, d, d));
        const GeneralOperator n(random_matrix(rng, d, d));
        const double mn = trace_norm(m * n);
        REQUIRE(mn <= operator_norm(m) * trace_norm(n) * (1.0 + 1e-12));
        REQUIRE(mn <= trace_norm(m) * operator_norm(n) * (1.0 + 1e-12));
    }
}

TEST_CASE("trace norm of the heat kernel of a generator") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 16;
        const auto a = random_spd(rng, d, 1.0);  // eigenvalues >= 1
        for (double t : {0.01, 0.5, 3.0}) {
            CHECK(trace_norm(heat_kernel(a, t)) <= d * std::exp(-t) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("from_spectrum pre-fills a sorted cache") {
    Vector values(3);
    values << 3, 1, 2;
    const Matrix q = Matrix::Identity(3, 3);
    const auto h = HermitianOperator::from_spectrum(values, q);
    CHECK(h.spectrum_cached());
    CHECK(h.spectrum().eigenvalues(0) == 1.0);
    CHECK(h.spectrum().eigenvalues(2) == 3.0);
    CHECK(h.matrix()(0, 0) == doctest::Approx(3.0));
}
