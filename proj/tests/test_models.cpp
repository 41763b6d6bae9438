#include "gibbsflow/errors.hpp"
#include "gibbsflow/models.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gibbsflow;

namespace {

constexpr double kPi = 3.141592653589793;

double scalar_of(const GeneralOperator& g) { return g.matrix()(0, 0); }

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

// Composite Simpson on a uniform grid; used as an independent integral oracle.
double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double sum = f(a) + f(b);
    for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace

TEST_CASE("generator requires A >= 1") {
    CHECK_NOTHROW(Generator(HermitianOperator::identity(3)));
    CHECK_THROWS_AS(Generator(HermitianOperator::diagonal(vec({0.5, 2.0}))), ModelError);
}

TEST_CASE("scalar model closed forms") {
    SUBCASE("unperturbed") {
        const auto m = scalar_model(1.0, ScalarProfile::constant(0.0), 1.0);
        CHECK(scalar_of(m.exact(0.0, 1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    }
    SUBCASE("linear profile") {
        const auto m = scalar_model(1.0, ScalarProfile::linear(0.0, 1.0), 1.0);
        CHECK(scalar_of(m.exact(0.0, 1.0)) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
    }
    SUBCASE("cusp profile") {
        const auto b = ScalarProfile::cusp(1.0, 0.5, 0.5);
        const auto m = scalar_model(2.0, b, 0.5);
        const double expected = std::exp(-2.0 - 2.0 * std::pow(0.5, 1.5) * (2.0 / 3.0));
        CHECK(scalar_of(m.exact(0.0, 1.0)) == doctest::Approx(expected).epsilon(1e-14));
        // Quadrature cross-check of the antiderivative on each smooth side of the cusp
        // (substitution u^2 = |tau - 1/2| removes the singular derivative).
        auto side = [](double u) { return 2.0 * u * u; };  // |tau-1/2|^{1/2} d tau = 2 u^2 du
        const double integral = 2.0 * simpson(side, 0.0, std::sqrt(0.5), 2000);
        CHECK(b.integral(0.0, 1.0) == doctest::Approx(integral).epsilon(1e-12));
    }
    SUBCASE("negative profile is rejected") {
        CHECK_THROWS_AS(scalar_model(1.0, ScalarProfile::linear(0.5, -1.0), 1.0), ModelError);
    }
    SUBCASE("a < 1 is rejected") {
        CHECK_THROWS_AS(scalar_model(0.5, ScalarProfile::constant(0.0), 1.0), ModelError);
    }
}

TEST_CASE("profile integrals against Simpson") {
    const ScalarProfile profiles[] = {ScalarProfile::constant(0.7), ScalarProfile::linear(0.2, 1.3),
                                      ScalarProfile::cusp(0.8, 0.3, 1.5, 0.1)};
    for (const auto& p : profiles) {
        for (auto [s, t] : {std::pair{0.0, 1.0}, std::pair{0.1, 0.25}, std::pair{0.4, 0.9}}) {
            const double q = simpson([&](double x) { return p.value(x); }, s, t, 20000);
            CHECK(p.integral(s, t) == doctest::Approx(q).epsilon(1e-9));
        }
    }
}

TEST_CASE("commuting model closed forms") {
    SUBCASE("zero coupling") {
        const auto m = commuting_model(vec({1, 2}), vec({0, 0}), ScalarProfile::linear(0, 1), 1.0);
        const Matrix u = m.exact(0, 1).matrix();
        CHECK(u(0, 0) == doctest::Approx(std::exp(-1.0)));
        CHECK(u(1, 1) == doctest::Approx(std::exp(-2.0)));
        CHECK(u(0, 1) == 0.0);
    }
    SUBCASE("scalar multiple of identity") {
        const auto m = commuting_model(vec({1, 1}), vec({1, 1}), ScalarProfile::constant(1.0), 1.0);
        for (double t : {0.25, 0.5, 1.0}) {
            const Matrix u = m.exact(0, t).matrix();
            CHECK((u - std::exp(-2 * t) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
    SUBCASE("linear profile") {
        const auto m = commuting_model(vec({1, 3}), vec({2, 1}), ScalarProfile::linear(0, 1), 1.0);
        const Matrix u = m.exact(0, 1).matrix();
        CHECK(u(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
        CHECK(u(1, 1) == doctest::Approx(std::exp(-3.5)).epsilon(1e-15));
    }
}

TEST_CASE("rotating model") {
    SUBCASE("reduces to the commuting model without rotation") {
        const Vector lambdas = vec({1, 2, 4});
        const Vector d0 = vec({0.5, 1.0, 0.25});
        const auto rot = rotating_model(3, lambdas, HermitianOperator::diagonal(d0), 0.0, 1.0, -1.0);
        // 1 + |t - t0| = 2 + t on [0, 1] for t0 = -1.
        const auto com = commuting_model(lambdas, d0, ScalarProfile::linear(2.0, 1.0), 1.0);
        for (double t : {0.0, 0.37, 1.0}) {
            CHECK((evaluate_perturbation(rot, t).matrix() - evaluate_perturbation(com, t).matrix())
                      .cwiseAbs()
                      .maxCoeff() < 1e-14);
        }
    }
    SUBCASE("two-dimensional instance changes by a visible amount") {
        const auto m = rotating_model(2, vec({1, 2}), HermitianOperator::diagonal(vec({1, 0})), kPi,
                                      0.5, 0.5);
        const Matrix b0 = evaluate_perturbation(m, 0.0).matrix();
        const Matrix bh = evaluate_perturbation(m, 0.5).matrix();
        CHECK(operator_norm(GeneralOperator(b0 - bh)) >= 0.1);
        // By hand: B(0) = (1 + sqrt(1/2)) e1 e1^T, B(1/2) = e2 e2^T.
        CHECK(b0(0, 0) == doctest::Approx(1.0 + std::sqrt(0.5)));
        CHECK(bh(1, 1) == doctest::Approx(1.0));
        CHECK(std::abs(bh(0, 0)) < 1e-15);
    }
    SUBCASE("value at t0 is the rotated b0") {
        const auto b0 = kms_matrix(4, 0.5);
        const double omega = 2.0, t0 = 0.3;
        const auto m = rotating_model(4, vec({1, 2, 3, 4}), b0, omega, 0.5, t0);
        Matrix r = Matrix::Identity(4, 4);
        r(0, 0) = std::cos(omega * t0);
        r(0, 1) = -std::sin(omega * t0);
        r(1, 0) = std::sin(omega * t0);
        r(1, 1) = std::cos(omega * t0);
        const Matrix expected = r * b0.matrix() * r.transpose();
        CHECK((evaluate_perturbation(m, t0).matrix() - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("spectrum is h(t) times the spectrum of b0") {
        const auto b0 = kms_matrix(6, 0.4);
        const Vector base = eigh(b0).eigenvalues;
        const auto m = rotating_model(6, vec({1, 2, 3, 4, 5, 6}), b0, 1.7, 0.5, 0.4);
        for (double t : {0.0, 0.2, 0.4, 0.81, 1.0}) {
            const double h = 1.0 + std::pow(std::abs(t - 0.4), 0.5);
            const HermitianOperator bt(evaluate_perturbation(m, t).matrix());  // fresh eigensolve
            CHECK((eigh(bt).eigenvalues - h * base).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("does not commute with A") {
        const auto m = builtin_models().back().model;
        const Matrix a = m.a().matrix();
        const Matrix b = evaluate_perturbation(m, 0.2).matrix();
        CHECK((a * b - b * a).norm() > 0.1);
    }
    SUBCASE("dim < 2 is rejected") {
        CHECK_THROWS_AS(rotating_model(1, vec({1}), HermitianOperator::identity(1), 1.0, 0.5, 0.5),
                        ModelError);
    }
}

TEST_CASE("evaluate_perturbation range and values") {
    const auto z = scalar_model(1.0, ScalarProfile::constant(0.0), 1.0);
    CHECK(evaluate_perturbation(z, 0.3).matrix()(0, 0) == 0.0);
    CHECK_THROWS_AS(evaluate_perturbation(z, -0.1), RangeError);
    CHECK_THROWS_AS(evaluate_perturbation(z, 1.5), RangeError);

    const auto c = commuting_model(vec({1, 2}), vec({2, 1}), ScalarProfile::constant(1.0), 1.0);
    const Matrix b = evaluate_perturbation(c, 0.77, true).matrix();
    CHECK(b(0, 0) == 2.0);
    CHECK(b(1, 1) == 1.0);
}

TEST_CASE("model validation of declared exponents") {
    const auto b = ScalarProfile::constant(1.0);
    CHECK_THROWS_AS(scalar_model(1.0, b, 0.0), ModelError);
    CHECK_THROWS_AS(scalar_model(1.0, b, 1.5), ModelError);
    CHECK_THROWS_AS(scalar_model(1.0, b, 1.0, {1.0, 1.0}), ModelError);
    const auto m = scalar_model(1.0, b, 1.0);
    const auto w = m.with_exponents(0.6, 0.5);
    CHECK(w.alpha() == 0.6);
    CHECK(w.beta() == 0.5);
    CHECK(scalar_of(w.exact(0, 1)) == scalar_of(m.exact(0, 1)));
}

TEST_CASE("exact propagators: identity, cocycle, contraction") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& nm : builtin_models()) {
        if (!nm.model.has_exact()) {
            CHECK_THROWS_AS(nm.model.exact(0, 1), ArgumentError);
            continue;
        }
        const auto& m = nm.model;
        CHECK(operator_norm(m.exact(0.4, 0.4) - GeneralOperator::identity(m.dim())) <= 1e-10);
        CHECK_THROWS_AS(m.exact(0.6, 0.2), OrderingError);
        for (int i = 0; i < 30; ++i) {
            double p[3] = {unif(rng), unif(rng), unif(rng)};
            std::sort(p, p + 3);
            const auto full = m.exact(p[0], p[2]);
            const auto composed = m.exact(p[1], p[2]) * m.exact(p[0], p[1]);
            CHECK(operator_norm(composed - full) <= 1e-10);
            CHECK(operator_norm(full) <= 1.0);
        }
    }
}

TEST_CASE("built-in models satisfy the standing assumptions") {
    const auto models = builtin_models();
    REQUIRE(models.size() == 4);
    for (const auto& nm : models) {
        const auto& m = nm.model;
        CHECK(eigh(m.a()).eigenvalues.minCoeff() >= 1.0 - 1e-12);
        for (int i = 0; i <= 100; ++i) {
            const double t = i / 100.0;
            const HermitianOperator b(evaluate_perturbation(m, t).matrix());
            CHECK(eigh(b).eigenvalues.minCoeff() >= -1e-12);
        }
    }
}

TEST_CASE("Hoelder quotients stay bounded on random pairs") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& nm : builtin_models()) {
        const auto& m = nm.model;
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double s = unif(rng), t = unif(rng);
            if (s == t) continue;
            const Matrix d = evaluate_perturbation(m, t).matrix() - evaluate_perturbation(m, s).matrix();
            worst = std::max(worst, operator_norm(GeneralOperator(d)) / std::pow(std::abs(t - s), m.beta()));
        }
        CHECK(std::isfinite(worst));
        CHECK(worst < 50.0);
    }
}

TEST_CASE("kms matrix is positive definite") {
    const auto k = kms_matrix(8, 0.5);
    CHECK(k.matrix()(0, 3) == doctest::Approx(0.125));
    CHECK(eigh(k).eigenvalues.minCoeff() > 0.0);
}
