#pragma once

// Model catalogue for the non-autonomous problem du/dt = -(A + B(t)) u:
// a generator A >= 1, a non-negative perturbation family t -> B(t) with
// declared regularity exponents (alpha, beta), and, where available, a
// closed-form propagator.
//
// In finite dimension every e^{-tA} has finite trace, so the Gibbs property of
// the generator holds automatically and is not tracked separately.

#include "gibbsflow/operator_core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gibbsflow {

// A point where B(.) is not smooth. With a non-integer exponent the
// perturbation behaves like |t - time|^exponent there, which quadrature
// and the reference propagator treat with geometric grading.
struct Breakpoint {
    double time = 0.0;
    double exponent = 1.0;

    bool singular() const;
};

// b(t) = offset + slope * t + cusp_scale * |t - cusp_center|^cusp_power.
// Covers the constant, linear and Hoelder-cusp profiles with closed-form
// antiderivatives.
struct ScalarProfile {
    double offset = 0.0;
    double slope = 0.0;
    double cusp_scale = 0.0;
    double cusp_center = 0.0;
    double cusp_power = 1.0;

    static ScalarProfile constant(double c);
    static ScalarProfile linear(double intercept, double slope);
    static ScalarProfile cusp(double scale, double center, double power, double offset = 0.0);

    double value(double t) const;
    // \int_s^t b(tau) dtau in closed form.
    double integral(double s, double t) const;
    std::vector<Breakpoint> breakpoints() const;
    std::string describe() const;

    bool operator==(const ScalarProfile&) const = default;
};

class Generator {
public:
    // Throws ModelError unless the smallest eigenvalue is >= 1.
    explicit Generator(HermitianOperator a);

    const HermitianOperator& op() const { return a_; }
    double lambda_min() const { return lambda_min_; }
    Eigen::Index dim() const { return a_.dim(); }

private:
    HermitianOperator a_;
    double lambda_min_ = 1.0;
};

struct PerturbationFamily {
    std::function<HermitianOperator(double)> evaluate;
    double alpha = 0.0;  // declared relative-bound exponent, [0, 1)
    double beta = 1.0;   // declared Hoelder exponent, (0, 1]
    std::string descriptor;
    std::vector<Breakpoint> breakpoints;
};

// exact(s, t) returns U(t, s) for s <= t.
using ExactPropagator = std::function<GeneralOperator(double s, double t)>;

inline constexpr double kDefaultHorizon = 1.0;
inline constexpr double kNonNegativityTolerance = 1e-12;
inline constexpr int kValidationGrid = 101;

class Model {
public:
    // Validates alpha in [0,1), beta in (0,1], horizon > 0, matching
    // dimensions, and min eig B(t) >= -1e-12 on a 101-point grid.
    Model(Generator generator, PerturbationFamily perturbation, double horizon,
          std::optional<ExactPropagator> exact = std::nullopt);

    const Generator& generator() const { return generator_; }
    const HermitianOperator& a() const { return generator_.op(); }
    const PerturbationFamily& perturbation() const { return perturbation_; }
    double horizon() const { return horizon_; }
    double alpha() const { return perturbation_.alpha; }
    double beta() const { return perturbation_.beta; }
    const std::string& descriptor() const { return perturbation_.descriptor; }
    Eigen::Index dim() const { return generator_.dim(); }

    bool has_exact() const { return exact_.has_value(); }
    // Throws ArgumentError when no closed form exists, OrderingError for s > t.
    GeneralOperator exact(double s, double t) const;

    // Same model with different declared exponents (the exponents select a
    // rate regime; they do not change A or B).
    Model with_exponents(double alpha, double beta) const;

private:
    Generator generator_;
    PerturbationFamily perturbation_;
    double horizon_;
    std::optional<ExactPropagator> exact_;
};

struct ModelOptions {
    double alpha = 0.0;
    double horizon = kDefaultHorizon;
};

// dim = 1: A = a, B(t) = b(t).
Model scalar_model(double a, const ScalarProfile& b, double beta, const ModelOptions& opts = {});

// A = diag(lambdas), B(t) = b(t) diag(d0). All operators commute.
Model commuting_model(const Vector& lambdas, const Vector& d0, const ScalarProfile& b,
                      double beta, const ModelOptions& opts = {});

// A = diag(lambdas), B(t) = (1 + |t - t0|^beta) R(omega t) b0 R(omega t)^T with
// R a Givens rotation in the plane of the first two coordinates.
Model rotating_model(int dim, const Vector& lambdas, const HermitianOperator& b0, double omega,
                     double beta, double t0, const ModelOptions& opts = {});

// B(t). Throws RangeError outside [0, T]. With verify set, also checks
// non-negativity of the returned operator.
HermitianOperator evaluate_perturbation(const Model& m, double t, bool verify = false);

// Kac-Murdock-Szegoe matrix rho^{|i-j|}; positive definite for |rho| < 1.
HermitianOperator kms_matrix(int dim, double rho);

struct NamedModel {
    std::string name;
    Model model;
};

// Fixed instances used by the verification suites: a linear and a cusp
// scalar model, a Lipschitz commuting model (dim 8) and a Hoelder rotating
// model (dim 8).
std::vector<NamedModel> builtin_models();

}  // namespace gibbsflow
