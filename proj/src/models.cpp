#include "gibbsflow/models.hpp"

#include "gibbsflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gibbsflow {

namespace {

constexpr double kTimeSlack = 1e-12;

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// sign(x) |x|^(p+1) / (p+1): antiderivative of |x|^p.
double cusp_antiderivative(double x, double p) {
    const double mag = std::pow(std::abs(x), p + 1.0) / (p + 1.0);
    return x < 0.0 ? -mag : mag;
}

void check_exponents(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ModelError("alpha must lie in [0,1), got " + fmt_double(alpha));
    }
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw ModelError("beta must lie in (0,1], got " + fmt_double(beta));
    }
}

void check_profile(const ScalarProfile& b, double horizon) {
    for (int i = 0; i < kValidationGrid; ++i) {
        const double t = horizon * i / (kValidationGrid - 1);
        const double v = b.value(t);
        if (!(v >= -kNonNegativityTolerance)) {
            throw ModelError("perturbation profile negative at t = " + fmt_double(t) + ": b = " +
                             fmt_double(v));
        }
    }
}

Matrix givens(Eigen::Index dim, double angle) {
    Matrix r = Matrix::Identity(dim, dim);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

}  // namespace

bool Breakpoint::singular() const {
    return exponent != std::round(exponent);
}

ScalarProfile ScalarProfile::constant(double c) {
    ScalarProfile p;
    p.offset = c;
    return p;
}

ScalarProfile ScalarProfile::linear(double intercept, double slope) {
    ScalarProfile p;
    p.offset = intercept;
    p.slope = slope;
    return p;
}

ScalarProfile ScalarProfile::cusp(double scale, double center, double power, double offset) {
    if (!(power > 0.0)) throw ArgumentError("cusp power must be positive");
    ScalarProfile p;
    p.offset = offset;
    p.cusp_scale = scale;
    p.cusp_center = center;
    p.cusp_power = power;
    return p;
}

double ScalarProfile::value(double t) const {
    double v = offset + slope * t;
    if (cusp_scale != 0.0) v += cusp_scale * std::pow(std::abs(t - cusp_center), cusp_power);
    return v;
}

double ScalarProfile::integral(double s, double t) const {
    double v = offset * (t - s) + 0.5 * slope * (t * t - s * s);
    if (cusp_scale != 0.0) {
        v += cusp_scale * (cusp_antiderivative(t - cusp_center, cusp_power) -
                           cusp_antiderivative(s - cusp_center, cusp_power));
    }
    return v;
}

std::vector<Breakpoint> ScalarProfile::breakpoints() const {
    if (cusp_scale == 0.0) return {};
    // Even integer powers are polynomials; nothing to split at.
    if (cusp_power == std::round(cusp_power) && std::fmod(cusp_power, 2.0) == 0.0) return {};
    return {Breakpoint{cusp_center, cusp_power}};
}

std::string ScalarProfile::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << offset;
    if (slope != 0.0) os << " + " << slope << "*t";
    if (cusp_scale != 0.0) {
        os << " + " << cusp_scale << "*|t-" << cusp_center << "|^" << cusp_power;
    }
    return os.str();
}

Generator::Generator(HermitianOperator a) : a_(std::move(a)) {
    if (a_.dim() < 1) throw ModelError("generator must have dimension >= 1");
    lambda_min_ = eigh(a_).eigenvalues(0);
    if (lambda_min_ < 1.0 - kSymmetrizationTolerance) {
        throw ModelError("generator must satisfy A >= 1; smallest eigenvalue is " +
                         fmt_double(lambda_min_));
    }
}

Model::Model(Generator generator, PerturbationFamily perturbation, double horizon,
             std::optional<ExactPropagator> exact)
    : generator_(std::move(generator)),
      perturbation_(std::move(perturbation)),
      horizon_(horizon),
      exact_(std::move(exact)) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
        throw ModelError("horizon must be positive and finite");
    }
    if (!perturbation_.evaluate) throw ModelError("perturbation family has no evaluator");
    check_exponents(perturbation_.alpha, perturbation_.beta);
    for (int i = 0; i < kValidationGrid; ++i) {
        const double t = horizon_ * i / (kValidationGrid - 1);
        const HermitianOperator b = perturbation_.evaluate(t);
        if (b.dim() != generator_.dim()) {
            throw ModelError("perturbation dimension does not match the generator");
        }
        const double lo = eigh(b).eigenvalues(0);
        if (lo < -kNonNegativityTolerance) {
            throw ModelError("B(t) not non-negative at t = " + fmt_double(t) +
                             ": smallest eigenvalue " + fmt_double(lo));
        }
    }
}

GeneralOperator Model::exact(double s, double t) const {
    if (!exact_) throw ArgumentError("model '" + descriptor() + "' has no closed-form propagator");
    if (s > t) throw OrderingError("exact propagator requires s <= t");
    return (*exact_)(s, t);
}

Model Model::with_exponents(double alpha, double beta) const {
    PerturbationFamily p = perturbation_;
    p.alpha = alpha;
    p.beta = beta;
    return Model(generator_, std::move(p), horizon_, exact_);
}

Model scalar_model(double a, const ScalarProfile& b, double beta, const ModelOptions& opts) {
    Model m = commuting_model(Vector::Constant(1, a), Vector::Ones(1), b, beta, opts);
    PerturbationFamily p = m.perturbation();
    p.descriptor = "scalar(a=" + fmt_double(a) + ", b=" + b.describe() + ")";
    return Model(m.generator(), std::move(p), opts.horizon,
                 [a, b](double s, double t) {
                     Matrix u(1, 1);
                     u(0, 0) = std::exp(-a * (t - s) - b.integral(s, t));
                     return GeneralOperator(u);
                 });
}

Model commuting_model(const Vector& lambdas, const Vector& d0, const ScalarProfile& b,
                      double beta, const ModelOptions& opts) {
    if (lambdas.size() == 0) throw ModelError("commuting model needs at least one eigenvalue");
    if (lambdas.size() != d0.size()) {
        throw ModelError("lambdas and d0 must have the same length");
    }
    if ((d0.array() < 0.0).any()) throw ModelError("d0 entries must be non-negative");
    check_profile(b, opts.horizon);

    Generator gen(HermitianOperator::diagonal(lambdas));
    PerturbationFamily p;
    p.alpha = opts.alpha;
    p.beta = beta;
    p.breakpoints = b.breakpoints();
    p.evaluate = [d0, b](double t) {
        return HermitianOperator::diagonal(std::max(b.value(t), 0.0) * d0);
    };
    std::ostringstream desc;
    desc.precision(17);
    desc << "commuting(dim=" << lambdas.size() << ", b=" << b.describe() << ")";
    p.descriptor = desc.str();

    ExactPropagator exact = [lambdas, d0, b](double s, double t) {
        const double ib = b.integral(s, t);
        Vector diag = (-(t - s) * lambdas.array() - ib * d0.array()).exp();
        return GeneralOperator(Matrix(diag.asDiagonal()));
    };
    return Model(std::move(gen), std::move(p), opts.horizon, std::move(exact));
}

Model rotating_model(int dim, const Vector& lambdas, const HermitianOperator& b0, double omega,
                     double beta, double t0, const ModelOptions& opts) {
    if (dim < 2) throw ModelError("rotating model requires dim >= 2");
    if (lambdas.size() != dim || b0.dim() != dim) {
        throw ModelError("rotating model: lambdas and b0 must have dimension " +
                         std::to_string(dim));
    }
    const Spectrum& b0_spec = eigh(b0);
    if (b0_spec.eigenvalues(0) < -kNonNegativityTolerance) {
        throw ModelError("rotating model: b0 must be non-negative");
    }

    Generator gen(HermitianOperator::diagonal(lambdas));
    PerturbationFamily p;
    p.alpha = opts.alpha;
    p.beta = beta;
    p.breakpoints = {Breakpoint{t0, beta}};
    const Vector values = b0_spec.eigenvalues.cwiseMax(0.0);
    const Matrix vectors = b0_spec.eigenvectors;
    p.evaluate = [values, vectors, omega, beta, t0](double t) {
        const double h = 1.0 + std::pow(std::abs(t - t0), beta);
        const Matrix r = givens(vectors.rows(), omega * t);
        return HermitianOperator::from_spectrum(h * values, r * vectors);
    };
    std::ostringstream desc;
    desc.precision(17);
    desc << "rotating(dim=" << dim << ", omega=" << omega << ", beta=" << beta << ", t0=" << t0
         << ")";
    p.descriptor = desc.str();
    return Model(std::move(gen), std::move(p), opts.horizon);
}

HermitianOperator evaluate_perturbation(const Model& m, double t, bool verify) {
    const double slack = kTimeSlack * m.horizon();
    if (!(t >= -slack && t <= m.horizon() + slack)) {
        throw RangeError("t = " + fmt_double(t) + " outside [0, " + fmt_double(m.horizon()) + "]");
    }
    t = std::clamp(t, 0.0, m.horizon());
    HermitianOperator b = m.perturbation().evaluate(t);
    if (verify) {
        const double lo = eigh(b).eigenvalues(0);
        if (lo < -kNonNegativityTolerance) {
            throw ModelError("B(t) not non-negative at t = " + fmt_double(t));
        }
    }
    return b;
}

HermitianOperator kms_matrix(int dim, double rho) {
    Matrix k(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) k(i, j) = std::pow(rho, std::abs(i - j));
    }
    return HermitianOperator(k);
}

std::vector<NamedModel> builtin_models() {
    std::vector<NamedModel> out;
    out.push_back({"scalar-linear", scalar_model(1.0, ScalarProfile::linear(0.0, 1.0), 1.0)});
    out.push_back({"scalar-cusp", scalar_model(2.0, ScalarProfile::cusp(1.0, 0.5, 0.5), 0.5)});

    Vector lambdas = Vector::LinSpaced(8, 1.0, 8.0);
    Vector d0(8);
    d0 << 1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1;
    out.push_back({"commuting-lipschitz",
                   commuting_model(lambdas, d0, ScalarProfile::linear(1.0, 1.0), 1.0)});

    out.push_back({"rotating-holder", rotating_model(8, lambdas, kms_matrix(8, 0.5),
                                                     std::numbers::pi, 0.5, 0.5)});
    return out;
}

}  // namespace gibbsflow
