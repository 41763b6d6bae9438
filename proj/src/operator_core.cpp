#include "gibbsflow/operator_core.hpp"

#include "gibbsflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gibbsflow {

namespace {

void require_finite(const Matrix& m, const char* who) {
    if (!m.allFinite()) {
        throw ArgumentError(std::string(who) + ": operator has non-finite entries");
    }
}

void require_square(const Matrix& m, const char* who) {
    if (m.rows() != m.cols()) {
        std::ostringstream msg;
        msg << who << ": operator must be square, got " << m.rows() << "x" << m.cols();
        throw ArgumentError(msg.str());
    }
}

Spectrum sorted_spectrum(const Vector& values, const Matrix& vectors) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    Spectrum out{Vector(values.size()), Matrix(vectors.rows(), vectors.cols())};
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        out.eigenvalues(i) = values(order[static_cast<std::size_t>(i)]);
        out.eigenvectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

double condition_estimate(const Vector& eigenvalues) {
    if (eigenvalues.size() == 0) return 1.0;
    const double largest = eigenvalues.cwiseAbs().maxCoeff();
    const double smallest = eigenvalues.cwiseAbs().minCoeff();
    if (smallest == 0.0) return std::numeric_limits<double>::infinity();
    return largest / smallest;
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

Spectrum decompose(const Matrix& entries) {
    const auto dim = entries.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(entries);
    if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "eigh: self-adjoint eigensolver did not converge (dim " << dim << ")";
        throw EigenSolverError(msg.str(), dim, std::numeric_limits<double>::infinity());
    }
    Spectrum spec{solver.eigenvalues(), solver.eigenvectors()};

    // Frobenius norms bound operator norms; only fall back to the exact
    // operator norm when the cheap bound is inconclusive.
    const double scale = 1.0 + entries.norm();
    const Matrix residual = spec.eigenvectors * spec.eigenvalues.asDiagonal() *
                                spec.eigenvectors.transpose() -
                            entries;
    const Matrix gram = spec.eigenvectors.transpose() * spec.eigenvectors -
                        Matrix::Identity(dim, dim);
    bool ok = residual.norm() <= kReconstructionTolerance * scale &&
              gram.norm() <= kReconstructionTolerance;
    if (!ok) {
        ok = spectral_norm(residual) <=
                 kReconstructionTolerance * (1.0 + spectral_norm(entries)) &&
             spectral_norm(gram) <= kReconstructionTolerance;
    }
    if (!ok) {
        std::ostringstream msg;
        msg << "eigh: reconstruction check failed (dim " << dim << ")";
        throw EigenSolverError(msg.str(), dim, condition_estimate(spec.eigenvalues));
    }
    return spec;
}

}  // namespace

GeneralOperator::GeneralOperator(Matrix entries) : entries_(std::move(entries)) {
    require_square(entries_, "GeneralOperator");
}

GeneralOperator GeneralOperator::identity(Eigen::Index dim) {
    return GeneralOperator(Matrix::Identity(dim, dim));
}

GeneralOperator GeneralOperator::zero(Eigen::Index dim) {
    return GeneralOperator(Matrix::Zero(dim, dim));
}

HermitianOperator::HermitianOperator(const Matrix& entries) {
    require_square(entries, "HermitianOperator");
    require_finite(entries, "HermitianOperator");
    entries_ = 0.5 * (entries + entries.transpose());
}

HermitianOperator HermitianOperator::identity(Eigen::Index dim) {
    return diagonal(Vector::Ones(dim));
}

HermitianOperator HermitianOperator::zero(Eigen::Index dim) {
    return diagonal(Vector::Zero(dim));
}

HermitianOperator HermitianOperator::diagonal(const Vector& values) {
    return from_spectrum(values, Matrix::Identity(values.size(), values.size()));
}

HermitianOperator HermitianOperator::from_spectrum(const Vector& values,
                                                   const Matrix& eigenvectors) {
    HermitianOperator out(eigenvectors * values.asDiagonal() * eigenvectors.transpose());
    std::call_once(out.cache_->once,
                   [&] { out.cache_->value = sorted_spectrum(values, eigenvectors); });
    return out;
}

bool HermitianOperator::spectrum_cached() const {
    return cache_->value.has_value();
}

const Spectrum& HermitianOperator::spectrum() const {
    std::call_once(cache_->once, [this] { cache_->value = decompose(entries_); });
    return *cache_->value;
}

const Spectrum& eigh(const HermitianOperator& h) {
    return h.spectrum();
}

HermitianOperator operator_function(const HermitianOperator& h,
                                    const std::function<double(double)>& f) {
    const Spectrum& spec = eigh(h);
    Vector mapped(spec.eigenvalues.size());
    for (Eigen::Index i = 0; i < mapped.size(); ++i) {
        const double lambda = spec.eigenvalues(i);
        const double value = f(lambda);
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "operator_function: function undefined at eigenvalue " << lambda;
            throw DomainError(msg.str(), lambda);
        }
        mapped(i) = value;
    }
    return HermitianOperator::from_spectrum(mapped, spec.eigenvectors);
}

HermitianOperator heat_kernel(const HermitianOperator& h, double t) {
    return operator_function(h, [t](double lambda) { return std::exp(-t * lambda); });
}

HermitianOperator fractional_power(const HermitianOperator& h, double power) {
    if (power == 0.0) return HermitianOperator::identity(h.dim());
    return operator_function(h, [power](double lambda) {
        if (lambda < 0.0 || (power < 0.0 && lambda == 0.0)) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return std::pow(lambda, power);
    });
}

Vector singular_values(const GeneralOperator& m) {
    require_finite(m.matrix(), "singular_values");
    if (m.dim() == 0) return Vector();
    Eigen::BDCSVD<Matrix> svd(m.matrix());
    if (svd.info() != Eigen::Success) {
        throw AccuracyError("singular_values: SVD did not converge",
                            std::numeric_limits<double>::infinity());
    }
    return svd.singularValues();
}

Vector singular_values(const HermitianOperator& h) {
    Vector values = eigh(h).eigenvalues.cwiseAbs();
    std::sort(values.data(), values.data() + values.size(), std::greater<>());
    return values;
}

namespace {

double norm_from_singular_values(const Vector& s, SchattenP p) {
    if (s.size() == 0) return 0.0;
    switch (p) {
        case SchattenP::One:
            return s.sum();
        case SchattenP::Two:
            return s.norm();
        case SchattenP::Infinity:
            return s.maxCoeff();
    }
    return 0.0;
}

}  // namespace

double schatten_norm(const GeneralOperator& m, SchattenP p) {
    return norm_from_singular_values(singular_values(m), p);
}

double schatten_norm(const HermitianOperator& h, SchattenP p) {
    return norm_from_singular_values(singular_values(h), p);
}

}  // namespace gibbsflow
