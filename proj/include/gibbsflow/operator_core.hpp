#pragma once

// Dense real operators on a finite spectral truncation: self-adjoint
// operators with a lazily cached eigendecomposition, general (non-symmetric)
// operators, spectral operator functions and Schatten norms.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <mutex>
#include <optional>

namespace gibbsflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Fixed floating-point hygiene constants.
inline constexpr double kSymmetrizationTolerance = 1e-12;
inline constexpr double kReconstructionTolerance = 1e-10;

struct Spectrum {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // columns, orthogonal
};

class GeneralOperator {
public:
    GeneralOperator() = default;
    explicit GeneralOperator(Matrix entries);

    static GeneralOperator identity(Eigen::Index dim);
    static GeneralOperator zero(Eigen::Index dim);

    Eigen::Index dim() const { return entries_.rows(); }
    const Matrix& matrix() const { return entries_; }

    GeneralOperator transpose() const { return GeneralOperator(entries_.transpose()); }

    friend GeneralOperator operator*(const GeneralOperator& a, const GeneralOperator& b) {
        return GeneralOperator(a.entries_ * b.entries_);
    }
    friend GeneralOperator operator+(const GeneralOperator& a, const GeneralOperator& b) {
        return GeneralOperator(a.entries_ + b.entries_);
    }
    friend GeneralOperator operator-(const GeneralOperator& a, const GeneralOperator& b) {
        return GeneralOperator(a.entries_ - b.entries_);
    }
    friend GeneralOperator operator*(double c, const GeneralOperator& a) {
        return GeneralOperator(c * a.entries_);
    }
    GeneralOperator& operator+=(const GeneralOperator& other) {
        entries_ += other.entries_;
        return *this;
    }

private:
    Matrix entries_;
};

// Self-adjoint operator. Immutable after construction; the spectral cache is
// shared between copies and filled at most once.
class HermitianOperator {
public:
    HermitianOperator() = default;

    // Symmetrizes its input: entries = (M + M^T) / 2.
    explicit HermitianOperator(const Matrix& entries);

    static HermitianOperator identity(Eigen::Index dim);
    static HermitianOperator zero(Eigen::Index dim);
    static HermitianOperator diagonal(const Vector& values);

    // Builds an operator from a known decomposition Q diag(values) Q^T. The
    // values need not be sorted; the cached spectrum is stored ascending.
    static HermitianOperator from_spectrum(const Vector& values, const Matrix& eigenvectors);

    Eigen::Index dim() const { return entries_.rows(); }
    const Matrix& matrix() const { return entries_; }
    GeneralOperator as_general() const { return GeneralOperator(entries_); }

    bool spectrum_cached() const;
    const Spectrum& spectrum() const;

private:
    struct Cache {
        std::once_flag once;
        std::optional<Spectrum> value;
    };

    Matrix entries_;
    std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

inline GeneralOperator operator*(const HermitianOperator& a, const GeneralOperator& b) {
    return GeneralOperator(a.matrix() * b.matrix());
}
inline GeneralOperator operator*(const GeneralOperator& a, const HermitianOperator& b) {
    return GeneralOperator(a.matrix() * b.matrix());
}
inline GeneralOperator operator*(const HermitianOperator& a, const HermitianOperator& b) {
    return GeneralOperator(a.matrix() * b.matrix());
}

// Eigendecomposition with ascending eigenvalues. Throws EigenSolverError when
// the solver fails or the reconstruction check does not hold.
const Spectrum& eigh(const HermitianOperator& h);

// Q f(Lambda) Q^T. Throws DomainError naming the eigenvalue where f is not finite.
HermitianOperator operator_function(const HermitianOperator& h,
                                    const std::function<double(double)>& f);

// e^{-t H}.
HermitianOperator heat_kernel(const HermitianOperator& h, double t);

// H^power; negative powers require a strictly positive spectrum.
HermitianOperator fractional_power(const HermitianOperator& h, double power);

// Descending singular values.
Vector singular_values(const GeneralOperator& m);
Vector singular_values(const HermitianOperator& h);

enum class SchattenP { One, Two, Infinity };

double schatten_norm(const GeneralOperator& m, SchattenP p);
double schatten_norm(const HermitianOperator& h, SchattenP p);

inline double trace_norm(const GeneralOperator& m) { return schatten_norm(m, SchattenP::One); }
inline double operator_norm(const GeneralOperator& m) {
    return schatten_norm(m, SchattenP::Infinity);
}
inline double trace_norm(const HermitianOperator& h) { return schatten_norm(h, SchattenP::One); }
inline double operator_norm(const HermitianOperator& h) {
    return schatten_norm(h, SchattenP::Infinity);
}

}  // namespace gibbsflow
