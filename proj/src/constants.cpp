#include "gibbsflow/constants.hpp"

#include "gibbsflow/errors.hpp"

#include <cmath>

namespace gibbsflow {

namespace {

void check_grid(double s, double t, int grid) {
    if (grid < 2) throw ArgumentError("constants grid must have at least 2 points");
    if (!(s < t)) throw OrderingError("constants estimate requires s < t");
}

std::vector<HermitianOperator> sample_perturbation(const Model& m, double s, double t, int grid) {
    std::vector<HermitianOperator> out;
    out.reserve(static_cast<std::size_t>(grid));
    for (int i = 0; i < grid; ++i) {
        out.push_back(evaluate_perturbation(m, s + (t - s) * i / (grid - 1)));
    }
    return out;
}

double estimate_C(const Model& m, const std::vector<HermitianOperator>& samples) {
    double best = 0.0;
    if (m.alpha() == 0.0) {
        for (const auto& b : samples) best = std::max(best, operator_norm(b));
        return best;
    }
    const HermitianOperator a_inv = fractional_power(m.a(), -m.alpha());
    for (const auto& b : samples) best = std::max(best, operator_norm(b * a_inv));
    return best;
}

void fill_contraction(const Model& m, double s, double t, int grid,
                      const std::vector<HermitianOperator>& samples, ConstantsReport& r) {
    r.alpha = m.alpha();
    r.beta = m.beta();
    r.s = s;
    r.t = t;
    r.grid_size = grid;
    r.C_alpha = estimate_C(m, samples);
    r.M_alpha = smoothing_constant(eigh(m.a()).eigenvalues, m.alpha(), t - s, grid);
    r.xi = contraction_coefficient(r.C_alpha, r.M_alpha, r.alpha, t - s);
}

}  // namespace

double ConstantsReport::recompute_xi() const {
    return contraction_coefficient(C_alpha, M_alpha, alpha, t - s);
}

double contraction_coefficient(double C_alpha, double M_alpha, double alpha, double length) {
    return C_alpha * M_alpha * std::pow(length, 1.0 - alpha) / (1.0 - alpha);
}

double smoothing_constant(const Vector& lambdas, double alpha, double length, int grid) {
    double best = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double tau = length * i / (grid - 1);
        for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
            // tau^alpha is 1 at tau = 0 for alpha = 0 (the supremum as tau -> 0+).
            const double scale = alpha == 0.0 ? 1.0 : std::pow(tau * lambdas(k), alpha);
            best = std::max(best, scale * std::exp(-tau * lambdas(k)));
        }
    }
    return best;
}

ConstantsReport estimate_contraction(const Model& m, double s, double t, int grid) {
    check_grid(s, t, grid);
    ConstantsReport r;
    fill_contraction(m, s, t, grid, sample_perturbation(m, s, t, grid), r);
    return r;
}

ConstantsReport estimate_constants(const Model& m, double s, double t, int grid) {
    check_grid(s, t, grid);
    const auto samples = sample_perturbation(m, s, t, grid);
    ConstantsReport r;
    fill_contraction(m, s, t, grid, samples, r);

    // Hoelder quotient over every grid pair. X_i = A^{-a} B_i A^{-a} is
    // symmetric, so ||X_i - X_j|| is the largest |eigenvalue|.
    std::vector<Matrix> x;
    x.reserve(samples.size());
    if (m.alpha() == 0.0) {
        for (const auto& b : samples) x.push_back(b.matrix());
    } else {
        const Matrix a_inv = fractional_power(m.a(), -m.alpha()).matrix();
        for (const auto& b : samples) x.push_back(a_inv * b.matrix() * a_inv);
    }
    const double h = (t - s) / (grid - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    double best = 0.0;
    for (int i = 0; i < grid; ++i) {
        for (int j = i + 1; j < grid; ++j) {
            const Matrix diff = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            const double scale = std::pow((j - i) * h, m.beta());
            // The Frobenius norm bounds the operator norm from above.
            if (diff.norm() / scale <= best) continue;
            double norm;
            if (diff.rows() == 1) {
                norm = std::abs(diff(0, 0));
            } else {
                solver.compute(diff, Eigen::EigenvaluesOnly);
                norm = solver.eigenvalues().cwiseAbs().maxCoeff();
            }
            if (norm == 0.0) continue;
            best = std::max(best, norm / scale);
        }
    }
    r.L_alpha_beta = best;
    return r;
}

}  // namespace gibbsflow
