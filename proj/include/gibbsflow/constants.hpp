#pragma once

// Grid estimates of the regularity constants of a model on [s, t]:
//   C_alpha       sup_t ||B(t) A^{-alpha}||
//   L_alpha_beta  sup ||A^{-alpha}(B(t) - B(r))A^{-alpha}|| / |t - r|^beta
//   M_alpha       sup_{0 <= tau <= t-s} tau^alpha ||e^{-tau A} A^alpha||
//   xi            C_alpha M_alpha (t-s)^{1-alpha} / (1 - alpha)
// All suprema are maxima over uniform grids (the built-in families are
// continuous, so the grid maximum under-estimates by at most the grid
// modulus of continuity). Norms are operator norms.

#include "gibbsflow/models.hpp"

namespace gibbsflow {

inline constexpr int kDefaultConstantsGrid = 1001;

struct ConstantsReport {
    double alpha = 0.0;
    double beta = 1.0;
    double s = 0.0;
    double t = 1.0;
    double C_alpha = 0.0;
    double L_alpha_beta = 0.0;
    double M_alpha = 0.0;
    double xi = 0.0;
    int grid_size = 0;

    // xi recomputed from its parts.
    double recompute_xi() const;
};

double contraction_coefficient(double C_alpha, double M_alpha, double alpha, double length);

// Throws ArgumentError for grid < 2 and OrderingError unless s < t.
ConstantsReport estimate_constants(const Model& m, double s, double t,
                                   int grid = kDefaultConstantsGrid);

// C_alpha, M_alpha and xi only; skips the quadratic-cost Hoelder estimate.
ConstantsReport estimate_contraction(const Model& m, double s, double t,
                                     int grid = kDefaultConstantsGrid);

// sup over the tau grid in [0, length] of tau^alpha max_k lambda_k^alpha e^{-tau lambda_k}.
double smoothing_constant(const Vector& lambdas, double alpha, double length, int grid);

}  // namespace gibbsflow
