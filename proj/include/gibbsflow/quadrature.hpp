#pragma once

#include "gibbsflow/models.hpp"

#include <array>
#include <vector>

namespace gibbsflow {

inline constexpr int kGaussNodes = 16;

// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
    std::array<double, kGaussNodes> nodes{};
    std::array<double, kGaussNodes> weights{};
};

const GaussLegendreRule& gauss_legendre16();

struct QuadratureSpec {
    double tolerance = 1e-11;
    int initial_panels = 2;   // per smooth piece
    int max_panels = 2048;    // total panels before giving up
};

// Panel edges on [s, t]. The interval is first split at breakpoints lying in
// (s, t); each smooth piece gets `panels_per_piece` uniform panels, except
// that pieces ending at a singular breakpoint are graded geometrically
// toward it (widths halving down to 2^-grading_levels of the piece).
std::vector<double> panel_edges(double s, double t, const std::vector<Breakpoint>& breakpoints,
                                int panels_per_piece, int grading_levels = 40);

// Every panel split in two.
std::vector<double> refine_edges(const std::vector<double>& edges);

// Barycentric Lagrange weights for interpolating from the reference nodes.
// Row q holds the weights producing the value at point x[q] in [-1, 1].
Matrix lagrange_matrix(const std::vector<double>& x);

}  // namespace gibbsflow
