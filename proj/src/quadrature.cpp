#include "gibbsflow/quadrature.hpp"

#include "gibbsflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gibbsflow {

namespace {

GaussLegendreRule build_rule() {
    GaussLegendreRule rule;
    constexpr int n = kGaussNodes;
    for (int i = 0; i < n; ++i) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre16() {
    static const GaussLegendreRule rule = build_rule();
    return rule;
}

std::vector<double> panel_edges(double s, double t, const std::vector<Breakpoint>& breakpoints,
                                int panels_per_piece, int grading_levels) {
    if (!(s < t)) throw OrderingError("panel_edges: s < t required");
    if (panels_per_piece < 1) throw ArgumentError("panel_edges: panels_per_piece >= 1 required");

    const double eps = 1e-14 * (t - s);
    std::vector<double> cuts{s};
    for (const auto& bp : breakpoints) {
        if (bp.time > s + eps && bp.time < t - eps) cuts.push_back(bp.time);
    }
    cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto singular_at = [&](double x) {
        return std::any_of(breakpoints.begin(), breakpoints.end(), [&](const Breakpoint& bp) {
            return bp.singular() && std::abs(bp.time - x) <= eps;
        });
    };

    std::vector<double> edges{s};
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double a = cuts[p];
        const double b = cuts[p + 1];
        const bool left = singular_at(a);
        const bool right = singular_at(b);

        // Uniform panels over [lo, hi] appended to edges.
        auto uniform = [&](double lo, double hi) {
            for (int k = 1; k <= panels_per_piece; ++k) {
                edges.push_back(k == panels_per_piece ? hi
                                                      : lo + (hi - lo) * k / panels_per_piece);
            }
        };
        // Geometric panels toward a singular end; the far half of the piece
        // gets uniform panels.
        auto graded_left = [&](double lo, double hi) {
            const double len = hi - lo;
            for (int j = grading_levels; j >= 1; --j) edges.push_back(lo + std::ldexp(len, -j));
            uniform(edges.back(), hi);
        };
        auto graded_right = [&](double lo, double hi) {
            const double len = hi - lo;
            uniform(lo, hi - 0.5 * len);
            for (int j = 2; j <= grading_levels; ++j) edges.push_back(hi - std::ldexp(len, -j));
            edges.push_back(hi);
        };

        if (left && right) {
            const double mid = 0.5 * (a + b);
            graded_left(a, mid);
            graded_right(mid, b);
        } else if (left) {
            graded_left(a, b);
        } else if (right) {
            graded_right(a, b);
        } else {
            uniform(a, b);
        }
    }
    edges.back() = t;
    return edges;
}

std::vector<double> refine_edges(const std::vector<double>& edges) {
    std::vector<double> out;
    out.reserve(edges.size() * 2);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        out.push_back(edges[i]);
        out.push_back(0.5 * (edges[i] + edges[i + 1]));
    }
    out.push_back(edges.back());
    return out;
}

Matrix lagrange_matrix(const std::vector<double>& x) {
    const auto& rule = gauss_legendre16();
    constexpr int n = kGaussNodes;
    std::array<double, n> bary{};
    for (int r = 0; r < n; ++r) {
        double w = 1.0;
        for (int k = 0; k < n; ++k) {
            if (k != r) w /= (rule.nodes[static_cast<std::size_t>(r)] - rule.nodes[static_cast<std::size_t>(k)]);
        }
        bary[static_cast<std::size_t>(r)] = w;
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(x.size()), n);
    for (std::size_t q = 0; q < x.size(); ++q) {
        double denom = 0.0;
        int exact = -1;
        std::array<double, n> terms{};
        for (int r = 0; r < n; ++r) {
            const double diff = x[q] - rule.nodes[static_cast<std::size_t>(r)];
            if (diff == 0.0) {
                exact = r;
                break;
            }
            terms[static_cast<std::size_t>(r)] = bary[static_cast<std::size_t>(r)] / diff;
            denom += terms[static_cast<std::size_t>(r)];
        }
        const auto row = static_cast<Eigen::Index>(q);
        if (exact >= 0) {
            out(row, exact) = 1.0;
        } else {
            for (int r = 0; r < n; ++r) out(row, r) = terms[static_cast<std::size_t>(r)] / denom;
        }
    }
    return out;
}

}  // namespace gibbsflow
