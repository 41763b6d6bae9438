#include "gibbsflow/propagator.hpp"

#include "gibbsflow/constants.hpp"
#include "gibbsflow/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace gibbsflow {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void require_ordered(double s, double t, const char* who) {
    if (!(s < t)) throw OrderingError(std::string(who) + ": s < t required");
}

// Matrix exponentials of A reused across the factors of one product.
struct AKernels {
    Matrix full;
    Matrix half;
};

AKernels a_kernels(const Model& m, double tau) {
    return {heat_kernel(m.a(), tau).matrix(), heat_kernel(m.a(), 0.5 * tau).matrix()};
}

Matrix factor(Scheme scheme, const Model& m, const AKernels& k, double t_k, double tau) {
    const Matrix eb = heat_kernel(evaluate_perturbation(m, t_k), tau).matrix();
    switch (scheme) {
        case Scheme::Left:
            return k.full * eb;
        case Scheme::Right:
            return eb * k.full;
        case Scheme::Symmetric:
            return k.half * eb * k.half;
    }
    return eb;
}

Matrix product_matrix(Scheme scheme, const Model& m, const Partition& p, int first, int last) {
    const double tau = p.step();
    const AKernels k = a_kernels(m, tau);
    Matrix u = Matrix::Identity(m.dim(), m.dim());
    for (int i = first; i <= last; ++i) {
        u = factor(scheme, m, k, p.points[static_cast<std::size_t>(i - 1)], tau) * u;
    }
    return u;
}

// ---------------------------------------------------------------------------
// Dyson-Phillips terms by panel-wise recursive quadrature.
//
// Work in the eigenbasis of A so that G(delta) is a diagonal scaling. On
// each panel [a, b] with Gauss nodes x_m,
//   Phi_k(x_m) = G(x_m - a) Phi_k(a) - int_a^{x_m} G(x_m - y) B(y) Phi_{k-1}(y) dy,
// where the inner integral uses a Gauss rule on [a, x_m] and Phi_{k-1} at the
// inner nodes comes from Lagrange interpolation on the panel's own nodes.

struct SubRule {
    // Inner nodes/weights on [-1, xi_m], for each outer node m.
    std::array<std::array<double, kGaussNodes>, kGaussNodes> nodes{};
    std::array<std::array<double, kGaussNodes>, kGaussNodes> weights{};
    std::array<Matrix, kGaussNodes> interp;
};

const SubRule& sub_rule() {
    static const SubRule rule = [] {
        SubRule r;
        const auto& gl = gauss_legendre16();
        for (std::size_t m = 0; m < kGaussNodes; ++m) {
            const double half = 0.5 * (gl.nodes[m] + 1.0);
            std::vector<double> pts(kGaussNodes);
            for (std::size_t q = 0; q < kGaussNodes; ++q) {
                r.nodes[m][q] = -1.0 + half * (gl.nodes[q] + 1.0);
                r.weights[m][q] = half * gl.weights[q];
                pts[q] = r.nodes[m][q];
            }
            r.interp[m] = lagrange_matrix(pts);
        }
        return r;
    }();
    return rule;
}

class DysonEngine {
public:
    explicit DysonEngine(const Model& m) : m_(m) {
        const Spectrum& spec = eigh(m.a());
        lambdas_ = spec.eigenvalues;
        q_ = spec.eigenvectors;
    }

    // S_0 .. S_K (t, s) on the given panel layout, in the original basis.
    std::vector<Matrix> terms(double s, const std::vector<double>& edges, int max_k) const {
        const auto& gl = gauss_legendre16();
        const auto& sr = sub_rule();
        const Eigen::Index d = m_.dim();
        const auto K = static_cast<std::size_t>(max_k);

        std::vector<Matrix> edge(K + 1, Matrix::Zero(d, d));
        edge[0] = decay(0.0);
        std::vector<std::array<Matrix, kGaussNodes>> phi(K + 1);

        for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
            const double a = edges[j];
            const double b = edges[j + 1];
            const double h = b - a;
            std::array<double, kGaussNodes> x{};
            std::array<Matrix, kGaussNodes> b_node;
            for (std::size_t m = 0; m < kGaussNodes; ++m) {
                x[m] = a + 0.5 * h * (gl.nodes[m] + 1.0);
                b_node[m] = rotated_b(x[m]);
                phi[0][m] = decay(x[m] - s);
            }
            if (K >= 1) {
                // B at inner nodes, shared by every k.
                std::array<std::array<Matrix, kGaussNodes>, kGaussNodes> b_sub;
                for (std::size_t m = 0; m < kGaussNodes; ++m) {
                    for (std::size_t q = 0; q < kGaussNodes; ++q) {
                        b_sub[m][q] = rotated_b(a + 0.5 * h * (sr.nodes[m][q] + 1.0));
                    }
                }
                for (std::size_t k = 1; k <= K; ++k) {
                    for (std::size_t m = 0; m < kGaussNodes; ++m) {
                        Matrix acc = Matrix::Zero(d, d);
                        for (std::size_t q = 0; q < kGaussNodes; ++q) {
                            const double y = a + 0.5 * h * (sr.nodes[m][q] + 1.0);
                            Matrix prev;
                            if (k == 1) {
                                prev = decay(y - s);
                            } else {
                                prev = Matrix::Zero(d, d);
                                for (std::size_t r = 0; r < kGaussNodes; ++r) {
                                    prev.noalias() += sr.interp[m](static_cast<Eigen::Index>(q),
                                                                   static_cast<Eigen::Index>(r)) *
                                                      phi[k - 1][r];
                                }
                            }
                            const double w = 0.5 * h * sr.weights[m][q];
                            acc.noalias() += w * (scaling(x[m] - y).asDiagonal() * (b_sub[m][q] * prev));
                        }
                        phi[k][m] = scaling(x[m] - a).asDiagonal() * edge[k] - acc;
                    }
                }
            }
            std::vector<Matrix> next(K + 1);
            next[0] = decay(b - s);
            for (std::size_t k = 1; k <= K; ++k) {
                Matrix acc = Matrix::Zero(d, d);
                for (std::size_t r = 0; r < kGaussNodes; ++r) {
                    const double w = 0.5 * h * gl.weights[r];
                    acc.noalias() += w * (scaling(b - x[r]).asDiagonal() * (b_node[r] * phi[k - 1][r]));
                }
                next[k] = scaling(h).asDiagonal() * edge[k] - acc;
            }
            edge = std::move(next);
        }

        std::vector<Matrix> out;
        out.reserve(K + 1);
        for (const auto& e : edge) out.push_back(q_ * e * q_.transpose());
        return out;
    }

private:
    Vector scaling(double delta) const { return (-delta * lambdas_.array()).exp(); }
    Matrix decay(double delta) const { return scaling(delta).asDiagonal(); }
    Matrix rotated_b(double tau) const {
        return q_.transpose() * evaluate_perturbation(m_, tau).matrix() * q_;
    }

    const Model& m_;
    Vector lambdas_;
    Matrix q_;
};

// Doubles panels until `distance(previous, current)` < tolerance.
std::vector<Matrix> converge_terms(const Model& m, double s, double t, int max_k,
                                   const QuadratureSpec& quad,
                                   const std::function<double(const std::vector<Matrix>&,
                                                              const std::vector<Matrix>&)>& distance) {
    const DysonEngine engine(m);
    auto edges = panel_edges(s, t, m.perturbation().breakpoints, quad.initial_panels);
    auto previous = engine.terms(s, edges, max_k);
    double achieved = std::numeric_limits<double>::infinity();
    while (true) {
        edges = refine_edges(edges);
        if (static_cast<int>(edges.size()) - 1 > quad.max_panels) {
            throw AccuracyError("Dyson-Phillips quadrature did not reach tolerance " +
                                    fmt(quad.tolerance) + " (achieved " + fmt(achieved) + ")",
                                achieved);
        }
        auto current = engine.terms(s, edges, max_k);
        achieved = distance(previous, current);
        if (achieved < quad.tolerance) return current;
        previous = std::move(current);
    }
}

double max_term_distance(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        worst = std::max(worst, trace_norm(GeneralOperator(a[k] - b[k])));
    }
    return worst;
}

Matrix sum_of(const std::vector<Matrix>& terms) {
    Matrix total = Matrix::Zero(terms.front().rows(), terms.front().cols());
    for (const auto& x : terms) total += x;
    return total;
}

struct DysonPiece {
    Matrix u;
    double tail = 0.0;
    int depth = 0;
};

DysonPiece dyson_recursive(const Model& m, double s, double t, double eps_tail,
                           const DysonOptions& opts, int level) {
    const double xi = estimate_contraction(m, s, t, opts.constants_grid).xi;
    if (xi == 0.0) return {heat_kernel(m.a(), t - s).matrix(), 0.0, 0};

    int depth = -1;
    if (xi < 0.5) {
        for (int n = 0; n <= opts.max_depth; ++n) {
            if (std::pow(xi, n + 1) / (1.0 - xi) <= eps_tail) {
                depth = n;
                break;
            }
        }
    }
    if (depth < 0) {
        if (level >= opts.max_bisections) {
            throw ConfigurationError("Dyson-Phillips bisection depth exceeded " +
                                     std::to_string(opts.max_bisections) + " on [" + fmt(s) +
                                     ", " + fmt(t) + "] (xi = " + fmt(xi) + ")");
        }
        const double mid = 0.5 * (s + t);
        const DysonPiece lower = dyson_recursive(m, s, mid, 0.5 * eps_tail, opts, level + 1);
        const DysonPiece upper = dyson_recursive(m, mid, t, 0.5 * eps_tail, opts, level + 1);
        // ||V2 V1 - U2 U1|| <= e2 (1 + e1) + e1 for contractions U1, U2.
        return {upper.u * lower.u, upper.tail + lower.tail + upper.tail * lower.tail,
                std::max(upper.depth, lower.depth)};
    }

    const auto terms = converge_terms(
        m, s, t, depth, opts.quad, [](const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
            return trace_norm(GeneralOperator(sum_of(a) - sum_of(b)));
        });
    return {sum_of(terms), std::pow(xi, depth + 1) / (1.0 - xi), depth};
}

// Repeated Richardson extrapolation of the symmetric scheme over doubling n.
struct RombergResult {
    Matrix u;
    long finest_n = 0;
    double achieved = 0.0;
};

// Strang splitting with B sampled at step midpoints. The scheme is
// time-symmetric, so its global error expands in even powers of the step.
Matrix strang_midpoint(const Model& m, double a, double b, long steps) {
    const double h = (b - a) / static_cast<double>(steps);
    const AKernels k = a_kernels(m, h);
    Matrix u = k.half;
    for (long i = 0; i < steps; ++i) {
        const double mid = a + (static_cast<double>(i) + 0.5) * h;
        u = heat_kernel(evaluate_perturbation(m, mid), h).matrix() * u;
        u = (i + 1 < steps ? k.full : k.half) * u;
    }
    return u;
}

// Stops at the target, at max_n, or once successive differences stop
// shrinking (the rounding floor); `achieved` is the last useful difference.
RombergResult romberg_symmetric(const Model& m, double a, double b, double target,
                                const ReferenceOptions& opts) {
    constexpr int kMaxColumns = 6;
    constexpr int kMinLevels = 3;
    long n = opts.start_n;
    std::vector<Matrix> prev_row{strang_midpoint(m, a, b, n)};
    Matrix prev_best = prev_row.front();
    double prev_last = std::numeric_limits<double>::infinity();
    for (int j = 1; 2 * n <= opts.max_n; ++j) {
        n *= 2;
        std::vector<Matrix> row{strang_midpoint(m, a, b, n)};
        const int columns = std::min(j, kMaxColumns);
        for (int c = 1; c <= columns; ++c) {
            const double f = 1.0 / static_cast<double>((1L << (2 * c)) - 1);
            const auto cc = static_cast<std::size_t>(c);
            row.push_back(row[cc - 1] + f * (row[cc - 1] - prev_row[cc - 1]));
        }
        const double last = trace_norm(GeneralOperator(row.back() - prev_best));
        if (last <= target) return {row.back(), n, last};
        if (j >= kMinLevels && last >= prev_last) return {prev_best, n / 2, last};
        prev_best = row.back();
        prev_last = last;
        prev_row = std::move(row);
    }
    return {prev_best, n, prev_last};
}

bool singular_inside(const Model& m, double s, double t) {
    const auto& bps = m.perturbation().breakpoints;
    return std::any_of(bps.begin(), bps.end(), [&](const Breakpoint& bp) {
        return bp.singular() && bp.time >= s && bp.time <= t;
    });
}

}  // namespace

Partition make_partition(double s, double t, int n) {
    if (n < 1) throw ArgumentError("partition requires n >= 1");
    if (!(s < t)) throw OrderingError("partition requires s < t");
    Partition p{s, t, n, {}};
    p.points.reserve(static_cast<std::size_t>(n));
    const double h = (t - s) / n;
    for (int k = 0; k < n; ++k) p.points.push_back(s + k * h);
    return p;
}

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Left:
            return "left";
        case Scheme::Right:
            return "right";
        case Scheme::Symmetric:
            return "symmetric";
    }
    return "unknown";
}

Scheme scheme_from_string(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "left") return Scheme::Left;
    if (lower == "right") return Scheme::Right;
    if (lower == "symmetric") return Scheme::Symmetric;
    throw ArgumentError("unknown scheme '" + std::string(name) + "'");
}

std::string Method::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Product:
            os << to_string(scheme) << "(n=" << n << ")";
            break;
        case Kind::Dyson:
            os << "dyson(depth=" << depth << ", eps=" << tolerance << ")";
            break;
        case Kind::Reference:
            os << "reference(tol=" << tolerance << ", n=" << n << ")";
            break;
        case Kind::Exact:
            os << "exact";
            break;
    }
    return os.str();
}

GeneralOperator step_factor(Scheme scheme, const Model& m, double t_k, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("step_factor requires tau > 0");
    return GeneralOperator(factor(scheme, m, a_kernels(m, tau), t_k, tau));
}

GeneralOperator partial_product(Scheme scheme, const Model& m, const Partition& p, int first,
                                int last) {
    if (first < 1 || last > p.n || first > last + 1) {
        throw ArgumentError("partial_product: factor range out of bounds");
    }
    return GeneralOperator(product_matrix(scheme, m, p, first, last));
}

PropagatorResult product_approximant(Scheme scheme, const Model& m, double s, double t, int n) {
    const Partition p = make_partition(s, t, n);
    PropagatorResult r;
    r.U = GeneralOperator(product_matrix(scheme, m, p, 1, n));
    r.s = s;
    r.t = t;
    r.method.kind = Method::Kind::Product;
    r.method.scheme = scheme;
    r.method.n = n;
    return r;
}

std::vector<GeneralOperator> dyson_phillips_terms(const Model& m, double s, double t, int max_k,
                                                  const QuadratureSpec& quad) {
    if (max_k < 0) throw ArgumentError("Dyson-Phillips term index must be >= 0");
    if (s > t) throw OrderingError("Dyson-Phillips terms require s <= t");
    std::vector<GeneralOperator> out;
    if (s == t) {
        out.push_back(GeneralOperator::identity(m.dim()));
        for (int k = 1; k <= max_k; ++k) out.push_back(GeneralOperator::zero(m.dim()));
        return out;
    }
    if (max_k == 0) {
        out.push_back(heat_kernel(m.a(), t - s).as_general());
        return out;
    }
    for (auto& x : converge_terms(m, s, t, max_k, quad, max_term_distance)) {
        out.emplace_back(std::move(x));
    }
    return out;
}

GeneralOperator dyson_phillips_term(const Model& m, double s, double t, int k,
                                    const QuadratureSpec& quad) {
    if (k < 0) throw ArgumentError("Dyson-Phillips term index must be >= 0");
    if (s > t) throw OrderingError("Dyson-Phillips terms require s <= t");
    if (k == 0) return heat_kernel(m.a(), t - s).as_general();
    if (s == t) return GeneralOperator::zero(m.dim());
    const auto idx = static_cast<std::size_t>(k);
    auto terms = converge_terms(m, s, t, k, quad,
                                [idx](const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
                                    return trace_norm(GeneralOperator(a[idx] - b[idx]));
                                });
    return GeneralOperator(std::move(terms[idx]));
}

PropagatorResult dyson_phillips_sum(const Model& m, double s, double t, double eps_tail,
                                    const DysonOptions& opts) {
    if (!(eps_tail > 0.0)) throw ArgumentError("eps_tail must be positive");
    require_ordered(s, t, "dyson_phillips_sum");
    const DysonPiece piece = dyson_recursive(m, s, t, eps_tail, opts, 0);
    PropagatorResult r;
    r.U = GeneralOperator(piece.u);
    r.s = s;
    r.t = t;
    r.method.kind = Method::Kind::Dyson;
    r.method.depth = piece.depth;
    r.method.tolerance = eps_tail;
    r.tail_bound = piece.tail;
    return r;
}

PropagatorResult reference_propagator(const Model& m, double s, double t, double tol,
                                      const ReferenceOptions& opts) {
    if (!(tol >= 1e-12)) throw ArgumentError("reference tolerance must be >= 1e-12");
    if (opts.start_n < 1) throw ArgumentError("reference start_n must be >= 1");
    require_ordered(s, t, "reference_propagator");

    // Smooth pieces (graded toward singular breakpoints) composed by the
    // cocycle law; each piece gets a share of the tolerance.
    // Forty halvings leave a piece of relative length ~1e-12 next to a cusp;
    // its integral of B is then far below any admissible tolerance, while
    // every other graded piece is a distance of its own length from the cusp.
    // A singular breakpoint just outside [s, t] makes the nearby end nearly
    // singular too, so that end is graded as well.
    auto breakpoints = m.perturbation().breakpoints;
    for (const auto& bp : m.perturbation().breakpoints) {
        if (!bp.singular()) continue;
        if (bp.time > t && bp.time - t < t - s) breakpoints.push_back({t, bp.exponent});
        if (bp.time < s && s - bp.time < t - s) breakpoints.push_back({s, bp.exponent});
    }
    const auto pieces = panel_edges(s, t, breakpoints, 1);
    const auto count = static_cast<double>(pieces.size() - 1);
    Matrix u = Matrix::Identity(m.dim(), m.dim());
    long finest = 0;
    double achieved = 0.0;
    double worst = -1.0;
    std::size_t worst_piece = 0;
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        const double a = pieces[i];
        const double b = pieces[i + 1];
        const double share = 0.5 * tol * (b - a) / (t - s) + 0.5 * tol / count;
        const RombergResult piece = romberg_symmetric(m, a, b, 0.5 * share, opts);
        u = piece.u * u;
        finest = std::max(finest, piece.finest_n);
        achieved += piece.achieved;
        if (piece.achieved > worst) {
            worst = piece.achieved;
            worst_piece = i;
        }
    }
    // Pieces stuck at a rounding floor above their share are fine as long as
    // the total stays within budget.
    if (!(achieved <= 0.5 * tol)) {
        throw AccuracyError("reference propagator on [" + fmt(s) + ", " + fmt(t) +
                                "] reached only " + fmt(achieved) + " (largest piece [" +
                                fmt(pieces[worst_piece]) + ", " + fmt(pieces[worst_piece + 1]) +
                                "]: " + fmt(worst) + ", n up to " + std::to_string(finest) + ")",
                            achieved);
    }

    PropagatorResult r;
    r.U = GeneralOperator(std::move(u));
    r.s = s;
    r.t = t;
    r.method.kind = Method::Kind::Reference;
    r.method.scheme = Scheme::Symmetric;
    r.method.n = static_cast<int>(std::min<long>(finest, std::numeric_limits<int>::max()));
    r.method.tolerance = tol;
    r.achieved = achieved;

    // The series bisects down to subintervals with xi <= 1/2 on its own.
    if (opts.cross_validate && !singular_inside(m, s, t)) {
        DysonOptions d;
        d.quad.tolerance = 0.1 * tol;
        d.constants_grid = opts.constants_grid;
        std::optional<PropagatorResult> dyson;
        try {
            dyson = dyson_phillips_sum(m, s, t, tol, d);
        } catch (const ConfigurationError&) {
            // Too many bisections; nothing to compare.
        } catch (const AccuracyError&) {
            // Quadrature could not resolve the series to the requested level.
        }
        if (dyson) {
            const double gap = trace_norm(dyson->U - r.U);
            r.cross_check = gap;
            const double allowed = 10.0 * (tol + *dyson->tail_bound + d.quad.tolerance);
            if (gap > allowed) {
                throw AccuracyError("reference propagator disagrees with Dyson-Phillips sum: " +
                                        fmt(gap) + " > " + fmt(allowed),
                                    gap);
            }
        }
    }
    return r;
}

double integral_equation_residual(const PropagatorFn& u, const Model& m, double s, double t,
                                  const QuadratureSpec& quad) {
    require_ordered(s, t, "integral_equation_residual");
    const auto& gl = gauss_legendre16();
    auto integral = [&](const std::vector<double>& edges) {
        Matrix acc = Matrix::Zero(m.dim(), m.dim());
        for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
            const double a = edges[j];
            const double h = edges[j + 1] - a;
            for (std::size_t q = 0; q < kGaussNodes; ++q) {
                const double tau = a + 0.5 * h * (gl.nodes[q] + 1.0);
                acc.noalias() += 0.5 * h * gl.weights[q] *
                                 (heat_kernel(m.a(), t - tau).matrix() *
                                  evaluate_perturbation(m, tau).matrix() * u(s, tau).matrix());
            }
        }
        return acc;
    };

    auto edges = panel_edges(s, t, m.perturbation().breakpoints, quad.initial_panels);
    Matrix previous = integral(edges);
    double achieved = std::numeric_limits<double>::infinity();
    while (true) {
        edges = refine_edges(edges);
        if (static_cast<int>(edges.size()) - 1 > quad.max_panels) {
            throw AccuracyError("integral-equation quadrature did not reach tolerance " +
                                    fmt(quad.tolerance) + " (achieved " + fmt(achieved) + ")",
                                achieved);
        }
        Matrix current = integral(edges);
        achieved = trace_norm(GeneralOperator(current - previous));
        previous = std::move(current);
        if (achieved < quad.tolerance) break;
    }
    const Matrix residual = u(s, t).matrix() - heat_kernel(m.a(), t - s).matrix() + previous;
    return trace_norm(GeneralOperator(residual));
}

}  // namespace gibbsflow
