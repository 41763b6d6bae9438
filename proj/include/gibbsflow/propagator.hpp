#pragma once

// Evolution-family constructions for du/dt = -(A + B(t)) u:
//   * product-formula approximants U_n(t,s) in left, right and symmetric form,
//   * the Dyson-Phillips series sum_k S_k(t,s) with geometric tail control,
//   * a high-accuracy reference propagator (extrapolated midpoint Strang splitting),
//   * the variation-of-constants residual used to check any candidate U.

#include "gibbsflow/constants.hpp"
#include "gibbsflow/models.hpp"
#include "gibbsflow/quadrature.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gibbsflow {

// Left-endpoint grid t_k = s + (k-1)(t-s)/n, k = 1..n (stored 0-based).
// The last point is t - (t-s)/n, strictly below t.
struct Partition {
    double s = 0.0;
    double t = 0.0;
    int n = 0;
    std::vector<double> points;

    double step() const { return (t - s) / n; }
};

Partition make_partition(double s, double t, int n);

enum class Scheme { Left, Right, Symmetric };

std::string to_string(Scheme scheme);
// Accepts "left", "right", "symmetric" (case-insensitive). Throws ArgumentError.
Scheme scheme_from_string(std::string_view name);
inline constexpr Scheme kAllSchemes[] = {Scheme::Left, Scheme::Right, Scheme::Symmetric};

struct Method {
    enum class Kind { Product, Dyson, Reference, Exact };
    Kind kind = Kind::Exact;
    Scheme scheme = Scheme::Left;
    int n = 0;             // product: number of factors; reference: finest n used
    int depth = 0;         // dyson: truncation index N
    double tolerance = 0;  // reference / dyson tolerance

    std::string describe() const;
};

struct PropagatorResult {
    GeneralOperator U;
    double s = 0.0;
    double t = 0.0;
    Method method;
    std::optional<double> tail_bound;     // dyson: composed geometric tail bound
    std::optional<double> achieved;       // reference: last successive difference
    std::optional<double> cross_check;    // reference: ||reference - dyson||_1
};

// Left:      e^{-tau A} e^{-tau B(t_k)}
// Right:     e^{-tau B(t_k)} e^{-tau A}
// Symmetric: e^{-tau A/2} e^{-tau B(t_k)} e^{-tau A/2}
GeneralOperator step_factor(Scheme scheme, const Model& m, double t_k, double tau);

// W_last ... W_first over the partition (1-based factor indices, higher
// index applied on the left).
GeneralOperator partial_product(Scheme scheme, const Model& m, const Partition& p, int first,
                                int last);

PropagatorResult product_approximant(Scheme scheme, const Model& m, double s, double t, int n);

// S_0 = e^{-(t-s)A}, S_k(t,s) = -int_s^t G(t-tau) B(tau) S_{k-1}(tau,s) dtau.
// Panel doubling until successive values differ by less than quad.tolerance
// in trace norm; throws AccuracyError otherwise.
GeneralOperator dyson_phillips_term(const Model& m, double s, double t, int k,
                                    const QuadratureSpec& quad = {});

// S_0 .. S_{max_k}; converged jointly (every term within quad.tolerance).
std::vector<GeneralOperator> dyson_phillips_terms(const Model& m, double s, double t, int max_k,
                                                  const QuadratureSpec& quad = {});

struct DysonOptions {
    QuadratureSpec quad{};
    int max_depth = 40;
    int max_bisections = 32;
    int constants_grid = kDefaultConstantsGrid;
};

// Truncated series with tail bound xi^{N+1}/(1-xi) <= eps_tail; intervals with
// xi >= 1/2 are bisected and composed through the cocycle law.
PropagatorResult dyson_phillips_sum(const Model& m, double s, double t, double eps_tail,
                                    const DysonOptions& opts = {});

struct ReferenceOptions {
    int start_n = 4;
    long max_n = 1L << 20;
    bool cross_validate = true;
    int constants_grid = 201;
};

// Romberg-extrapolated midpoint Strang splitting on smooth pieces composed by
// the cocycle law. Throws AccuracyError when the summed successive-extrapolant
// differences of the pieces exceed tol/2 (n capped at max_n per piece).
PropagatorResult reference_propagator(const Model& m, double s, double t, double tol,
                                      const ReferenceOptions& opts = {});

// Candidate propagator (s, t) -> U(t, s).
using PropagatorFn = std::function<GeneralOperator(double s, double t)>;

// || U(t,s) - G(t-s) + int_s^t G(t-tau) B(tau) U(tau,s) dtau ||_1
double integral_equation_residual(const PropagatorFn& u, const Model& m, double s, double t,
                                  const QuadratureSpec& quad = {});

}  // namespace gibbsflow
