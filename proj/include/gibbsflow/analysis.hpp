#pragma once

// Rate regimes for ||U_n - U||, empirical rate fits, convergence experiments
// against an exact or reference propagator, the trace-norm product inequality
// ||prod V_j e^{-t_j A}||_1 <= prod ||V_j|| ||e^{-(sum t_j) A/4}||_1, and the
// midpoint lifting decomposition that turns operator-norm errors of the two
// half products into a trace-norm bound.

#include "gibbsflow/constants.hpp"
#include "gibbsflow/models.hpp"
#include "gibbsflow/propagator.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gibbsflow {

enum class RegimeKind {
    GeneralBetaGtAlpha,   // n^{-(beta - alpha)}
    LipschitzHalfOne,     // n^{-(1 - alpha)}, beta = 1, alpha in (1/2, 1)
    LipschitzHilbertLog,  // log(n) / n, beta = 1
    BetaGt2AlphaMinus1,   // n^{-beta}, beta > 2 alpha - 1 > 0
};

std::string to_string(RegimeKind kind);
RegimeKind regime_kind_from_string(const std::string& name);

struct RateRegime {
    RegimeKind kind = RegimeKind::LipschitzHilbertLog;
    double alpha = 0.0;
    double beta = 1.0;

    // Throws ArgumentError where undefined (n < 1, or n < 2 for log(n)/n).
    double epsilon(int n) const;
    // Smallest n at which epsilon is defined.
    int min_n() const;
    std::string formula() const;
};

// Headline regime: beta = 1 -> log(n)/n; else beta > 2alpha-1 > 0 -> n^-beta;
// else beta > alpha -> n^-(beta-alpha); else no known bound (nullopt).
// Throws ArgumentError for alpha outside [0,1) or beta outside (0,1].
std::optional<RateRegime> select_regime(double alpha, double beta);

// Every regime whose hypotheses hold, headline first.
std::vector<RateRegime> applicable_regimes(double alpha, double beta);

std::string no_regime_reason(double alpha, double beta);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int used = 0;
    int excluded = 0;  // non-positive errors dropped from the fit
};

// Ordinary least squares on (ln n, ln err). Throws FitError with fewer than
// three positive errors.
RateFit fit_rate(const std::vector<int>& n_list, const std::vector<double>& errors);

// Errors at or below this are treated as exact reproduction.
inline constexpr double kExactFloor = 1e-12;

struct ConvergenceOptions {
    int train_count = -1;      // -1: first half of n_list
    double bound_slack = 0.0;  // test: err <= (1 + slack) * prefactor * eps
    int threads = 1;
    ReferenceOptions reference{};
};

struct ConvergenceReport {
    std::string model;
    Scheme scheme = Scheme::Left;
    double s = 0.0;
    double t = 1.0;
    double alpha = 0.0;
    double beta = 1.0;
    std::vector<int> n_list;
    std::vector<double> err_op;
    std::vector<double> err_tr;
    std::vector<double> epsilon;  // NaN where the regime is undefined or absent
    std::string oracle;           // "exact" or "reference"
    double oracle_error_budget = 0.0;
    std::optional<RateFit> fit;   // absent on exact reproduction
    double fitted_slope = 0.0;    // NaN when no fit
    double fitted_prefactor = 0.0;
    double train_prefactor = 0.0;
    int train_count = 0;
    double bound_slack = 0.0;
    std::optional<RateRegime> regime;
    std::vector<RateRegime> applicable;
    std::string regime_note;
    bool bound_satisfied = false;
    bool exact_reproduction = false;
    std::vector<std::string> warnings;
};

// Measures err_op / err_tr of the product approximant against the model's
// closed form when present, else against reference_propagator(tol_ref).
ConvergenceReport run_convergence(const Model& m, Scheme scheme, double s, double t,
                                  const std::vector<int>& n_list, double tol_ref,
                                  const ConvergenceOptions& opts = {});

// Same, against a precomputed oracle U(t,s) (shared between schemes).
ConvergenceReport run_convergence_against(const Model& m, Scheme scheme,
                                          const PropagatorResult& oracle,
                                          const std::vector<int>& n_list,
                                          const ConvergenceOptions& opts = {});

// Exact U(t,s) when available, otherwise the reference propagator.
PropagatorResult oracle_propagator(const Model& m, double s, double t, double tol_ref,
                                   const ReferenceOptions& opts = {});

struct ProductBoundResult {
    bool holds = false;
    double margin = 0.0;  // rhs - lhs
    double lhs = 0.0;
    double rhs = 0.0;
};

// lhs = ||V_1 e^{-t_1 A} V_2 e^{-t_2 A} ... V_n e^{-t_n A}||_1,
// rhs = prod ||V_j|| * ||e^{-(t_1 + ... + t_n) A / 4}||_1.
ProductBoundResult verify_product_bound(const Generator& a, const std::vector<GeneralOperator>& contractions,
                             const std::vector<double>& times);

struct ProductBoundInstance {
    Generator a;
    std::vector<GeneralOperator> contractions;
    std::vector<double> times;
};

// dim in [1, max_dim], 1..max_factors factors, V_j = orthogonal * diag(scales
// in [0,1]), t_j in [0.01, 2], A = Q diag(lambda >= 1) Q^T.
ProductBoundInstance random_product_bound_instance(std::mt19937_64& rng, int max_dim = 16,
                                        int max_factors = 8);

struct ProductBoundSummary {
    std::uint64_t seed = 0;
    int instances = 0;
    int held = 0;
    double worst_relative_margin = 0.0;
};

ProductBoundSummary product_bound_suite(std::uint64_t seed, int instances);

struct LiftingCheck {
    std::string model;
    Scheme scheme = Scheme::Left;
    double s = 0.0;
    double t = 1.0;
    int n = 0;
    int k_n = 0;
    double lhs = 0.0;
    std::array<double, 2> half_op_errors{};  // upper half, lower half
    std::array<double, 2> half_tr_norms{};   // ||lower product||_1, ||U(t, mid)||_1
    double rhs = 0.0;
    double c_ts = 0.0;  // ||e^{-(t-s)A/2}||_1

    double margin() const { return rhs - lhs; }
    bool holds() const { return lhs <= rhs + 1e-10; }
};

// Splits the n-factor product at k_n = n/2. Throws ArgumentError for odd n or n < 4.
LiftingCheck verify_lifting(const Model& m, Scheme scheme, double s, double t, int n,
                            double tol_ref, const ReferenceOptions& opts = {});

}  // namespace gibbsflow
