#include "gibbsflow/analysis.hpp"

#include "gibbsflow/errors.hpp"
#include "gibbsflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gibbsflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_exponents(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in [0,1)");
    if (!(beta > 0.0 && beta <= 1.0)) throw ArgumentError("beta must lie in (0,1]");
}

std::string fmt_double(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

std::string to_string(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::GeneralBetaGtAlpha: return "GeneralBetaGtAlpha";
        case RegimeKind::LipschitzHalfOne: return "LipschitzHalfOne";
        case RegimeKind::LipschitzHilbertLog: return "LipschitzHilbertLog";
        case RegimeKind::BetaGt2AlphaMinus1: return "BetaGt2AlphaMinus1";
    }
    return "unknown";
}

RegimeKind regime_kind_from_string(const std::string& name) {
    for (auto k : {RegimeKind::GeneralBetaGtAlpha, RegimeKind::LipschitzHalfOne,
                   RegimeKind::LipschitzHilbertLog, RegimeKind::BetaGt2AlphaMinus1}) {
        if (to_string(k) == name) return k;
    }
    throw ArgumentError("unknown rate regime '" + name + "'");
}

int RateRegime::min_n() const { return kind == RegimeKind::LipschitzHilbertLog ? 2 : 1; }

double RateRegime::epsilon(int n) const {
    if (n < min_n()) {
        throw ArgumentError("rate " + formula() + " undefined at n = " + std::to_string(n));
    }
    const double x = n;
    switch (kind) {
        case RegimeKind::GeneralBetaGtAlpha: return std::pow(x, -(beta - alpha));
        case RegimeKind::LipschitzHalfOne: return std::pow(x, -(1.0 - alpha));
        case RegimeKind::LipschitzHilbertLog: return std::log(x) / x;
        case RegimeKind::BetaGt2AlphaMinus1: return std::pow(x, -beta);
    }
    return kNaN;
}

std::string RateRegime::formula() const {
    switch (kind) {
        case RegimeKind::GeneralBetaGtAlpha: return "n^-" + fmt_double(beta - alpha);
        case RegimeKind::LipschitzHalfOne: return "n^-" + fmt_double(1.0 - alpha);
        case RegimeKind::LipschitzHilbertLog: return "log(n)/n";
        case RegimeKind::BetaGt2AlphaMinus1: return "n^-" + fmt_double(beta);
    }
    return "?";
}

std::optional<RateRegime> select_regime(double alpha, double beta) {
    const auto all = applicable_regimes(alpha, beta);
    if (all.empty()) return std::nullopt;
    return all.front();
}

std::vector<RateRegime> applicable_regimes(double alpha, double beta) {
    check_exponents(alpha, beta);
    std::vector<RateRegime> out;
    const double gap = 2.0 * alpha - 1.0;
    if (beta == 1.0) {
        out.push_back({RegimeKind::LipschitzHilbertLog, alpha, beta});
        if (alpha > 0.5) out.push_back({RegimeKind::LipschitzHalfOne, alpha, beta});
        return out;
    }
    // The Hoelder bounds below are stated for beta < 1 only.
    if (gap > 0.0 && beta > gap) out.push_back({RegimeKind::BetaGt2AlphaMinus1, alpha, beta});
    if (beta > alpha) out.push_back({RegimeKind::GeneralBetaGtAlpha, alpha, beta});
    return out;
}

std::string no_regime_reason(double alpha, double beta) {
    check_exponents(alpha, beta);
    if (!applicable_regimes(alpha, beta).empty()) return {};
    return "no known bound for alpha = " + fmt_double(alpha) + ", beta = " + fmt_double(beta) +
           ": beta <= alpha and beta > 2 alpha - 1 > 0 fails";
}

RateFit fit_rate(const std::vector<int>& n_list, const std::vector<double>& errors) {
    if (n_list.size() != errors.size()) {
        throw ArgumentError("fit_rate: n_list and errors differ in length");
    }
    std::vector<double> x, y;
    RateFit fit;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1) throw ArgumentError("fit_rate: n must be >= 1");
        if (errors[i] > 0.0 && std::isfinite(errors[i])) {
            x.push_back(std::log(static_cast<double>(n_list[i])));
            y.push_back(std::log(errors[i]));
        } else {
            ++fit.excluded;
        }
    }
    if (x.size() < 3) {
        throw FitError("rate fit needs at least 3 positive errors, got " + std::to_string(x.size()));
    }
    const double count = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw FitError("rate fit needs at least two distinct n");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    fit.used = static_cast<int>(x.size());
    return fit;
}

PropagatorResult oracle_propagator(const Model& m, double s, double t, double tol_ref,
                                   const ReferenceOptions& opts) {
    if (m.has_exact()) {
        PropagatorResult r{m.exact(s, t), s, t, Method{}, std::nullopt, std::nullopt, std::nullopt};
        r.method.kind = Method::Kind::Exact;
        return r;
    }
    return reference_propagator(m, s, t, tol_ref, opts);
}

ConvergenceReport run_convergence(const Model& m, Scheme scheme, double s, double t,
                                  const std::vector<int>& n_list, double tol_ref,
                                  const ConvergenceOptions& opts) {
    if (n_list.size() < 3) throw FitError("n_list needs at least 3 entries for a rate fit");
    return run_convergence_against(m, scheme, oracle_propagator(m, s, t, tol_ref, opts.reference),
                                   n_list, opts);
}

ConvergenceReport run_convergence_against(const Model& m, Scheme scheme,
                                          const PropagatorResult& oracle,
                                          const std::vector<int>& n_list,
                                          const ConvergenceOptions& opts) {
    if (n_list.size() < 3) throw FitError("n_list needs at least 3 entries for a rate fit");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1) throw ArgumentError("n_list entries must be >= 1");
        if (i > 0 && n_list[i] <= n_list[i - 1]) throw ArgumentError("n_list must be ascending");
    }
    ConvergenceReport r;
    r.model = m.descriptor();
    r.scheme = scheme;
    r.s = oracle.s;
    r.t = oracle.t;
    r.alpha = m.alpha();
    r.beta = m.beta();
    r.n_list = n_list;
    r.bound_slack = opts.bound_slack;
    r.oracle = oracle.method.kind == Method::Kind::Exact ? "exact" : "reference";
    r.oracle_error_budget = oracle.method.kind == Method::Kind::Exact ? 0.0 : oracle.method.tolerance;

    const std::size_t count = n_list.size();
    r.err_op.assign(count, 0.0);
    r.err_tr.assign(count, 0.0);
    parallel_for(count, opts.threads, [&](std::size_t i) {
        const auto approx = product_approximant(scheme, m, r.s, r.t, n_list[i]);
        const GeneralOperator diff = approx.U - oracle.U;
        r.err_op[i] = operator_norm(diff);
        r.err_tr[i] = trace_norm(diff);
    });

    r.applicable = applicable_regimes(r.alpha, r.beta);
    if (!r.applicable.empty()) r.regime = r.applicable.front();
    r.regime_note = r.regime ? r.regime->formula() : no_regime_reason(r.alpha, r.beta);
    r.epsilon.assign(count, kNaN);
    if (r.regime) {
        for (std::size_t i = 0; i < count; ++i) {
            if (n_list[i] >= r.regime->min_n()) r.epsilon[i] = r.regime->epsilon(n_list[i]);
        }
    }

    r.exact_reproduction = std::all_of(r.err_tr.begin(), r.err_tr.end(),
                                       [](double e) { return e <= kExactFloor; });
    r.fitted_slope = kNaN;
    if (!r.exact_reproduction) {
        std::vector<int> ns;
        std::vector<double> es;
        int floored = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (r.err_tr[i] > kExactFloor) {
                ns.push_back(n_list[i]);
                es.push_back(r.err_tr[i]);
            } else {
                ++floored;
            }
        }
        r.fit = fit_rate(ns, es);
        r.fit->excluded += floored;
        r.fitted_slope = r.fit->slope;
    }

    r.train_count = opts.train_count < 0 ? static_cast<int>(count / 2) : opts.train_count;
    if (r.train_count < 1 || r.train_count >= static_cast<int>(count)) {
        throw ArgumentError("train_count must leave at least one training and one test point");
    }
    double fitted = 0.0, train = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        if (std::isnan(r.epsilon[i])) continue;
        const double ratio = r.err_tr[i] / r.epsilon[i];
        fitted = std::max(fitted, ratio);
        if (static_cast<int>(i) < r.train_count) train = std::max(train, ratio);
    }
    r.fitted_prefactor = r.regime ? fitted : kNaN;
    r.train_prefactor = r.regime ? train : kNaN;

    if (r.exact_reproduction) {
        r.bound_satisfied = true;
    } else if (!r.regime) {
        r.bound_satisfied = false;
    } else {
        bool ok = true;
        for (std::size_t i = static_cast<std::size_t>(r.train_count); i < count; ++i) {
            if (std::isnan(r.epsilon[i])) continue;
            const double bound =
                (1.0 + opts.bound_slack) * train * r.epsilon[i] + r.oracle_error_budget;
            if (r.err_tr[i] > bound) ok = false;
        }
        r.bound_satisfied = ok;
    }

    if (!r.exact_reproduction && r.oracle_error_budget > 0.0) {
        const double smallest = *std::min_element(r.err_tr.begin(), r.err_tr.end());
        if (100.0 * r.oracle_error_budget > smallest) {
            r.warnings.push_back("oracle tolerance " + fmt_double(r.oracle_error_budget) +
                                 " is within a factor 100 of the smallest error " +
                                 fmt_double(smallest));
        }
    }
    if (!r.regime) r.warnings.push_back(r.regime_note);
    return r;
}

ProductBoundResult verify_product_bound(const Generator& a, const std::vector<GeneralOperator>& contractions,
                             const std::vector<double>& times) {
    if (contractions.empty()) throw ArgumentError("product-bound check needs at least one factor");
    if (contractions.size() != times.size()) {
        throw ArgumentError("product-bound check needs one time per contraction");
    }
    const Eigen::Index d = a.dim();
    GeneralOperator product = GeneralOperator::identity(d);
    double norm_product = 1.0;
    double total = 0.0;
    for (std::size_t j = 0; j < contractions.size(); ++j) {
        if (!(times[j] > 0.0)) throw ArgumentError("product-bound check needs positive times");
        if (contractions[j].dim() != d) throw ArgumentError("contraction dimension mismatch");
        product = product * contractions[j] * heat_kernel(a.op(), times[j]);
        norm_product *= operator_norm(contractions[j]);
        total += times[j];
    }
    ProductBoundResult r;
    r.lhs = trace_norm(product);
    r.rhs = norm_product * trace_norm(heat_kernel(a.op(), total / 4.0));
    r.margin = r.rhs - r.lhs;
    r.holds = r.margin >= -1e-10 * r.rhs;
    return r;
}

namespace {

Matrix random_orthogonal(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // Fix column signs so Q is Haar distributed.
    const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j) {
        if (rr(j, j) < 0) q.col(j) *= -1.0;
    }
    return q;
}

}  // namespace

ProductBoundInstance random_product_bound_instance(std::mt19937_64& rng, int max_dim, int max_factors) {
    if (max_dim < 1 || max_factors < 1) throw ArgumentError("instance bounds must be positive");
    std::uniform_int_distribution<int> dim_dist(1, max_dim);
    std::uniform_int_distribution<int> count_dist(1, max_factors);
    std::uniform_real_distribution<double> lambda_dist(1.0, 20.0);
    std::uniform_real_distribution<double> scale_dist(0.0, 1.0);
    std::uniform_real_distribution<double> time_dist(0.01, 2.0);

    const int dim = dim_dist(rng);
    const int factors = count_dist(rng);
    Vector lambdas(dim);
    for (int i = 0; i < dim; ++i) lambdas(i) = lambda_dist(rng);
    std::sort(lambdas.data(), lambdas.data() + dim);
    const Matrix q = random_orthogonal(rng, dim);

    std::vector<GeneralOperator> v;
    std::vector<double> times;
    for (int j = 0; j < factors; ++j) {
        Vector scales(dim);
        for (int i = 0; i < dim; ++i) scales(i) = scale_dist(rng);
        v.emplace_back(random_orthogonal(rng, dim) * scales.asDiagonal());
        times.push_back(time_dist(rng));
    }
    return ProductBoundInstance{Generator(HermitianOperator::from_spectrum(lambdas, q)), std::move(v),
                           std::move(times)};
}

ProductBoundSummary product_bound_suite(std::uint64_t seed, int instances) {
    if (instances < 1) throw ArgumentError("product-bound suite needs at least one instance");
    std::mt19937_64 rng(seed);
    ProductBoundSummary summary;
    summary.seed = seed;
    summary.instances = instances;
    summary.worst_relative_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances; ++i) {
        const auto inst = random_product_bound_instance(rng);
        const auto r = verify_product_bound(inst.a, inst.contractions, inst.times);
        if (r.holds) ++summary.held;
        summary.worst_relative_margin = std::min(summary.worst_relative_margin, r.margin / r.rhs);
    }
    return summary;
}

LiftingCheck verify_lifting(const Model& m, Scheme scheme, double s, double t, int n,
                            double tol_ref, const ReferenceOptions& opts) {
    if (n < 4 || n % 2 != 0) throw ArgumentError("lifting check needs an even n >= 4");
    if (!(s < t)) throw OrderingError("lifting check requires s < t");
    const Partition p = make_partition(s, t, n);
    const int k = n / 2;
    const double mid = 0.5 * (s + t);

    // Factors 1..k cover [s, mid]; k+1..n cover [mid, t].
    const GeneralOperator lower = partial_product(scheme, m, p, 1, k);
    const GeneralOperator upper = partial_product(scheme, m, p, k + 1, n);
    const GeneralOperator u_lower = oracle_propagator(m, s, mid, tol_ref, opts).U;
    const GeneralOperator u_upper = oracle_propagator(m, mid, t, tol_ref, opts).U;
    const GeneralOperator u = m.has_exact() ? m.exact(s, t) : u_upper * u_lower;

    LiftingCheck c;
    c.model = m.descriptor();
    c.scheme = scheme;
    c.s = s;
    c.t = t;
    c.n = n;
    c.k_n = k;
    c.lhs = trace_norm(upper * lower - u);
    c.half_op_errors = {operator_norm(upper - u_upper), operator_norm(lower - u_lower)};
    c.half_tr_norms = {trace_norm(lower), trace_norm(u_upper)};
    c.rhs = c.half_op_errors[0] * c.half_tr_norms[0] + c.half_tr_norms[1] * c.half_op_errors[1];
    c.c_ts = trace_norm(heat_kernel(m.a(), 0.5 * (t - s)));
    return c;
}

}  // namespace gibbsflow
