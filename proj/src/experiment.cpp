#include "gibbsflow/experiment.hpp"

#include "gibbsflow/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace gibbsflow {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Config validation

class Validator {
public:
    void fail(const std::string& path, const std::string& message) {
        failures_.push_back(path + ": " + message);
    }
    bool ok() const { return failures_.empty(); }
    const std::vector<std::string>& failures() const { return failures_; }

    void reject_unknown(const json& obj, const std::string& path,
                        std::initializer_list<const char*> known) {
        const std::set<std::string> allowed(known.begin(), known.end());
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown field");
        }
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    void number(const json& obj, const std::string& path, const char* key, double& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(join(path, key), "must be a number");
            return;
        }
        out = v.get<double>();
        if (!std::isfinite(out)) fail(join(path, key), "must be finite");
    }

    void optional_number(const json& obj, const std::string& path, const char* key,
                         std::optional<double>& out) {
        if (!obj.contains(key)) return;
        double v = 0.0;
        const auto before = failures_.size();
        number(obj, path, key, v);
        if (failures_.size() == before) out = v;
    }

    void integer(const json& obj, const std::string& path, const char* key, int& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number_integer()) {
            fail(join(path, key), "must be an integer");
            return;
        }
        const auto wide = v.get<long long>();
        if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
            fail(join(path, key), "out of integer range");
            return;
        }
        out = static_cast<int>(wide);
    }

    void string(const json& obj, const std::string& path, const char* key, std::string& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail(join(path, key), "must be a string");
            return;
        }
        out = v.get<std::string>();
    }

    void number_list(const json& obj, const std::string& path, const char* key,
                     std::vector<double>& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_array()) {
            fail(join(path, key), "must be an array of numbers");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                fail(join(path, key) + "[" + std::to_string(i) + "]", "must be a number");
                continue;
            }
            out.push_back(v[i].get<double>());
        }
    }

    void int_list(const json& v, const std::string& path, std::vector<int>& out) {
        if (!v.is_array()) {
            fail(path, "must be an array of integers");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer()) {
                fail(path + "[" + std::to_string(i) + "]", "must be an integer");
                continue;
            }
            out.push_back(v[i].get<int>());
        }
    }

private:
    std::vector<std::string> failures_;
};

const json* object_field(Validator& v, const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return nullptr;
    const json& child = obj.at(key);
    if (!child.is_object()) {
        v.fail(Validator::join(path, key), "must be an object");
        return nullptr;
    }
    return &child;
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    for (const auto& nm : builtin_models()) out.push_back(nm.name);
    return out;
}

void parse_profile(Validator& v, const json& p, const std::string& path, ScalarProfile& out) {
    if (p.contains("kind")) {
        std::string kind;
        v.string(p, path, "kind", kind);
        if (kind == "constant") {
            v.reject_unknown(p, path, {"kind", "value"});
            double c = 0.0;
            v.number(p, path, "value", c);
            out = ScalarProfile::constant(c);
        } else if (kind == "linear") {
            v.reject_unknown(p, path, {"kind", "intercept", "slope"});
            double c = 0.0, slope = 0.0;
            v.number(p, path, "intercept", c);
            v.number(p, path, "slope", slope);
            out = ScalarProfile::linear(c, slope);
        } else if (kind == "cusp") {
            v.reject_unknown(p, path, {"kind", "scale", "center", "power", "offset"});
            double scale = 1.0, center = 0.5, power = 0.5, offset = 0.0;
            v.number(p, path, "scale", scale);
            v.number(p, path, "center", center);
            v.number(p, path, "power", power);
            v.number(p, path, "offset", offset);
            if (!(power > 0.0)) v.fail(path + ".power", "power > 0 required");
            out = ScalarProfile::cusp(scale, center, power, offset);
        } else {
            v.fail(path + ".kind", "unknown profile kind '" + kind + "' (constant, linear, cusp)");
        }
        return;
    }
    v.reject_unknown(p, path, {"offset", "slope", "cusp_scale", "cusp_center", "cusp_power"});
    ScalarProfile r;
    v.number(p, path, "offset", r.offset);
    v.number(p, path, "slope", r.slope);
    v.number(p, path, "cusp_scale", r.cusp_scale);
    v.number(p, path, "cusp_center", r.cusp_center);
    v.number(p, path, "cusp_power", r.cusp_power);
    if (!(r.cusp_power > 0.0)) v.fail(path + ".cusp_power", "cusp_power > 0 required");
    out = r;
}

json profile_to_json(const ScalarProfile& p) {
    return json{{"offset", p.offset},
                {"slope", p.slope},
                {"cusp_scale", p.cusp_scale},
                {"cusp_center", p.cusp_center},
                {"cusp_power", p.cusp_power}};
}

void parse_model(Validator& v, const json& m, ModelConfig& out) {
    const std::string path = "model";
    v.reject_unknown(m, path,
                     {"family", "name", "a", "profile", "lambdas", "couplings", "dim", "rho",
                      "omega", "t0"});
    v.string(m, path, "family", out.family);
    v.string(m, path, "name", out.name);
    v.number(m, path, "a", out.a);
    if (const json* p = object_field(v, m, path, "profile")) {
        parse_profile(v, *p, "model.profile", out.profile);
    }
    v.number_list(m, path, "lambdas", out.lambdas);
    v.number_list(m, path, "couplings", out.couplings);
    v.integer(m, path, "dim", out.dim);
    v.number(m, path, "rho", out.rho);
    v.number(m, path, "omega", out.omega);
    v.number(m, path, "t0", out.t0);

    const auto& f = out.family;
    if (f == "builtin") {
        const auto names = builtin_names();
        if (std::find(names.begin(), names.end(), out.name) == names.end()) {
            std::string all;
            for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
            v.fail("model.name", "unknown builtin model '" + out.name + "' (" + all + ")");
        }
    } else if (f == "scalar") {
        if (!(out.a >= 1.0)) v.fail("model.a", "a >= 1 required");
    } else if (f == "commuting" || f == "rotating") {
        for (std::size_t i = 0; i < out.lambdas.size(); ++i) {
            if (!(out.lambdas[i] >= 1.0)) {
                v.fail("model.lambdas[" + std::to_string(i) + "]", "eigenvalue >= 1 required");
            }
        }
        if (f == "commuting") {
            if (!out.couplings.empty() && out.couplings.size() != out.lambdas.size() &&
                !(out.lambdas.empty() && out.couplings.size() == 8)) {
                v.fail("model.couplings", "length must match model.lambdas");
            }
            for (std::size_t i = 0; i < out.couplings.size(); ++i) {
                if (!(out.couplings[i] >= 0.0)) {
                    v.fail("model.couplings[" + std::to_string(i) + "]", "coupling >= 0 required");
                }
            }
        } else {
            if (out.dim < 2) v.fail("model.dim", "dim >= 2 required");
            if (!out.lambdas.empty() && static_cast<int>(out.lambdas.size()) != out.dim) {
                v.fail("model.lambdas", "length must equal model.dim");
            }
            if (!(std::abs(out.rho) < 1.0)) v.fail("model.rho", "|rho| < 1 required");
        }
    } else {
        v.fail("model.family",
               "unknown model family '" + f + "' (scalar, commuting, rotating, builtin)");
    }
}

void parse_schemes(Validator& v, const json& s, std::vector<Scheme>& out) {
    auto one = [&](const json& item, const std::string& path) {
        if (!item.is_string()) {
            v.fail(path, "must be a string");
            return;
        }
        const std::string name = item.get<std::string>();
        if (name == "all") {
            out.assign(std::begin(kAllSchemes), std::end(kAllSchemes));
            return;
        }
        try {
            const Scheme sc = scheme_from_string(name);
            if (std::find(out.begin(), out.end(), sc) == out.end()) out.push_back(sc);
        } catch (const ArgumentError&) {
            v.fail(path, "unknown scheme '" + name + "' (left, right, symmetric, all)");
        }
    };
    out.clear();
    if (s.is_array()) {
        for (std::size_t i = 0; i < s.size(); ++i) one(s[i], "scheme[" + std::to_string(i) + "]");
        if (s.empty()) v.fail("scheme", "at least one scheme required");
    } else {
        one(s, "scheme");
    }
}

double default_beta(const ModelConfig& m) {
    if (m.family == "rotating") return 0.5;
    if (m.profile.cusp_scale != 0.0 && m.profile.cusp_power < 1.0) return m.profile.cusp_power;
    return 1.0;
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

Vector default_lambdas(int dim) {
    Vector l(dim);
    for (int i = 0; i < dim; ++i) l(i) = i + 1.0;
    return l;
}

// ---------------------------------------------------------------------------
// Number formatting

std::string g17(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double get_num(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return kNaN;
    return j.at(key).get<double>();
}

std::string config_id(const json& config) {
    // FNV-1a over the canonical dump.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Report serialization

json regime_to_json(const RateRegime& r) {
    return json{{"kind", to_string(r.kind)}, {"alpha", r.alpha}, {"beta", r.beta},
                {"formula", r.formula()}};
}

RateRegime regime_from_json(const json& j) {
    return RateRegime{regime_kind_from_string(j.at("kind").get<std::string>()),
                      j.at("alpha").get<double>(), j.at("beta").get<double>()};
}

json doubles(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

std::vector<double> doubles_from(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(x.is_null() ? kNaN : x.get<double>());
    return out;
}

json convergence_to_json(const ConvergenceReport& r) {
    json j{{"model", r.model},
           {"scheme", to_string(r.scheme)},
           {"s", r.s},
           {"t", r.t},
           {"alpha", r.alpha},
           {"beta", r.beta},
           {"n_list", r.n_list},
           {"err_op", doubles(r.err_op)},
           {"err_tr", doubles(r.err_tr)},
           {"epsilon", doubles(r.epsilon)},
           {"oracle", r.oracle},
           {"oracle_error_budget", r.oracle_error_budget},
           {"fitted_slope", num(r.fitted_slope)},
           {"fitted_prefactor", num(r.fitted_prefactor)},
           {"train_prefactor", num(r.train_prefactor)},
           {"train_count", r.train_count},
           {"bound_slack", r.bound_slack},
           {"regime_note", r.regime_note},
           {"bound_satisfied", r.bound_satisfied},
           {"exact_reproduction", r.exact_reproduction},
           {"warnings", r.warnings}};
    j["fit"] = r.fit ? json{{"slope", r.fit->slope},
                            {"intercept", r.fit->intercept},
                            {"r_squared", r.fit->r_squared},
                            {"used", r.fit->used},
                            {"excluded", r.fit->excluded}}
                     : json(nullptr);
    j["regime"] = r.regime ? regime_to_json(*r.regime) : json(nullptr);
    json all = json::array();
    for (const auto& a : r.applicable) all.push_back(regime_to_json(a));
    j["applicable_regimes"] = all;
    return j;
}

ConvergenceReport convergence_from_json(const json& j) {
    ConvergenceReport r;
    r.model = j.at("model").get<std::string>();
    r.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    r.s = j.at("s").get<double>();
    r.t = j.at("t").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.n_list = j.at("n_list").get<std::vector<int>>();
    r.err_op = doubles_from(j.at("err_op"));
    r.err_tr = doubles_from(j.at("err_tr"));
    r.epsilon = doubles_from(j.at("epsilon"));
    r.oracle = j.at("oracle").get<std::string>();
    r.oracle_error_budget = j.at("oracle_error_budget").get<double>();
    r.fitted_slope = get_num(j, "fitted_slope");
    r.fitted_prefactor = get_num(j, "fitted_prefactor");
    r.train_prefactor = get_num(j, "train_prefactor");
    r.train_count = j.at("train_count").get<int>();
    r.bound_slack = j.at("bound_slack").get<double>();
    r.regime_note = j.at("regime_note").get<std::string>();
    r.bound_satisfied = j.at("bound_satisfied").get<bool>();
    r.exact_reproduction = j.at("exact_reproduction").get<bool>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (!j.at("fit").is_null()) {
        const json& f = j.at("fit");
        r.fit = RateFit{f.at("slope").get<double>(), f.at("intercept").get<double>(),
                        f.at("r_squared").get<double>(), f.at("used").get<int>(),
                        f.at("excluded").get<int>()};
    }
    if (!j.at("regime").is_null()) r.regime = regime_from_json(j.at("regime"));
    for (const auto& a : j.at("applicable_regimes")) r.applicable.push_back(regime_from_json(a));
    return r;
}

json constants_to_json(const ConstantsReport& c) {
    return json{{"alpha", c.alpha},     {"beta", c.beta},         {"s", c.s},
                {"t", c.t},             {"C_alpha", c.C_alpha},   {"L_alpha_beta", num(c.L_alpha_beta)},
                {"M_alpha", c.M_alpha}, {"xi", c.xi},             {"grid_size", c.grid_size}};
}

ConstantsReport constants_from_json(const json& j) {
    ConstantsReport c;
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.s = j.at("s").get<double>();
    c.t = j.at("t").get<double>();
    c.C_alpha = j.at("C_alpha").get<double>();
    c.L_alpha_beta = get_num(j, "L_alpha_beta");
    c.M_alpha = j.at("M_alpha").get<double>();
    c.xi = j.at("xi").get<double>();
    c.grid_size = j.at("grid_size").get<int>();
    return c;
}

json lifting_to_json(const LiftingCheck& c) {
    return json{{"model", c.model},
                {"scheme", to_string(c.scheme)},
                {"s", c.s},
                {"t", c.t},
                {"n", c.n},
                {"k_n", c.k_n},
                {"lhs", c.lhs},
                {"rhs", c.rhs},
                {"margin", c.margin()},
                {"holds", c.holds()},
                {"half_op_errors", {c.half_op_errors[0], c.half_op_errors[1]}},
                {"half_tr_norms", {c.half_tr_norms[0], c.half_tr_norms[1]}},
                {"c_ts", c.c_ts}};
}

LiftingCheck lifting_from_json(const json& j) {
    LiftingCheck c;
    c.model = j.at("model").get<std::string>();
    c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.s = j.at("s").get<double>();
    c.t = j.at("t").get<double>();
    c.n = j.at("n").get<int>();
    c.k_n = j.at("k_n").get<int>();
    c.lhs = j.at("lhs").get<double>();
    c.rhs = j.at("rhs").get<double>();
    c.half_op_errors = {j.at("half_op_errors")[0].get<double>(),
                        j.at("half_op_errors")[1].get<double>()};
    c.half_tr_norms = {j.at("half_tr_norms")[0].get<double>(),
                       j.at("half_tr_norms")[1].get<double>()};
    c.c_ts = j.at("c_ts").get<double>();
    return c;
}

// ---------------------------------------------------------------------------
// Orchestration helpers

std::string failure_kind(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const AccuracyError*>(&e)) return "accuracy";
    if (dynamic_cast<const FitError*>(&e)) return "fit";
    if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const ModelError*>(&e) || dynamic_cast<const RangeError*>(&e)) {
        return "validation";
    }
    return "error";
}

class TaskRunner {
public:
    explicit TaskRunner(ReportEnvelope& env) : env_(env) {}

    void operator()(const std::string& name, const std::function<void()>& task) {
        const auto start = std::chrono::steady_clock::now();
        try {
            task();
        } catch (const std::exception& e) {
            env_.failures.push_back({name, failure_kind(e), e.what()});
        }
        const auto stop = std::chrono::steady_clock::now();
        env_.timings.push_back({name, std::chrono::duration<double>(stop - start).count()});
    }

private:
    ReportEnvelope& env_;
};

CocycleSummary check_cocycle(const Model& m, double s, double t, double tol, int triples,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(s, t);
    CocycleSummary c;
    c.triples = triples;
    c.tolerance = tol;
    for (int i = 0; i < triples; ++i) {
        std::array<double, 3> p{unif(rng), unif(rng), unif(rng)};
        std::sort(p.begin(), p.end());
        if (!(p[0] < p[1] && p[1] < p[2])) {
            --i;
            continue;
        }
        const auto full = reference_propagator(m, p[0], p[2], tol).U;
        const auto lower = reference_propagator(m, p[0], p[1], tol).U;
        const auto upper = reference_propagator(m, p[1], p[2], tol).U;
        c.max_residual = std::max(c.max_residual, trace_norm(upper * lower - full));
        c.max_norm = std::max({c.max_norm, operator_norm(full), operator_norm(lower),
                               operator_norm(upper)});
    }
    c.holds = c.max_residual <= 3.0 * tol && c.max_norm <= 1.0 + 1e-10;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<int> expand_n_list(const GeometricNList& spec) {
    if (spec.n_min < 1) throw ArgumentError("n_min must be >= 1");
    if (spec.factor < 2) throw ArgumentError("factor must be >= 2");
    std::vector<int> out;
    for (long n = spec.n_min; n <= spec.n_max; n *= spec.factor) out.push_back(static_cast<int>(n));
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("(document): not valid JSON: ") + e.what()});
    }
    Validator v;
    if (!doc.is_object()) throw ValidationError({"(document): must be a JSON object"});

    v.reject_unknown(doc, "",
                     {"model", "scheme", "T", "s", "t", "n_list", "alpha", "beta", "tol_ref", "seed",
                      "output", "convergence", "verify", "constants_grid"});
    ExperimentConfig c;
    if (const json* m = object_field(v, doc, "", "model")) parse_model(v, *m, c.model);
    if (doc.contains("scheme")) parse_schemes(v, doc.at("scheme"), c.schemes);
    v.number(doc, "", "T", c.horizon);
    v.number(doc, "", "s", c.s);
    v.number(doc, "", "t", c.t);
    if (doc.contains("n_list")) {
        const json& nl = doc.at("n_list");
        if (nl.is_object()) {
            v.reject_unknown(nl, "n_list", {"n_min", "n_max", "factor"});
            GeometricNList g;
            v.integer(nl, "n_list", "n_min", g.n_min);
            v.integer(nl, "n_list", "n_max", g.n_max);
            v.integer(nl, "n_list", "factor", g.factor);
            if (g.n_min < 1) v.fail("n_list.n_min", "n_min >= 1 required");
            if (g.factor < 2) v.fail("n_list.factor", "factor >= 2 required");
            if (g.n_min >= 1 && g.factor >= 2) {
                c.n_geometric = g;
                c.n_list = expand_n_list(g);
            }
        } else {
            v.int_list(nl, "n_list", c.n_list);
            if (nl.is_array() && c.n_list.empty()) v.fail("n_list", "non-empty list required");
            for (std::size_t i = 0; i < c.n_list.size(); ++i) {
                if (c.n_list[i] < 1) v.fail("n_list[" + std::to_string(i) + "]", "n >= 1 required");
                if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) {
                    v.fail("n_list[" + std::to_string(i) + "]", "n_list must be strictly ascending");
                }
            }
        }
    }
    v.optional_number(doc, "", "alpha", c.alpha);
    v.optional_number(doc, "", "beta", c.beta);
    v.number(doc, "", "tol_ref", c.tol_ref);
    if (doc.contains("seed")) {
        const json& sd = doc.at("seed");
        if (sd.is_number_unsigned() || (sd.is_number_integer() && sd.get<long long>() >= 0)) {
            c.seed = sd.get<std::uint64_t>();
        } else {
            v.fail("seed", "must be a non-negative integer");
        }
    }
    if (const json* out = object_field(v, doc, "", "output")) {
        v.reject_unknown(*out, "output", {"path", "format"});
        v.string(*out, "output", "path", c.output_path);
        v.string(*out, "output", "format", c.output_format);
        try {
            format_from_string(c.output_format);
        } catch (const ArgumentError&) {
            v.fail("output.format", "unknown format '" + c.output_format + "' (csv, jsonl, plot)");
        }
    }
    if (const json* conv = object_field(v, doc, "", "convergence")) {
        v.reject_unknown(*conv, "convergence", {"train_count", "bound_slack"});
        v.integer(*conv, "convergence", "train_count", c.train_count);
        v.number(*conv, "convergence", "bound_slack", c.bound_slack);
        if (c.train_count == 0 || c.train_count < -1) {
            v.fail("convergence.train_count", "train_count >= 1 (or -1 for half) required");
        }
        if (!(c.bound_slack >= 0.0)) v.fail("convergence.bound_slack", "bound_slack >= 0 required");
    }
    if (const json* ver = object_field(v, doc, "", "verify")) {
        v.reject_unknown(*ver, "verify", {"product_bound_instances", "lifting_n", "cocycle_triples"});
        v.integer(*ver, "verify", "product_bound_instances", c.product_bound_instances);
        v.integer(*ver, "verify", "cocycle_triples", c.cocycle_triples);
        if (ver->contains("lifting_n")) v.int_list(ver->at("lifting_n"), "verify.lifting_n", c.lifting_n);
        if (c.product_bound_instances < 1) v.fail("verify.product_bound_instances", "at least 1 instance required");
        if (c.cocycle_triples < 1) v.fail("verify.cocycle_triples", "at least 1 triple required");
        for (std::size_t i = 0; i < c.lifting_n.size(); ++i) {
            if (c.lifting_n[i] < 4 || c.lifting_n[i] % 2 != 0) {
                v.fail("verify.lifting_n[" + std::to_string(i) + "]", "even n >= 4 required");
            }
        }
    }
    v.integer(doc, "", "constants_grid", c.constants_grid);
    if (c.constants_grid < 2) v.fail("constants_grid", "constants_grid >= 2 required");

    if (c.alpha && !(*c.alpha >= 0.0 && *c.alpha < 1.0)) v.fail("alpha", "alpha ∈ [0,1) required");
    if (c.beta && !(*c.beta > 0.0 && *c.beta <= 1.0)) v.fail("beta", "beta ∈ (0,1] required");
    if (!(c.horizon > 0.0)) v.fail("T", "T > 0 required");
    if (c.model.family == "builtin" && c.horizon != kDefaultHorizon) {
        v.fail("T", "builtin models are defined on [0, 1]");
    }
    if (!(c.s >= 0.0)) v.fail("s", "s >= 0 required");
    if (!(c.s < c.t)) v.fail("t", "s < t required");
    if (!(c.t <= c.horizon)) v.fail("t", "t <= T required");
    if (!(c.tol_ref >= 1e-12)) v.fail("tol_ref", "tol_ref >= 1e-12 required");

    if (v.ok()) {
        try {
            build_model(c);
        } catch (const Error& e) {
            v.fail("model", e.what());
        }
    }
    if (!v.ok()) throw ValidationError(v.failures());
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    json model{{"family", c.model.family}};
    const auto& m = c.model;
    if (m.family == "builtin") {
        model["name"] = m.name;
    } else if (m.family == "scalar") {
        model["a"] = m.a;
        model["profile"] = profile_to_json(m.profile);
    } else if (m.family == "commuting") {
        model["profile"] = profile_to_json(m.profile);
        model["lambdas"] = m.lambdas;
        model["couplings"] = m.couplings;
    } else {
        model["dim"] = m.dim;
        model["lambdas"] = m.lambdas;
        model["rho"] = m.rho;
        model["omega"] = m.omega;
        model["t0"] = m.t0;
    }
    json schemes = json::array();
    for (auto s : c.schemes) schemes.push_back(to_string(s));
    json j{{"model", model},
           {"scheme", schemes},
           {"T", c.horizon},
           {"s", c.s},
           {"t", c.t},
           {"tol_ref", c.tol_ref},
           {"seed", c.seed},
           {"output", {{"path", c.output_path}, {"format", c.output_format}}},
           {"convergence", {{"train_count", c.train_count}, {"bound_slack", c.bound_slack}}},
           {"verify",
            {{"product_bound_instances", c.product_bound_instances},
             {"lifting_n", c.lifting_n},
             {"cocycle_triples", c.cocycle_triples}}},
           {"constants_grid", c.constants_grid}};
    if (c.n_geometric) {
        j["n_list"] = {{"n_min", c.n_geometric->n_min},
                       {"n_max", c.n_geometric->n_max},
                       {"factor", c.n_geometric->factor}};
    } else {
        j["n_list"] = c.n_list;
    }
    if (c.alpha) j["alpha"] = *c.alpha;
    if (c.beta) j["beta"] = *c.beta;
    return j;
}

Model build_model(const ExperimentConfig& c) {
    const auto& m = c.model;
    const double alpha = c.alpha.value_or(0.0);
    const double beta = c.beta.value_or(default_beta(m));
    const ModelOptions opts{alpha, c.horizon};
    if (m.family == "builtin") {
        for (auto& nm : builtin_models()) {
            if (nm.name == m.name) {
                return nm.model.with_exponents(c.alpha.value_or(nm.model.alpha()),
                                               c.beta.value_or(nm.model.beta()));
            }
        }
        throw ArgumentError("unknown builtin model '" + m.name + "'");
    }
    if (m.family == "scalar") return scalar_model(m.a, m.profile, beta, opts);
    if (m.family == "commuting") {
        const Vector lambdas = m.lambdas.empty() ? default_lambdas(8) : to_vector(m.lambdas);
        const Vector d0 = m.couplings.empty() ? Vector::Ones(lambdas.size()) : to_vector(m.couplings);
        if (d0.size() != lambdas.size()) throw ArgumentError("couplings and lambdas differ in length");
        return commuting_model(lambdas, d0, m.profile, beta, opts);
    }
    if (m.family == "rotating") {
        const Vector lambdas = m.lambdas.empty() ? default_lambdas(m.dim) : to_vector(m.lambdas);
        return rotating_model(m.dim, lambdas, kms_matrix(m.dim, m.rho), m.omega, beta, m.t0, opts);
    }
    throw ArgumentError("unknown model family '" + m.family + "'");
}

std::string to_string(Command command) {
    switch (command) {
        case Command::Run: return "run";
        case Command::Verify: return "verify";
        case Command::Constants: return "constants";
    }
    return "run";
}

Command command_from_string(const std::string& name) {
    if (name == "run") return Command::Run;
    if (name == "verify") return Command::Verify;
    if (name == "constants") return Command::Constants;
    throw ArgumentError("unknown command '" + name + "'");
}

std::string to_string(Format format) {
    switch (format) {
        case Format::Csv: return "csv";
        case Format::JsonLines: return "jsonl";
        case Format::Plot: return "plot";
    }
    return "csv";
}

Format format_from_string(const std::string& name) {
    if (name == "csv") return Format::Csv;
    if (name == "jsonl" || name == "json-lines") return Format::JsonLines;
    if (name == "plot" || name == "plot-data") return Format::Plot;
    throw ArgumentError("unknown format '" + name + "' (csv, jsonl, plot)");
}

ReportEnvelope run(const ExperimentConfig& config, const RunOptions& opts) {
    ReportEnvelope env;
    env.command = to_string(opts.command);
    env.config = config_to_json(config);
    TaskRunner task(env);

    std::optional<Model> model;
    task("model", [&] { model.emplace(build_model(config)); });
    if (!model) return env;
    const Model& m = *model;

    if (opts.command == Command::Constants) {
        task("constants", [&] {
            env.constants = estimate_constants(m, config.s, config.t, config.constants_grid);
        });
        return env;
    }

    if (opts.command == Command::Run) {
        task("constants", [&] {
            env.constants = estimate_constants(m, config.s, config.t, config.constants_grid);
        });
        if (config.n_list.empty()) {
            env.warnings.push_back("n_list is empty after expansion; no convergence reports");
            return env;
        }
        std::optional<PropagatorResult> oracle;
        task("oracle", [&] { oracle = oracle_propagator(m, config.s, config.t, config.tol_ref); });
        if (!oracle) return env;
        ConvergenceOptions copts;
        copts.train_count = config.train_count;
        copts.bound_slack = config.bound_slack;
        copts.threads = opts.threads;
        for (Scheme scheme : config.schemes) {
            task("convergence:" + to_string(scheme), [&] {
                env.convergence.push_back(
                    run_convergence_against(m, scheme, *oracle, config.n_list, copts));
            });
        }
        return env;
    }

    // verify
    task("product_bound", [&] { env.product_bound = product_bound_suite(config.seed, config.product_bound_instances); });
    task("cocycle", [&] {
        env.cocycle = check_cocycle(m, config.s, config.t, config.tol_ref, config.cocycle_triples,
                                    config.seed);
    });
    for (Scheme scheme : config.schemes) {
        for (int n : config.lifting_n) {
            task("lifting:" + to_string(scheme) + ":" + std::to_string(n), [&] {
                env.lifting.push_back(
                    verify_lifting(m, scheme, config.s, config.t, n, config.tol_ref));
            });
        }
    }
    return env;
}

void emit(const ReportEnvelope& env, Format format, std::ostream& out, const EmitOptions& opts) {
    if (format == Format::Csv) {
        out << "scheme,n,err_op,err_tr,epsilon_theory,ratio\n";
        for (const auto& r : env.convergence) {
            for (std::size_t i = 0; i < r.n_list.size(); ++i) {
                const double eps = r.epsilon[i];
                out << to_string(r.scheme) << ',' << r.n_list[i] << ',' << g17(r.err_op[i]) << ','
                    << g17(r.err_tr[i]) << ',' << g17(eps) << ','
                    << g17(std::isnan(eps) ? kNaN : r.err_tr[i] / eps) << '\n';
            }
        }
        return;
    }
    if (format == Format::Plot) {
        bool first = true;
        for (const auto& r : env.convergence) {
            if (!first) out << "\n\n";
            first = false;
            out << "# scheme " << to_string(r.scheme) << ": n err_tr\n";
            for (std::size_t i = 0; i < r.n_list.size(); ++i) {
                out << r.n_list[i] << ' ' << g17(r.err_tr[i]) << '\n';
            }
            if (!r.regime) continue;
            out << "\n\n# scheme " << to_string(r.scheme) << ": n prefactor*epsilon ("
                << r.regime->formula() << ")\n";
            for (std::size_t i = 0; i < r.n_list.size(); ++i) {
                if (std::isnan(r.epsilon[i])) continue;
                out << r.n_list[i] << ' ' << g17(r.fitted_prefactor * r.epsilon[i]) << '\n';
            }
        }
        return;
    }

    const std::string id = config_id(env.config);
    auto line = [&](const char* type, json body) {
        body["type"] = type;
        body["config_id"] = id;
        out << body.dump() << '\n';
    };
    line("envelope", json{{"tool_version", env.tool_version},
                          {"command", env.command},
                          {"config", env.config},
                          {"warnings", env.warnings}});
    if (env.constants) line("constants", constants_to_json(*env.constants));
    for (const auto& r : env.convergence) line("convergence", convergence_to_json(r));
    for (const auto& c : env.lifting) line("lifting", lifting_to_json(c));
    if (env.product_bound) {
        line("product_bound", json{{"seed", env.product_bound->seed},
                             {"instances", env.product_bound->instances},
                             {"held", env.product_bound->held},
                             {"worst_relative_margin", num(env.product_bound->worst_relative_margin)}});
    }
    if (env.cocycle) {
        line("cocycle", json{{"triples", env.cocycle->triples},
                             {"tolerance", env.cocycle->tolerance},
                             {"max_residual", env.cocycle->max_residual},
                             {"max_norm", env.cocycle->max_norm},
                             {"holds", env.cocycle->holds}});
    }
    for (const auto& f : env.failures) {
        line("failure", json{{"task", f.task}, {"kind", f.kind}, {"message", f.message}});
    }
    if (opts.timings) {
        for (const auto& t : env.timings) line("timing", json{{"task", t.task}, {"seconds", t.seconds}});
    }
}

void emit_to_file(const ReportEnvelope& env, Format format, const std::string& path,
                  const EmitOptions& opts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write output '" + path + "'");
    emit(env, format, out, opts);
    out.flush();
    if (!out) throw IoError("write failed for output '" + path + "'");
}

ReportEnvelope parse_envelope(std::istream& in) {
    ReportEnvelope env;
    bool header = false;
    std::string text;
    int lineno = 0;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ArgumentError("envelope line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            const std::string type = j.at("type").get<std::string>();
            if (type == "envelope") {
                env.tool_version = j.at("tool_version").get<std::string>();
                env.command = j.at("command").get<std::string>();
                env.config = j.at("config");
                env.warnings = j.at("warnings").get<std::vector<std::string>>();
                header = true;
            } else if (type == "constants") {
                env.constants = constants_from_json(j);
            } else if (type == "convergence") {
                env.convergence.push_back(convergence_from_json(j));
            } else if (type == "lifting") {
                env.lifting.push_back(lifting_from_json(j));
            } else if (type == "product_bound") {
                ProductBoundSummary s;
                s.seed = j.at("seed").get<std::uint64_t>();
                s.instances = j.at("instances").get<int>();
                s.held = j.at("held").get<int>();
                s.worst_relative_margin = get_num(j, "worst_relative_margin");
                env.product_bound = s;
            } else if (type == "cocycle") {
                CocycleSummary c;
                c.triples = j.at("triples").get<int>();
                c.tolerance = j.at("tolerance").get<double>();
                c.max_residual = j.at("max_residual").get<double>();
                c.max_norm = j.at("max_norm").get<double>();
                c.holds = j.at("holds").get<bool>();
                env.cocycle = c;
            } else if (type == "failure") {
                env.failures.push_back({j.at("task").get<std::string>(),
                                        j.at("kind").get<std::string>(),
                                        j.at("message").get<std::string>()});
            } else if (type == "timing") {
                env.timings.push_back({j.at("task").get<std::string>(), j.at("seconds").get<double>()});
            } else {
                throw ArgumentError("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw ArgumentError("envelope line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!header) throw ArgumentError("envelope has no header record");
    return env;
}

ReportEnvelope load_envelope(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read envelope '" + path + "'");
    return parse_envelope(in);
}

int exit_code(const ReportEnvelope& env) {
    int code = 0;
    for (const auto& f : env.failures) {
        if (f.kind == "io") code = std::max(code, 3);
        else if (f.kind == "accuracy" || f.kind == "error") code = std::max(code, 2);
        else code = std::max(code, 1);
    }
    return code;
}

}  // namespace gibbsflow
