#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiment.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

using namespace gibbsflow;

namespace {

std::vector<std::string> failures_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.failures();
    }
    return {};
}

bool mentions(const std::vector<std::string>& fs, const std::string& needle) {
    return std::any_of(fs.begin(), fs.end(), [&](const std::string& f) { return f.find(needle) != std::string::npos; });
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string emitted(const ReportEnvelope& env, Format f) {
    std::ostringstream out;
    emit(env, f, out);
    return out.str();
}

const char* kTwoSchemes = R"({
  "model": {"family": "scalar", "a": 1, "profile": {"kind": "linear", "intercept": 0, "slope": 1}},
  "scheme": ["left", "right"],
  "n_list": [8, 16, 32, 64]
})";

}  // namespace

TEST_CASE("config defaults") {
    const auto c = parse_config(R"({"model": {"family": "scalar"}})");
    CHECK(c.s == 0.0);
    CHECK(c.t == 1.0);
    CHECK(c.horizon == 1.0);
    CHECK(c.tol_ref == 1e-10);
    CHECK(c.schemes == std::vector<Scheme>{Scheme::Left});
    CHECK(c.n_list == std::vector<int>{8, 16, 32, 64, 128, 256, 512, 1024});
    CHECK(c.output_format == "csv");
    CHECK_FALSE(c.alpha.has_value());
    const auto m = build_model(c);
    CHECK(m.alpha() == 0.0);
    CHECK(m.beta() == 1.0);
}

TEST_CASE("geometric n lists") {
    CHECK(expand_n_list({8, 64, 2}) == std::vector<int>{8, 16, 32, 64});
    CHECK(expand_n_list({3, 100, 3}) == std::vector<int>{3, 9, 27, 81});
    CHECK(expand_n_list({100, 10, 2}).empty());
    const auto c = parse_config(R"({"model": {"family": "scalar"}, "n_list": {"n_min": 4, "n_max": 40, "factor": 3}})");
    CHECK(c.n_list == std::vector<int>{4, 12, 36});
}

TEST_CASE("config validation") {
    CHECK(mentions(failures_of(R"({"model": {"family": "scalar"}, "beta": 0})"), "beta ∈ (0,1] required"));
    CHECK(mentions(failures_of(R"({"model": {"family": "scalar"}, "alpha": 1})"), "alpha ∈ [0,1) required"));
    CHECK(mentions(failures_of(R"({"model": {"family": "scalar"}, "s": 0.5, "t": 0.5})"), "t: s < t required"));
    CHECK(mentions(failures_of(R"({"model": {"family": "scalar"}, "n_list": []})"), "n_list"));
    CHECK(mentions(failures_of(R"({"model": {"family": "scalar"}, "colour": 1})"), "colour"));
    CHECK(mentions(failures_of(R"({"model": {"family": "builtin", "name": "nope"}})"), "model.name"));
    CHECK(mentions(failures_of("{not json"), "not valid JSON"));

    SUBCASE("all failures are collected") {
        const auto fs = failures_of(R"({
          "model": {"family": "commuting", "lambdas": [0.5, 2], "couplings": [1, -1]},
          "scheme": ["left", "upward"],
          "beta": 2, "tol_ref": 1e-20, "n_list": [16, 8]
        })");
        CHECK(fs.size() >= 6);
        CHECK(mentions(fs, "model.lambdas[0]"));
        CHECK(mentions(fs, "model.couplings[1]"));
        CHECK(mentions(fs, "scheme[1]"));
        CHECK(mentions(fs, "beta"));
        CHECK(mentions(fs, "tol_ref"));
        CHECK(mentions(fs, "n_list[1]"));
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
    }
}

TEST_CASE("config echo round-trips") {
    for (const char* path : {"scalar_linear.json", "commuting_all_schemes.json", "rotating_dim16.json",
                             "verify_rotating.json", "zero_perturbation.json"}) {
        const auto c = load_config(std::string(GIBBSFLOW_CONFIG_DIR) + "/" + path);
        const auto again = parse_config(config_to_json(c).dump());
        CHECK(again == c);
    }
}

TEST_CASE("csv output") {
    const auto env = run(parse_config(kTwoSchemes));
    REQUIRE(env.failures.empty());
    const auto lines = lines_of(emitted(env, Format::Csv));
    REQUIRE(lines.size() == 9);
    CHECK(lines[0] == "scheme,n,err_op,err_tr,epsilon_theory,ratio");
    CHECK(lines[1].rfind("left,8,", 0) == 0);
    CHECK(lines[8].rfind("right,64,", 0) == 0);
    // err_tr = e^{-3/2} (e^{1/(2n)} - 1) for the scalar left product at n = 8.
    double err_op = 0, err_tr = 0;
    REQUIRE(std::sscanf(lines[1].c_str(), "left,8,%lf,%lf", &err_op, &err_tr) == 2);
    CHECK(err_tr == doctest::Approx(std::exp(-1.5) * (std::exp(1.0 / 16) - 1.0)).epsilon(1e-9));
    CHECK(exit_code(env) == 0);
}

TEST_CASE("plot output round-trips at full precision") {
    const auto env = run(parse_config(kTwoSchemes));
    const auto text = emitted(env, Format::Plot);
    CHECK(text.find("# scheme left") != std::string::npos);
    std::vector<double> read;
    bool in_block = false;
    for (const auto& line : lines_of(text)) {
        if (line.rfind("# scheme left: n err_tr", 0) == 0) {
            in_block = true;
            continue;
        }
        if (!in_block) continue;
        if (line.empty() || line[0] == '#') break;
        int n = 0;
        double e = 0;
        REQUIRE(std::sscanf(line.c_str(), "%d %lf", &n, &e) == 2);
        read.push_back(e);
    }
    REQUIRE(read.size() == 4);
    for (size_t i = 0; i < read.size(); ++i) CHECK(read[i] == env.convergence[0].err_tr[i]);
}

TEST_CASE("json-lines output is deterministic and round-trips") {
    const auto c = parse_config(kTwoSchemes);
    RunOptions one, three;
    three.threads = 3;
    const auto a = emitted(run(c, one), Format::JsonLines);
    const auto b = emitted(run(c, three), Format::JsonLines);
    CHECK(a == b);
    CHECK(a.find("\"type\":\"envelope\"") != std::string::npos);
    CHECK(a.find("timing") == std::string::npos);

    std::istringstream in(a);
    const auto env = parse_envelope(in);
    REQUIRE(env.convergence.size() == 2);
    CHECK(emitted(env, Format::JsonLines) == a);
    CHECK(emitted(env, Format::Csv) == emitted(run(c), Format::Csv));
}

TEST_CASE("verify and constants commands") {
    auto c = parse_config(R"({
      "model": {"family": "builtin", "name": "commuting-lipschitz"},
      "scheme": "all", "seed": 7, "constants_grid": 101,
      "verify": {"product_bound_instances": 50, "lifting_n": [4, 8], "cocycle_triples": 3}
    })");
    const auto v = run(c, {Command::Verify, 1});
    REQUIRE(v.failures.empty());
    REQUIRE(v.product_bound);
    CHECK(v.product_bound->held == 50);
    REQUIRE(v.cocycle);
    CHECK(v.cocycle->holds);
    CHECK(v.lifting.size() == 6);
    for (const auto& l : v.lifting) CHECK(l.holds());

    const auto k = run(c, {Command::Constants, 1});
    REQUIRE(k.constants);
    CHECK(k.constants->grid_size == 101);
    CHECK(k.convergence.empty());
}

TEST_CASE("exit codes") {
    ReportEnvelope env;
    CHECK(exit_code(env) == 0);
    env.failures.push_back({"fit", "fit", "too few points"});
    CHECK(exit_code(env) == 1);
    env.failures.push_back({"reference", "accuracy", "did not converge"});
    CHECK(exit_code(env) == 2);
    env.failures.push_back({"write", "io", "disk full"});
    CHECK(exit_code(env) == 3);
    CHECK_THROWS_AS(emit_to_file(ReportEnvelope{}, Format::Csv, "/nonexistent/dir/out.csv"), IoError);
}
