#pragma once

// Config-driven experiments: parse a JSON experiment document, run the
// requested command, and emit the resulting envelope as csv, json-lines or
// gnuplot data.

#include "gibbsflow/analysis.hpp"
#include "gibbsflow/constants.hpp"
#include "gibbsflow/models.hpp"
#include "gibbsflow/propagator.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gibbsflow {

inline constexpr const char* kToolVersion = "0.3.0";

struct ModelConfig {
    std::string family = "scalar";  // scalar | commuting | rotating | builtin
    std::string name;               // builtin
    double a = 1.0;                 // scalar
    ScalarProfile profile = ScalarProfile::linear(0.0, 1.0);  // scalar, commuting
    std::vector<double> lambdas;    // commuting, rotating (default 1..dim)
    std::vector<double> couplings;  // commuting d0 (default all ones)
    int dim = 8;                    // rotating
    double rho = 0.5;               // rotating: b0 = kms(dim, rho)
    double omega = 3.141592653589793;
    double t0 = 0.5;

    bool operator==(const ModelConfig&) const = default;
};

struct GeometricNList {
    int n_min = 8;
    int n_max = 1024;
    int factor = 2;

    bool operator==(const GeometricNList&) const = default;
};

struct ExperimentConfig {
    ModelConfig model;
    std::vector<Scheme> schemes{Scheme::Left};
    double horizon = kDefaultHorizon;
    double s = 0.0;
    double t = 1.0;
    std::vector<int> n_list{8, 16, 32, 64, 128, 256, 512, 1024};
    std::optional<GeometricNList> n_geometric;  // set when n_list came from {n_min, n_max, factor}
    std::optional<double> alpha;                // absent: family default
    std::optional<double> beta;
    double tol_ref = 1e-10;
    std::uint64_t seed = 0;
    std::string output_path;
    std::string output_format = "csv";
    int train_count = -1;
    double bound_slack = 0.0;
    int constants_grid = kDefaultConstantsGrid;
    int product_bound_instances = 1000;
    std::vector<int> lifting_n{4, 8, 16, 32};
    int cocycle_triples = 20;

    bool operator==(const ExperimentConfig&) const = default;
};

// Expands {n_min, n_max, factor} into n_min, n_min*factor, ... <= n_max.
std::vector<int> expand_n_list(const GeometricNList& spec);

// Throws ValidationError listing every failure with its field path (a
// document that is not JSON is reported as a single failure).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// Builds the model the config names, with declared exponents applied.
Model build_model(const ExperimentConfig& config);

enum class Command { Run, Verify, Constants };

std::string to_string(Command command);
Command command_from_string(const std::string& name);

struct CocycleSummary {
    int triples = 0;
    double tolerance = 0.0;
    double max_residual = 0.0;   // ||U(t,r)U(r,s) - U(t,s)||_1
    double max_norm = 0.0;       // ||U(t,s)||_inf
    bool holds = false;          // residual <= 3 tol and norm <= 1 + 1e-10
};

struct TaskFailure {
    std::string task;
    std::string kind;  // validation | accuracy | fit | error
    std::string message;
};

struct Timing {
    std::string task;
    double seconds = 0.0;
};

struct ReportEnvelope {
    std::string tool_version = kToolVersion;
    std::string command = "run";
    nlohmann::json config;
    std::optional<ConstantsReport> constants;
    std::vector<ConvergenceReport> convergence;
    std::vector<LiftingCheck> lifting;
    std::optional<ProductBoundSummary> product_bound;
    std::optional<CocycleSummary> cocycle;
    std::vector<TaskFailure> failures;
    std::vector<Timing> timings;
    std::vector<std::string> warnings;
};

struct RunOptions {
    Command command = Command::Run;
    int threads = 1;
};

// Sub-task errors are recorded as failures; the envelope is returned anyway.
ReportEnvelope run(const ExperimentConfig& config, const RunOptions& opts = {});

enum class Format { Csv, JsonLines, Plot };

std::string to_string(Format format);
Format format_from_string(const std::string& name);

struct EmitOptions {
    bool timings = false;  // wall-clock lines break byte-identical output
};

void emit(const ReportEnvelope& envelope, Format format, std::ostream& out,
          const EmitOptions& opts = {});
// Throws IoError naming the path when it cannot be written.
void emit_to_file(const ReportEnvelope& envelope, Format format, const std::string& path,
                  const EmitOptions& opts = {});

// Reads an envelope written in json-lines format.
ReportEnvelope parse_envelope(std::istream& in);
ReportEnvelope load_envelope(const std::string& path);

// 0 ok, 1 validation, 2 numerical accuracy, 3 I/O.
int exit_code(const ReportEnvelope& envelope);

}  // namespace gibbsflow
