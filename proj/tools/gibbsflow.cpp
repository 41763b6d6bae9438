// gibbsflow: product-formula convergence experiments from a JSON config.
//
//   gibbsflow run       --config exp.json [--format csv|jsonl|plot] [--output out]
//   gibbsflow verify    --config exp.json [--seed 7]
//   gibbsflow constants --config exp.json
//   gibbsflow report    --input run.jsonl --format csv

#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiment.hpp"
#include "gibbsflow/parallel.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace gibbsflow;

int resolve_threads(std::optional<int> flag) {
    if (flag) return std::max(1, *flag);
    if (const char* env = std::getenv("GIBBSFLOW_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring GIBBSFLOW_THREADS='" << env << "'\n";
    }
    return default_thread_count();
}

void log_envelope(const ReportEnvelope& env) {
    for (const auto& t : env.timings) {
        std::cerr << "  " << t.task << ": " << t.seconds << " s\n";
    }
    for (const auto& r : env.convergence) {
        std::cerr << "  " << to_string(r.scheme) << ": slope " << r.fitted_slope << ", regime "
                  << (r.regime ? r.regime->formula() : std::string("none")) << ", bound "
                  << (r.bound_satisfied ? "satisfied" : "violated") << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Product-formula approximations of non-autonomous Gibbs evolution families"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string config_path;
    std::string input_path;
    std::string output_path;
    std::string format_name;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    bool timings = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--output", output_path, "Output file (default: config output.path or stdout)");
        sub->add_option("--format", format_name, "csv | jsonl | plot")
            ->check(CLI::IsMember({"csv", "jsonl", "plot"}));
        sub->add_flag("--verbose", verbose, "Progress and timings on stderr");
        sub->add_flag("--timings", timings, "Include wall-clock timing records in jsonl");
    };
    auto add_experiment = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
        sub->add_option("--threads", threads, "Worker threads (fallback: GIBBSFLOW_THREADS)");
        sub->add_option("--seed", seed, "Seed for randomized verifiers (overrides config)");
        add_common(sub);
    };

    auto* run_cmd = app.add_subcommand("run", "Convergence experiment against the exact or reference propagator");
    auto* verify_cmd = app.add_subcommand("verify", "Property suites: product inequality, cocycle, contraction, lifting");
    auto* constants_cmd = app.add_subcommand("constants", "Estimate C_alpha, L_alpha_beta, M_alpha and xi");
    auto* report_cmd = app.add_subcommand("report", "Re-emit a stored jsonl envelope in another format");
    add_experiment(run_cmd);
    add_experiment(verify_cmd);
    add_experiment(constants_cmd);
    report_cmd->add_option("--input", input_path, "Envelope written with --format jsonl")->required();
    add_common(report_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        ReportEnvelope env;
        std::string out_path = output_path;
        std::string fmt = format_name;
        if (report_cmd->parsed()) {
            env = load_envelope(input_path);
            if (fmt.empty()) fmt = "csv";
        } else {
            ExperimentConfig config = load_config(config_path);
            if (seed) config.seed = *seed;
            if (out_path.empty()) out_path = config.output_path;
            if (fmt.empty()) fmt = config.output_format;
            RunOptions opts;
            opts.threads = resolve_threads(threads);
            opts.command = run_cmd->parsed()      ? Command::Run
                           : verify_cmd->parsed() ? Command::Verify
                                                  : Command::Constants;
            if (verbose) {
                std::cerr << "gibbsflow " << kToolVersion << ": " << to_string(opts.command)
                          << " on " << config.model.family << " model, " << opts.threads
                          << " thread(s)\n";
            }
            env = run(config, opts);
        }

        for (const auto& w : env.warnings) std::cerr << "warning: " << w << '\n';
        for (const auto& r : env.convergence) {
            for (const auto& w : r.warnings) std::cerr << "warning: " << to_string(r.scheme) << ": " << w << '\n';
        }
        for (const auto& f : env.failures) {
            std::cerr << "error: " << f.task << " (" << f.kind << "): " << f.message << '\n';
        }
        if (verbose) log_envelope(env);

        const Format format = format_from_string(fmt);
        if (format != Format::JsonLines && env.convergence.empty() && env.command != "run") {
            std::cerr << "note: " << fmt << " output carries convergence series only; use --format jsonl for "
                      << env.command << " results\n";
        }
        EmitOptions eopts;
        eopts.timings = timings;
        if (out_path.empty() || out_path == "-") {
            emit(env, format, std::cout, eopts);
        } else {
            emit_to_file(env, format, out_path, eopts);
        }
        return exit_code(env);
    } catch (const ValidationError& e) {
        std::cerr << "invalid config:\n";
        for (const auto& f : e.failures()) std::cerr << "  " << f << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const AccuracyError& e) {
        std::cerr << "accuracy failure: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
