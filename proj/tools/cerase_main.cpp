#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cerase/harness.hpp"

namespace {

using namespace cerase;

struct CliRunOptions {
    std::string input_path;
    std::string synthetic_bundle; // "sd", "sd/<div>", or "<layers>x<rows>x<cols>"
    std::string concepts_path;
    std::string synthetic_concepts; // "ne=..,np=..[,m=..][,unit=0|1]"
    double lambda = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double erase_scale = 1.0;
    std::size_t iterations = 1000;
    std::string algorithm = "fista";
    std::size_t trace_stride = 10;
    std::string output_path;
    std::string report_path;
    std::string format = "auto";
    unsigned parallelism = 1;
    std::uint64_t seed = 0;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find(sep, start);
        if (end == std::string::npos) {
            parts.push_back(text.substr(start));
            break;
        }
        parts.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return parts;
}

SyntheticBundleSpec parse_bundle_spec(const std::string& text, std::uint64_t seed) {
    if (text.rfind("sd", 0) == 0) {
        std::uint32_t div = 8;
        if (text.size() > 2) {
            if (text[2] != '/') throw invalid_input_error("--synthetic: expected sd or sd/<div>");
            div = static_cast<std::uint32_t>(std::stoul(text.substr(3)));
        }
        return SyntheticBundleSpec::sd_style(seed, div);
    }
    unsigned long layers = 0, rows = 0, cols = 0;
    if (std::sscanf(text.c_str(), "%lux%lux%lu", &layers, &rows, &cols) != 3 || layers == 0) {
        throw invalid_input_error("--synthetic: expected sd, sd/<div>, or <layers>x<rows>x<cols>");
    }
    return SyntheticBundleSpec::uniform(seed, layers, static_cast<std::uint32_t>(rows),
                                        static_cast<std::uint32_t>(cols));
}

SyntheticConceptSpec parse_concept_spec(const std::string& text, std::uint64_t seed) {
    SyntheticConceptSpec spec;
    spec.seed = seed;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) {
            throw invalid_input_error("--synthetic-concepts: expected key=value pairs");
        }
        const std::string key = part.substr(0, eq);
        const std::string value = part.substr(eq + 1);
        if (key == "ne") spec.n_erase = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "np") spec.n_preserve = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "m") spec.embed_dim = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "unit") spec.unit_normalize = value != "0";
        else throw invalid_input_error("--synthetic-concepts: unknown key '" + key + "'");
    }
    return spec;
}

RunConfig build_run_config(const CliRunOptions& o) {
    RunConfig cfg;
    if (!o.input_path.empty()) cfg.input_path = o.input_path;
    if (!o.synthetic_bundle.empty()) cfg.synthetic_input = parse_bundle_spec(o.synthetic_bundle, o.seed);
    if (!o.concepts_path.empty()) cfg.concepts_path = o.concepts_path;
    if (!o.synthetic_concepts.empty()) {
        cfg.synthetic_concepts = parse_concept_spec(o.synthetic_concepts, o.seed);
    }
    cfg.lambda = o.lambda;
    cfg.lambda1 = o.lambda1;
    cfg.lambda2 = o.lambda2;
    cfg.erase_scale = o.erase_scale;
    cfg.iterations = o.iterations;
    if (o.algorithm == "fista") cfg.algorithm = Algorithm::Fista;
    else if (o.algorithm == "ista") cfg.algorithm = Algorithm::Ista;
    else throw invalid_input_error("--algo must be fista or ista");
    cfg.trace_stride = o.trace_stride;
    if (!o.output_path.empty()) cfg.output_path = o.output_path;
    if (!o.report_path.empty()) cfg.report_path = o.report_path;
    if (o.format == "dense") cfg.force_format = TensorFormat::Dense;
    else if (o.format == "csr") cfg.force_format = TensorFormat::Csr;
    else if (o.format != "auto") throw invalid_input_error("--format must be auto, dense, or csr");
    cfg.parallelism = o.parallelism;
    return cfg;
}

void add_run_options(CLI::App* cmd, CliRunOptions& o) {
    cmd->add_option("--input", o.input_path, "Path to an SPMX/SPCR weight bundle");
    cmd->add_option("--synthetic", o.synthetic_bundle,
                    "Synthetic bundle: sd, sd/<div>, or <layers>x<rows>x<cols>");
    cmd->add_option("--concepts", o.concepts_path, "Path to a concepts container (C_e/C_g/C_p)");
    cmd->add_option("--synthetic-concepts", o.synthetic_concepts,
                    "Synthetic concepts: ne=<n>[,np=<n>][,m=<dim>][,unit=0|1]");
    cmd->add_option("--lambda", o.lambda, "L1 sparsity weight");
    cmd->add_option("--lambda1", o.lambda1, "Preserve-term weight")->capture_default_str();
    cmd->add_option("--lambda2", o.lambda2, "Anchor-to-original weight")->capture_default_str();
    cmd->add_option("--erase-scale", o.erase_scale, "Erase-term weight")->capture_default_str();
    cmd->add_option("--iters", o.iterations, "Iteration count")->capture_default_str();
    cmd->add_option("--algo", o.algorithm, "fista or ista")->capture_default_str();
    cmd->add_option("--trace-stride", o.trace_stride, "Trace recording stride")->capture_default_str();
    cmd->add_option("--out", o.output_path, "Edited bundle output path");
    cmd->add_option("--report", o.report_path, "JSON report output path");
    cmd->add_option("--format", o.format, "Output encoding: auto, dense, or csr")->capture_default_str();
    cmd->add_option("--parallelism", o.parallelism, "Max concurrent layer solves")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Seed for synthetic inputs")->capture_default_str();
}

void print_storage_summary(const StorageReport& s) {
    std::printf("layers: %zu  params: %llu  global sparsity: %.4f\n", s.layers.size(),
                static_cast<unsigned long long>(s.total_params), s.global_sparsity);
    std::printf("dense bytes: %llu  csr bytes: %llu  deployment bytes: %llu  gain: %llu  zip: %llu\n",
                static_cast<unsigned long long>(s.total_dense_bytes),
                static_cast<unsigned long long>(s.total_csr_bytes),
                static_cast<unsigned long long>(s.total_deployment_bytes),
                static_cast<unsigned long long>(s.total_gain_bytes),
                static_cast<unsigned long long>(s.total_zip_bytes));
}

int run_solve(const CliRunOptions& o) {
    const RunConfig cfg = build_run_config(o);
    const RunReport report = run_erasure(cfg);
    print_storage_summary(report.storage);
    std::printf("solve time: %.3f s  total: %.3f s\n", report.solve_wall_seconds,
                report.total_wall_seconds);
    if (cfg.output_path) std::printf("wrote bundle: %s\n", cfg.output_path->string().c_str());
    if (cfg.report_path) std::printf("wrote report: %s\n", cfg.report_path->string().c_str());
    return 0;
}

int run_sweep(const CliRunOptions& o, const std::string& lambda_grid, const std::string& iter_grid,
              const std::string& metrics, const std::string& csv_path) {
    RunConfig cfg = build_run_config(o);
    cfg.report_path.reset(); // sweep writes its own outputs
    SweepSpec spec;
    for (const auto& v : split(lambda_grid, ',')) {
        if (!v.empty()) spec.lambda_grid.push_back(std::stod(v));
    }
    for (const auto& v : split(iter_grid, ',')) {
        if (!v.empty()) spec.iteration_grid.push_back(std::stoul(v));
    }
    if (spec.iteration_grid.empty()) spec.iteration_grid.push_back(o.iterations);
    if (!metrics.empty()) {
        spec.metrics.clear();
        for (const auto& v : split(metrics, ',')) {
            if (!v.empty()) spec.metrics.push_back(v);
        }
    }
    const SweepResult result = sweep(cfg, spec);
    const std::string csv = sweep_to_csv(result);
    if (!csv_path.empty()) {
        write_text_file(csv_path, csv);
        std::printf("wrote sweep csv: %s\n", csv_path.c_str());
    } else {
        std::fputs(csv.c_str(), stdout);
    }
    if (!o.report_path.empty()) {
        write_text_file(o.report_path, sweep_to_json(result));
        std::printf("wrote sweep report: %s\n", o.report_path.c_str());
    }
    return 0;
}

int run_compare(const CliRunOptions& o) {
    RunConfig cfg = build_run_config(o);
    cfg.report_path.reset();
    const ComparisonReport report = compare_dense_vs_sparse(cfg);
    const std::string text = comparison_to_json(report);
    if (!o.report_path.empty()) {
        write_text_file(o.report_path, text);
        std::printf("max rel delta (lambda=0): %.3g\n", report.max_rel_delta);
        std::printf("deployment bytes: dense %llu vs sparse %llu\n",
                    static_cast<unsigned long long>(report.dense_total_deployment_bytes),
                    static_cast<unsigned long long>(report.sparse_total_deployment_bytes));
        std::printf("wrote comparison report: %s\n", o.report_path.c_str());
    } else {
        std::fputs(text.c_str(), stdout);
        std::fputc('\n', stdout);
    }
    return 0;
}

int run_analyze(const std::string& input, const std::string& report_path,
                const std::string& csv_path) {
    const Bundle bundle = read_bundle(input);
    const StorageReport report = block_sparsity_report(bundle);
    print_storage_summary(report);
    for (const auto& b : report.blocks) {
        std::printf("block %-8s params: %llu  sparsity: %.4f\n", b.block.c_str(),
                    static_cast<unsigned long long>(b.params), b.sparsity);
    }
    if (!report_path.empty()) {
        write_text_file(report_path, storage_report_to_json(report));
        std::printf("wrote report: %s\n", report_path.c_str());
    }
    if (!csv_path.empty()) {
        write_text_file(csv_path, storage_report_to_csv(report));
        std::printf("wrote csv: %s\n", csv_path.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-inducing closed-form editing of projection weight bundles"};
    app.require_subcommand(1);

    CliRunOptions solve_opts;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Erase concepts from a weight bundle");
    add_run_options(solve_cmd, solve_opts);

    CliRunOptions sweep_opts;
    std::string lambda_grid, iter_grid, metrics, sweep_csv;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep lambda and iteration grids");
    add_run_options(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--lambda-grid", lambda_grid, "Comma-separated lambda values")->required();
    sweep_cmd->add_option("--iter-grid", iter_grid, "Comma-separated iteration counts");
    sweep_cmd->add_option("--metrics", metrics,
                          "Subset of sparsity,deployment_bytes,zip_bytes,wall_time,objective");
    sweep_cmd->add_option("--csv", sweep_csv, "CSV output path (stdout when omitted)");

    CliRunOptions compare_opts;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "One-shot dense update vs the iterative sparse solver");
    add_run_options(compare_cmd, compare_opts);

    std::string analyze_input, analyze_report, analyze_csv;
    CLI::App* analyze_cmd = app.add_subcommand("analyze", "Storage/sparsity report for a bundle");
    analyze_cmd->add_option("--input", analyze_input, "Bundle path")->required();
    analyze_cmd->add_option("--report", analyze_report, "JSON report output path");
    analyze_cmd->add_option("--csv", analyze_csv, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(solve_cmd)) return run_solve(solve_opts);
        if (app.got_subcommand(sweep_cmd)) {
            return run_sweep(sweep_opts, lambda_grid, iter_grid, metrics, sweep_csv);
        }
        if (app.got_subcommand(compare_cmd)) return run_compare(compare_opts);
        if (app.got_subcommand(analyze_cmd)) return run_analyze(analyze_input, analyze_report, analyze_csv);
    } catch (const cerase::numerical_error& ex) {
        std::cerr << "numerical error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
