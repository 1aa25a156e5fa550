#include "cerase/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <thread>

#include "json.hpp"

namespace cerase {

namespace {

using json = nlohmann::ordered_json;
using steady_clock = std::chrono::steady_clock;

double seconds_since(steady_clock::time_point start) {
    return std::chrono::duration<double>(steady_clock::now() - start).count();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)));
    return r.next_u64();
}

std::string algorithm_name(Algorithm a) {
    return a == Algorithm::Fista ? "fista" : "ista";
}

const std::vector<std::string>& canonical_metrics() {
    static const std::vector<std::string> metrics = {"sparsity", "deployment_bytes", "zip_bytes",
                                                     "wall_time", "objective"};
    return metrics;
}

} // namespace

std::uint64_t Rng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double Rng::next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

SyntheticBundleSpec SyntheticBundleSpec::uniform(std::uint64_t seed, std::size_t count,
                                                 std::uint32_t rows, std::uint32_t cols) {
    SyntheticBundleSpec spec;
    spec.seed = seed;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t third = count == 0 ? 0 : std::min<std::size_t>(i * 3 / count, 2);
        SyntheticLayerSpec layer;
        layer.block = spec.blocks[third];
        layer.kind = (i % 2 == 0) ? TensorKind::K : TensorKind::V;
        layer.name = layer.block + "." + std::to_string(i / 2) + ".attn2." +
                     (layer.kind == TensorKind::K ? "to_k" : "to_v");
        layer.rows = rows;
        layer.cols = cols;
        spec.layers.push_back(std::move(layer));
    }
    return spec;
}

SyntheticBundleSpec SyntheticBundleSpec::sd_style(std::uint64_t seed, std::uint32_t scale_div) {
    if (scale_div == 0) throw invalid_input_error("sd_style: scale divisor must be positive");
    auto scaled = [scale_div](std::uint32_t v) { return std::max<std::uint32_t>(1, v / scale_div); };
    const std::uint32_t m = scaled(768);
    const std::vector<std::pair<std::string, std::uint32_t>> stages = {
        {"down", scaled(320)}, {"down", scaled(640)}, {"mid", scaled(1280)},
        {"up", scaled(640)},   {"up", scaled(320)},
    };
    SyntheticBundleSpec spec;
    spec.seed = seed;
    for (std::size_t j = 0; j < stages.size(); ++j) {
        for (TensorKind kind : {TensorKind::K, TensorKind::V}) {
            SyntheticLayerSpec layer;
            layer.block = stages[j].first;
            layer.kind = kind;
            layer.name = layer.block + "." + std::to_string(j) + ".attn2." +
                         (kind == TensorKind::K ? "to_k" : "to_v");
            layer.rows = stages[j].second;
            layer.cols = m;
            spec.layers.push_back(std::move(layer));
        }
    }
    return spec;
}

Bundle generate_synthetic_bundle(const SyntheticBundleSpec& spec) {
    std::set<std::string> declared(spec.blocks.begin(), spec.blocks.end());
    std::set<std::string> names;
    Bundle bundle;
    bundle.blocks = spec.blocks;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const SyntheticLayerSpec& layer = spec.layers[i];
        if (layer.rows == 0 || layer.cols == 0) {
            throw invalid_input_error("synthetic bundle: layer '" + layer.name +
                                      "' has a zero dimension");
        }
        if (!declared.count(layer.block)) {
            throw invalid_input_error("synthetic bundle: layer '" + layer.name +
                                      "' uses undeclared block '" + layer.block + "'");
        }
        if (!names.insert(layer.name).second) {
            throw invalid_input_error("synthetic bundle: duplicate layer name '" + layer.name + "'");
        }
        Rng rng(derive_seed(spec.seed, i));
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer.cols));
        DenseMatrix m(layer.rows, layer.cols);
        for (auto& v : m.data()) {
            // Quantized at generation time so bundles live at storage precision.
            v = static_cast<double>(static_cast<float>(rng.next_gaussian() * scale));
        }
        bundle.tensors.push_back({layer.name, layer.block, layer.kind, std::move(m)});
    }
    return bundle;
}

namespace {

DenseMatrix gaussian_columns(Rng& rng, std::uint32_t rows, std::uint32_t cols, bool unit_normalize) {
    DenseMatrix m(rows, cols);
    for (std::uint32_t j = 0; j < cols; ++j) {
        double norm_sq = 0.0;
        for (std::uint32_t i = 0; i < rows; ++i) {
            const double g = rng.next_gaussian();
            m(i, j) = g;
            norm_sq += g * g;
        }
        if (unit_normalize) {
            const double norm = std::sqrt(norm_sq);
            if (norm == 0.0) {
                m(0, j) = 1.0;
            } else {
                for (std::uint32_t i = 0; i < rows; ++i) m(i, j) /= norm;
            }
        }
    }
    return m;
}

} // namespace

ConceptMatrices generate_synthetic_concepts(const SyntheticConceptSpec& spec) {
    if (spec.embed_dim == 0) {
        throw invalid_input_error("synthetic concepts: embedding dimension must be positive");
    }
    Rng rng(derive_seed(spec.seed, 0x636F6E63ull));
    DenseMatrix erase = gaussian_columns(rng, spec.embed_dim, spec.n_erase, spec.unit_normalize);
    DenseMatrix guide = gaussian_columns(rng, spec.embed_dim, spec.n_erase, spec.unit_normalize);
    DenseMatrix preserve = gaussian_columns(rng, spec.embed_dim, spec.n_preserve, spec.unit_normalize);
    return ConceptMatrices(std::move(erase), std::move(guide), std::move(preserve));
}

void write_concepts(const ConceptMatrices& concepts, const std::filesystem::path& path) {
    Bundle bundle;
    bundle.blocks = {"concepts"};
    bundle.tensors.push_back({"C_e", "concepts", TensorKind::K, concepts.erase()});
    bundle.tensors.push_back({"C_g", "concepts", TensorKind::K, concepts.guide()});
    bundle.tensors.push_back({"C_p", "concepts", TensorKind::K, concepts.preserve()});
    write_dense(bundle, path);
}

ConceptMatrices read_concepts(const std::filesystem::path& path) {
    Bundle bundle = read_bundle(path);
    const DenseMatrix* erase = nullptr;
    const DenseMatrix* guide = nullptr;
    const DenseMatrix* preserve = nullptr;
    for (const auto& t : bundle.tensors) {
        if (t.name == "C_e") erase = &t.matrix;
        else if (t.name == "C_g") guide = &t.matrix;
        else if (t.name == "C_p") preserve = &t.matrix;
    }
    if (!erase || !guide) {
        throw format_error("concepts file must contain entries named C_e and C_g");
    }
    DenseMatrix p = preserve ? *preserve : DenseMatrix(erase->rows(), 0);
    return ConceptMatrices(*erase, *guide, std::move(p));
}

namespace {

Bundle load_input(const RunConfig& cfg) {
    if (cfg.input_path.has_value() == cfg.synthetic_input.has_value()) {
        throw invalid_input_error("run: exactly one of input_path / synthetic_input is required");
    }
    if (cfg.input_path) return read_bundle(*cfg.input_path);
    return generate_synthetic_bundle(*cfg.synthetic_input);
}

ConceptMatrices load_concepts(const RunConfig& cfg, const Bundle& bundle) {
    if (cfg.concepts_path.has_value() == cfg.synthetic_concepts.has_value()) {
        throw invalid_input_error("run: exactly one of concepts_path / synthetic_concepts is required");
    }
    if (cfg.concepts_path) return read_concepts(*cfg.concepts_path);
    SyntheticConceptSpec spec = *cfg.synthetic_concepts;
    if (spec.embed_dim == 0) {
        if (bundle.tensors.empty()) {
            throw invalid_input_error("run: cannot infer the embedding dimension from an empty bundle");
        }
        const std::size_t m = bundle.tensors.front().matrix.cols();
        for (const auto& t : bundle.tensors) {
            if (t.matrix.cols() != m) {
                throw invalid_input_error(
                    "run: layers disagree on the embedding dimension; set embed_dim explicitly");
            }
        }
        spec.embed_dim = static_cast<std::uint32_t>(m);
    }
    return generate_synthetic_concepts(spec);
}

void validate_run_config(const RunConfig& cfg) {
    if (cfg.parallelism == 0) throw invalid_input_error("run: parallelism must be >= 1");
    if (cfg.trace_stride == 0) throw invalid_input_error("run: trace_stride must be >= 1");
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
        throw invalid_input_error("run: lambda must be non-negative");
    }
}

// Solves every layer and assembles the in-memory report; no file I/O.
RunReport run_core(const RunConfig& cfg, const Bundle& input, const ConceptMatrices& concepts) {
    const std::size_t n = input.tensors.size();
    RunReport report;
    report.edited.blocks = input.blocks;
    report.edited.tensors.resize(n);
    report.layers.resize(n);
    report.traces.resize(n);

    const bool nothing_to_erase = concepts.n_erase() == 0;
    std::vector<std::string> failures(n);
    std::vector<bool> numerical_failure(n, false);

    auto solve_layer = [&](std::size_t i) {
        const NamedTensor& t = input.tensors[i];
        try {
            ErasureObjective obj(t.matrix, concepts, cfg.lambda1, cfg.lambda2, cfg.erase_scale);
            LayerRunResult r;
            r.name = t.name;
            r.block = t.block;
            r.kind = t.kind;
            DenseMatrix edited;
            SolveTrace trace;
            if (nothing_to_erase) {
                // No erase targets: the original weights are already optimal,
                // so the bundle passes through untouched.
                edited = t.matrix;
                trace.lipschitz_used = lipschitz_constant(obj);
                trace.step_size = 1.0 / trace.lipschitz_used;
            } else {
                SolverConfig scfg;
                scfg.algorithm = cfg.algorithm;
                scfg.iterations = cfg.iterations;
                scfg.lambda = cfg.lambda;
                scfg.trace_stride = cfg.trace_stride;
                auto [w, tr] = solve(obj, scfg);
                edited = quantize_f32(w);
                trace = std::move(tr);
                r.iterations = trace.objective_history.empty()
                                   ? cfg.iterations
                                   : trace.objective_history.back().first;
                r.solve_seconds = trace.wall_seconds;
            }
            r.lipschitz = trace.lipschitz_used;
            r.final_objective = total_objective(obj, edited, cfg.lambda);
            r.sparsity = sparsity_fraction(edited);
            report.edited.tensors[i] = {t.name, t.block, t.kind, std::move(edited)};
            report.layers[i] = std::move(r);
            report.traces[i] = std::move(trace);
        } catch (const numerical_error& ex) {
            failures[i] = ex.what();
            numerical_failure[i] = true;
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
        }
    };

    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(cfg.parallelism, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) solve_layer(i);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) {
                    solve_layer(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    std::string failure_message;
    bool all_numerical = true;
    bool any_failed = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i].empty()) continue;
        any_failed = true;
        all_numerical = all_numerical && numerical_failure[i];
        if (!failure_message.empty()) failure_message += "; ";
        failure_message += "layer '" + input.tensors[i].name + "': " + failures[i];
    }
    if (any_failed) {
        const std::string msg = "run aborted, failed layers: " + failure_message;
        if (all_numerical) throw numerical_error(msg);
        throw invalid_input_error(msg);
    }

    for (const auto& l : report.layers) report.solve_wall_seconds += l.solve_seconds;
    report.storage = block_sparsity_report(report.edited);
    return report;
}

json layer_trace_json(const SolveTrace& trace) {
    json rows = json::array();
    for (std::size_t i = 0; i < trace.objective_history.size(); ++i) {
        rows.push_back({trace.objective_history[i].first, trace.objective_history[i].second,
                        trace.sparsity_history[i].second});
    }
    return rows;
}

} // namespace

RunReport run_erasure(const RunConfig& cfg) {
    validate_run_config(cfg);
    const auto start = steady_clock::now();
    const Bundle input = load_input(cfg);
    const ConceptMatrices concepts = load_concepts(cfg, input);
    RunReport report = run_core(cfg, input, concepts);
    if (cfg.output_path) {
        write_auto(report.edited, *cfg.output_path, cfg.force_format);
    }
    report.total_wall_seconds = seconds_since(start);
    if (cfg.report_path) {
        write_text_file(*cfg.report_path, run_report_to_json(cfg, report));
    }
    return report;
}

std::string run_report_to_json(const RunConfig& cfg, const RunReport& report) {
    json layers = json::array();
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        const LayerRunResult& l = report.layers[i];
        layers.push_back({{"name", l.name},
                          {"block", l.block},
                          {"kind", to_string(l.kind)},
                          {"iterations", l.iterations},
                          {"final_objective", l.final_objective},
                          {"sparsity", l.sparsity},
                          {"lipschitz", l.lipschitz},
                          {"step_size", l.lipschitz > 0.0 ? 1.0 / l.lipschitz : 0.0},
                          {"solve_seconds", l.solve_seconds},
                          {"trace", layer_trace_json(report.traces[i])}});
    }
    json j{{"config",
            {{"lambda", cfg.lambda},
             {"lambda1", cfg.lambda1},
             {"lambda2", cfg.lambda2},
             {"erase_scale", cfg.erase_scale},
             {"iterations", cfg.iterations},
             {"algorithm", algorithm_name(cfg.algorithm)},
             {"trace_stride", cfg.trace_stride},
             {"parallelism", cfg.parallelism}}},
           {"layers", layers},
           {"storage", json::parse(storage_report_to_json(report.storage))},
           {"solve_wall_seconds", report.solve_wall_seconds},
           {"total_wall_seconds", report.total_wall_seconds}};
    return j.dump(2);
}

SweepResult sweep(const RunConfig& base, const SweepSpec& spec) {
    validate_run_config(base);
    if (spec.lambda_grid.empty() || spec.iteration_grid.empty()) {
        throw invalid_input_error("sweep: grids must be non-empty");
    }
    for (std::size_t i = 1; i < spec.lambda_grid.size(); ++i) {
        if (!(spec.lambda_grid[i] > spec.lambda_grid[i - 1])) {
            throw invalid_input_error("sweep: lambda grid must be strictly increasing");
        }
    }
    for (std::size_t i = 1; i < spec.iteration_grid.size(); ++i) {
        if (spec.iteration_grid[i] <= spec.iteration_grid[i - 1]) {
            throw invalid_input_error("sweep: iteration grid must be strictly increasing");
        }
    }
    SweepResult result;
    for (const auto& metric : canonical_metrics()) {
        if (std::find(spec.metrics.begin(), spec.metrics.end(), metric) != spec.metrics.end()) {
            result.metrics.push_back(metric);
        }
    }
    for (const auto& metric : spec.metrics) {
        if (std::find(canonical_metrics().begin(), canonical_metrics().end(), metric) ==
            canonical_metrics().end()) {
            throw invalid_input_error("sweep: unknown metric '" + metric + "'");
        }
    }

    const Bundle input = load_input(base);
    const ConceptMatrices concepts = load_concepts(base, input);

    for (double lambda : spec.lambda_grid) {
        if (!(lambda >= 0.0)) throw invalid_input_error("sweep: lambda grid values must be >= 0");
        for (std::size_t iterations : spec.iteration_grid) {
            RunConfig cfg = base;
            cfg.lambda = lambda;
            cfg.iterations = iterations;
            RunReport run = run_core(cfg, input, concepts);
            SweepRow row;
            row.lambda = lambda;
            row.iterations = iterations;
            row.sparsity = run.storage.global_sparsity;
            row.deployment_bytes = run.storage.total_deployment_bytes;
            row.zip_bytes = run.storage.total_zip_bytes;
            row.wall_time = run.solve_wall_seconds;
            for (const auto& l : run.layers) row.objective += l.final_objective;
            result.rows.push_back(row);
        }
    }
    return result;
}

namespace {

std::string metric_value(const SweepRow& row, const std::string& metric) {
    char buf[32];
    if (metric == "sparsity") {
        std::snprintf(buf, sizeof buf, "%.12g", row.sparsity);
        return buf;
    }
    if (metric == "deployment_bytes") return std::to_string(row.deployment_bytes);
    if (metric == "zip_bytes") return std::to_string(row.zip_bytes);
    if (metric == "wall_time") {
        std::snprintf(buf, sizeof buf, "%.6f", row.wall_time);
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.12g", row.objective);
    return buf;
}

} // namespace

std::string sweep_to_csv(const SweepResult& result) {
    std::string csv = "lambda,iterations";
    for (const auto& m : result.metrics) csv += "," + m;
    csv += '\n';
    char buf[32];
    for (const auto& row : result.rows) {
        std::snprintf(buf, sizeof buf, "%.12g", row.lambda);
        csv += buf;
        csv += ',' + std::to_string(row.iterations);
        for (const auto& m : result.metrics) csv += ',' + metric_value(row, m);
        csv += '\n';
    }
    return csv;
}

std::string sweep_to_json(const SweepResult& result) {
    json rows = json::array();
    for (const auto& row : result.rows) {
        json r{{"lambda", row.lambda}, {"iterations", row.iterations}};
        for (const auto& m : result.metrics) {
            if (m == "sparsity") r["sparsity"] = row.sparsity;
            else if (m == "deployment_bytes") r["deployment_bytes"] = row.deployment_bytes;
            else if (m == "zip_bytes") r["zip_bytes"] = row.zip_bytes;
            else if (m == "wall_time") r["wall_time"] = row.wall_time;
            else r["objective"] = row.objective;
        }
        rows.push_back(std::move(r));
    }
    return json{{"metrics", result.metrics}, {"rows", rows}}.dump(2);
}

ComparisonReport compare_dense_vs_sparse(const RunConfig& cfg) {
    validate_run_config(cfg);
    const Bundle input = load_input(cfg);
    const ConceptMatrices concepts = load_concepts(cfg, input);
    const bool nothing_to_erase = concepts.n_erase() == 0;

    Bundle dense_bundle;
    dense_bundle.blocks = input.blocks;
    Bundle sparse_bundle;
    sparse_bundle.blocks = input.blocks;

    ComparisonReport report;
    for (const auto& t : input.tensors) {
        ErasureObjective obj(t.matrix, concepts, cfg.lambda1, cfg.lambda2, cfg.erase_scale);
        SolverConfig scfg;
        scfg.algorithm = cfg.algorithm;
        scfg.iterations = cfg.iterations;
        scfg.trace_stride = std::max<std::size_t>(cfg.iterations, 1);

        DenseMatrix w_dense = nothing_to_erase ? t.matrix : closed_form_uce(obj);
        DenseMatrix w_iter0;
        if (nothing_to_erase) {
            w_iter0 = t.matrix;
        } else {
            scfg.lambda = 0.0;
            w_iter0 = solve(obj, scfg).first;
        }
        DenseMatrix w_sparse;
        if (nothing_to_erase || cfg.lambda == 0.0) {
            w_sparse = w_iter0;
        } else {
            scfg.lambda = cfg.lambda;
            w_sparse = solve(obj, scfg).first;
        }

        LayerComparison cmp;
        cmp.name = t.name;
        if (nothing_to_erase) {
            cmp.rel_delta_lambda0 = 0.0;
        } else {
            const double denom = frobenius_norm(w_dense);
            cmp.rel_delta_lambda0 =
                frobenius_norm(subtract(w_dense, w_iter0)) / (denom > 0.0 ? denom : 1.0);
        }
        report.max_rel_delta = std::max(report.max_rel_delta, cmp.rel_delta_lambda0);
        report.layers.push_back(std::move(cmp));

        dense_bundle.tensors.push_back({t.name, t.block, t.kind, quantize_f32(w_dense)});
        sparse_bundle.tensors.push_back({t.name, t.block, t.kind, quantize_f32(w_sparse)});
    }

    const StorageReport dense_storage = block_sparsity_report(dense_bundle);
    const StorageReport sparse_storage = block_sparsity_report(sparse_bundle);
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        report.layers[i].dense_sparsity = dense_storage.layers[i].sparsity;
        report.layers[i].sparse_sparsity = sparse_storage.layers[i].sparsity;
        report.layers[i].dense_deployment_bytes = dense_storage.layers[i].deployment_bytes;
        report.layers[i].sparse_deployment_bytes = sparse_storage.layers[i].deployment_bytes;
    }
    report.dense_global_sparsity = dense_storage.global_sparsity;
    report.sparse_global_sparsity = sparse_storage.global_sparsity;
    report.dense_total_deployment_bytes = dense_storage.total_deployment_bytes;
    report.sparse_total_deployment_bytes = sparse_storage.total_deployment_bytes;
    return report;
}

std::string comparison_to_json(const ComparisonReport& report) {
    json layers = json::array();
    for (const auto& l : report.layers) {
        layers.push_back({{"name", l.name},
                          {"rel_delta_lambda0", l.rel_delta_lambda0},
                          {"dense_sparsity", l.dense_sparsity},
                          {"sparse_sparsity", l.sparse_sparsity},
                          {"dense_deployment_bytes", l.dense_deployment_bytes},
                          {"sparse_deployment_bytes", l.sparse_deployment_bytes}});
    }
    return json{{"layers", layers},
                {"max_rel_delta", report.max_rel_delta},
                {"dense_global_sparsity", report.dense_global_sparsity},
                {"sparse_global_sparsity", report.sparse_global_sparsity},
                {"dense_total_deployment_bytes", report.dense_total_deployment_bytes},
                {"sparse_total_deployment_bytes", report.sparse_total_deployment_bytes}}
        .dump(2);
}

} // namespace cerase
