// Acceptance suite: one criterion per function, one printed line each.
// Exit code 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cerase/harness.hpp"
#include "cerase/solver.hpp"
#include "cerase/storage.hpp"
#include "oracles.hpp"

using namespace cerase;
using steady_clock = std::chrono::steady_clock;

namespace {

double seconds_since(steady_clock::time_point start) {
    return std::chrono::duration<double>(steady_clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

oracle::InstanceParams sample_instance(Rng& rng) {
    oracle::InstanceParams p;
    p.n = 16 + rng.next_u64() % 49; // up to 64
    p.m = 32 + rng.next_u64() % 65; // up to 96
    p.n_erase = 1 + rng.next_u64() % 4;
    p.n_preserve = rng.next_u64() % 9;
    p.lambda1 = 1.0;
    p.lambda2 = 1.0;
    return p;
}

double max_abs(const DenseMatrix& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::fabs(v));
    return best;
}

// 1. The momentum solver at lambda = 0 reproduces the one-shot dense update.
Outcome closed_form_equivalence() {
    const auto start = steady_clock::now();
    Rng rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        ErasureObjective obj = oracle::random_objective(rng, sample_instance(rng));
        SolverConfig cfg;
        cfg.iterations = 5000;
        cfg.trace_stride = 5000;
        const DenseMatrix iterative = solve(obj, cfg).first;
        const DenseMatrix dense = closed_form_uce(obj);
        worst = std::max(worst,
                         frobenius_norm(subtract(iterative, dense)) / frobenius_norm(dense));
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-6 && elapsed <= 10.0,
            fmt("max rel err %.2e (limit 1e-06), %.2f s (limit 10 s)", worst, elapsed)};
}

// 2. Analytic gradient vs central finite differences.
Outcome gradient_audit() {
    const auto start = steady_clock::now();
    Rng rng(1002);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        oracle::InstanceParams p;
        p.n = 4 + rng.next_u64() % 13; // up to 16
        p.m = 6 + rng.next_u64() % 19; // up to 24
        p.n_erase = 1 + rng.next_u64() % 3;
        p.n_preserve = rng.next_u64() % 5;
        ErasureObjective obj = oracle::random_objective(rng, p);
        const DenseMatrix w = oracle::random_matrix(rng, p.n, p.m);
        const DenseMatrix analytic = gradient(obj, w);
        const DenseMatrix fd = oracle::finite_difference_gradient(obj, w, 1e-6);
        const double floor = 1e-2 * max_abs(analytic);
        for (std::size_t k = 0; k < analytic.size(); ++k) {
            const double denom = std::max({std::fabs(analytic.data()[k]), floor, 1e-12});
            worst = std::max(worst, std::fabs(analytic.data()[k] - fd.data()[k]) / denom);
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-5 && elapsed <= 5.0,
            fmt("max rel err %.2e (limit 1e-05), %.2f s (limit 5 s)", worst, elapsed)};
}

// 3. The gradient variation never exceeds the stated constant, and the
// spectral constant is no larger than the Frobenius alternative.
Outcome lipschitz_bound() {
    Rng rng(1003);
    double worst_ratio = 0.0;
    double worst_margin = -1e300;
    for (int i = 0; i < 10; ++i) {
        const oracle::InstanceParams p = sample_instance(rng);
        ErasureObjective obj = oracle::random_objective(rng, p);
        const double lip = lipschitz_constant(obj);
        for (int pair = 0; pair < 1000; ++pair) {
            const DenseMatrix w1 = oracle::random_matrix(rng, p.n, p.m);
            const DenseMatrix w2 = oracle::random_matrix(rng, p.n, p.m);
            const double dw = frobenius_norm(subtract(w1, w2));
            if (dw == 0.0) continue;
            const double dg = frobenius_norm(subtract(gradient(obj, w1), gradient(obj, w2)));
            worst_ratio = std::max(worst_ratio, dg / (lip * dw));
        }

        // Frobenius alternative: twice the Frobenius norm of the assembled
        // curvature matrix erase_scale*Ce*Ce^T + lambda1*Cp*Cp^T + lambda2*I.
        const std::size_t m = obj.embed_dim();
        DenseMatrix curvature(m, m);
        for (std::size_t r = 0; r < m; ++r) curvature(r, r) = obj.lambda2();
        const ConceptMatrices& c = obj.concepts();
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t q = 0; q < m; ++q) {
                double acc = 0.0;
                for (std::size_t l = 0; l < c.n_erase(); ++l) {
                    acc += obj.erase_scale() * c.erase()(r, l) * c.erase()(q, l);
                }
                for (std::size_t l = 0; l < c.n_preserve(); ++l) {
                    acc += obj.lambda1() * c.preserve()(r, l) * c.preserve()(q, l);
                }
                curvature(r, q) += acc;
            }
        }
        const double frobenius_alternative = 2.0 * frobenius_norm(curvature);
        worst_margin = std::max(worst_margin, lip - frobenius_alternative);
    }
    const bool pass = worst_ratio <= 1.0 + 1e-9 && worst_margin <= 0.0;
    return {pass, fmt("max gradient-variation ratio %.9f (limit 1+1e-9), spectral-minus-Frobenius "
                      "margin %.3e (limit 0)",
                      worst_ratio, worst_margin)};
}

// 4. The computed threshold separates all-zero solutions from nonzero ones.
Outcome zero_solution_threshold_criterion() {
    Rng rng(1004);
    for (int i = 0; i < 5; ++i) {
        oracle::InstanceParams p;
        p.n = 12 + rng.next_u64() % 21;
        p.m = 16 + rng.next_u64() % 25;
        p.n_erase = 1 + rng.next_u64() % 3;
        p.n_preserve = rng.next_u64() % 4;
        ErasureObjective obj = oracle::random_objective(rng, p);
        const double threshold = zero_solution_threshold(obj);
        if (!(threshold > 0.0)) return {false, "degenerate instance with zero threshold"};

        SolverConfig cfg;
        cfg.iterations = 2000;
        cfg.trace_stride = 2000;
        cfg.lambda = 1.01 * threshold;
        const DenseMatrix collapsed = solve(obj, cfg).first;
        if (frobenius_norm(collapsed) > 1e-8 * frobenius_norm(obj.original())) {
            return {false, fmt("instance %d: |W| = %.3e did not collapse", i,
                               frobenius_norm(collapsed))};
        }
        if (optimality_residual(obj, DenseMatrix(p.n, p.m), cfg.lambda) != 0.0) {
            return {false, fmt("instance %d: residual at zero is not exactly 0", i)};
        }

        cfg.lambda = 0.5 * threshold;
        const DenseMatrix partial = solve(obj, cfg).first;
        if (frobenius_norm(partial) == 0.0) {
            return {false, fmt("instance %d: solution vanished below the threshold", i)};
        }
    }
    return {true, "collapse at 1.01x threshold, nonzero at 0.5x, residual exactly 0 (5 instances)"};
}

// 5. The momentum algorithm reaches the target objective gap in strictly
// fewer iterations than the plain one on at least 9 of 10 fixed instances.
Outcome rate_dominance() {
    Rng rng(1005);
    int momentum_wins = 0;
    std::string counts;
    for (int i = 0; i < 10; ++i) {
        oracle::InstanceParams p;
        p.n = 24;
        p.m = 32;
        p.n_erase = 2;
        p.n_preserve = 2;
        p.concept_scale = 4.0; // widens the curvature spread
        ErasureObjective obj = oracle::random_objective(rng, p);
        const double lambda = 0.1 * zero_solution_threshold(obj);

        SolverConfig longrun;
        longrun.iterations = 20000;
        longrun.trace_stride = 20000;
        longrun.lambda = lambda;
        longrun.algorithm = Algorithm::Fista;
        const double j_a = solve(obj, longrun).second.objective_history.back().second;
        longrun.algorithm = Algorithm::Ista;
        const double j_b = solve(obj, longrun).second.objective_history.back().second;
        const double target = std::min(j_a, j_b) * (1.0 + 1e-6);

        auto iterations_to_target = [&](Algorithm algo) -> std::size_t {
            SolverConfig counted;
            counted.iterations = 5000;
            counted.trace_stride = 1;
            counted.lambda = lambda;
            counted.algorithm = algo;
            const SolveTrace trace = solve(obj, counted).second;
            for (const auto& [k, j] : trace.objective_history) {
                if (j <= target) return k;
            }
            return counted.iterations + 1;
        };
        const std::size_t fista_iters = iterations_to_target(Algorithm::Fista);
        const std::size_t ista_iters = iterations_to_target(Algorithm::Ista);
        if (fista_iters < ista_iters) ++momentum_wins;
        counts += fmt("%zu/%zu ", fista_iters, ista_iters);
    }
    return {momentum_wins >= 9,
            fmt("momentum wins %d/10 (needs >= 9); iterations momentum/plain: %s", momentum_wins,
                counts.c_str())};
}

// 6. Sparsity rises monotonically along a lambda grid and spans the range.
Outcome sparsity_trend() {
    RunConfig cfg;
    cfg.synthetic_input = SyntheticBundleSpec::uniform(606, 6, 32, 48);
    SyntheticConceptSpec concepts;
    concepts.seed = 606;
    concepts.n_erase = 1;
    concepts.n_preserve = 2;
    cfg.synthetic_concepts = concepts;
    cfg.trace_stride = 1000;

    const Bundle input = generate_synthetic_bundle(*cfg.synthetic_input);
    SyntheticConceptSpec resolved = *cfg.synthetic_concepts;
    resolved.embed_dim = 48; // the bundle's column count
    const ConceptMatrices cm = generate_synthetic_concepts(resolved);
    double threshold = 0.0;
    for (const auto& t : input.tensors) {
        threshold = std::max(threshold, zero_solution_threshold(ErasureObjective(t.matrix, cm)));
    }

    SweepSpec spec;
    spec.lambda_grid = {0.0,
                        threshold / 64,
                        threshold / 16,
                        threshold / 8,
                        threshold / 4,
                        threshold / 2,
                        3 * threshold / 4,
                        1.05 * threshold};
    spec.iteration_grid = {1000};
    spec.metrics = {"sparsity"};
    const SweepResult result = sweep(cfg, spec);

    bool monotone = true;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].sparsity < result.rows[i - 1].sparsity - 0.01) monotone = false;
    }
    const double first = result.rows.front().sparsity;
    const double last = result.rows.back().sparsity;
    return {monotone && first <= 0.05 && last >= 0.95,
            fmt("8-point grid: %.3f -> %.3f, monotone within 1%%: %s", first, last,
                monotone ? "yes" : "no")};
}

// 7. Deployment and compressed sizes behave as the format arithmetic says.
Outcome storage_arithmetic() {
    Rng rng(1007);
    auto sparsified_bundle = [&rng](double sparsity) {
        Bundle b;
        for (int i = 0; i < 4; ++i) {
            DenseMatrix m(128, 128);
            for (auto& v : m.data()) v = rng.next_gaussian();
            std::vector<double> magnitudes;
            magnitudes.reserve(m.size());
            for (double v : m.data()) magnitudes.push_back(std::fabs(v));
            std::sort(magnitudes.begin(), magnitudes.end());
            const std::size_t cut = static_cast<std::size_t>(sparsity * double(m.size()));
            const double alpha = magnitudes[cut == 0 ? 0 : cut - 1];
            m = quantize_f32(shrinkage(m, alpha));
            b.tensors.push_back({"mid." + std::to_string(i), "mid", TensorKind::K, std::move(m)});
        }
        return b;
    };

    const Bundle sparse = sparsified_bundle(0.85);
    const StorageReport sparse_report = block_sparsity_report(sparse);
    const bool sparsity_ok = sparse_report.global_sparsity >= 0.84;
    const double deployment_ratio = double(sparse_report.total_deployment_bytes) /
                                    double(sparse_report.total_dense_bytes);
    const bool zip_ok = sparse_report.total_zip_bytes <= sparse_report.total_csr_bytes;

    const Bundle mild = sparsified_bundle(0.30);
    const StorageReport mild_report = block_sparsity_report(mild);
    bool dense_wins = true;
    for (const auto& layer : mild_report.layers) {
        if (layer.deployment_format != TensorFormat::Dense) dense_wins = false;
    }
    const bool pass = sparsity_ok && deployment_ratio <= 0.35 && zip_ok && dense_wins;
    return {pass, fmt("85%% sparsity: deployment %.1f%% of dense (limit 35%%), zip <= csr: %s; "
                      "30%% sparsity keeps DENSE: %s",
                      100.0 * deployment_ratio, zip_ok ? "yes" : "no", dense_wins ? "yes" : "no")};
}

// 8. A 32-layer bundle erases within the time budget and the reported
// solve time scales linearly with the iteration count.
Outcome erasure_time() {
    RunConfig cfg;
    cfg.synthetic_input = SyntheticBundleSpec::uniform(808, 32, 256, 256);
    SyntheticConceptSpec concepts;
    concepts.seed = 808;
    concepts.n_erase = 1;
    concepts.n_preserve = 2;
    cfg.synthetic_concepts = concepts;
    cfg.lambda = 0.01;
    cfg.trace_stride = 100;
    cfg.parallelism = 1;

    auto timed_run = [&](std::size_t iters) {
        RunConfig c = cfg;
        c.iterations = iters;
        return run_erasure(c).solve_wall_seconds;
    };
    const double t1000 = timed_run(1000);
    const double t500 = timed_run(500);
    const double t250 = timed_run(250);

    const double per_iteration = t1000 / 1000.0;
    const double dev500 = std::fabs(t500 - 500.0 * per_iteration) / (500.0 * per_iteration);
    const double dev250 = std::fabs(t250 - 250.0 * per_iteration) / (250.0 * per_iteration);
    const bool pass = t1000 <= 60.0 && dev500 <= 0.2 && dev250 <= 0.2;
    return {pass, fmt("K=1000: %.2f s (limit 60 s); linearity dev K=500: %.1f%%, K=250: %.1f%% "
                      "(limit 20%%)",
                      t1000, 100.0 * dev500, 100.0 * dev250)};
}

// 9. Both containers round-trip randomized bundles bit-exactly.
Outcome format_round_trips() {
    Rng rng(1009);
    const auto dir = std::filesystem::temp_directory_path() / "cerase_acceptance";
    std::filesystem::create_directories(dir);

    auto equal = [](const Bundle& a, const Bundle& b) {
        if (a.tensors.size() != b.tensors.size() || a.blocks != b.blocks) return false;
        for (std::size_t i = 0; i < a.tensors.size(); ++i) {
            if (a.tensors[i].name != b.tensors[i].name || a.tensors[i].block != b.tensors[i].block ||
                a.tensors[i].kind != b.tensors[i].kind ||
                !(a.tensors[i].matrix == b.tensors[i].matrix)) {
                return false;
            }
        }
        return true;
    };

    for (int trial = 0; trial < 100; ++trial) {
        Bundle b;
        // trial 0: empty bundle; trial 1: a single all-zero layer.
        const std::size_t layers = trial == 0 ? 0 : (trial == 1 ? 1 : 1 + rng.next_u64() % 5);
        for (std::size_t i = 0; i < layers; ++i) {
            const std::size_t rows = 1 + rng.next_u64() % 24;
            const std::size_t cols = 1 + rng.next_u64() % 24;
            DenseMatrix m(rows, cols);
            if (trial != 1) {
                for (auto& v : m.data()) {
                    v = rng.next_unit() < 0.5
                            ? 0.0
                            : static_cast<double>(static_cast<float>(rng.next_gaussian()));
                }
            }
            const std::string block = b.blocks[rng.next_u64() % 3];
            b.tensors.push_back({block + "." + std::to_string(i), block,
                                 rng.next_u64() % 2 ? TensorKind::V : TensorKind::K, std::move(m)});
        }

        const auto dense_path = dir / ("rt_dense_" + std::to_string(trial) + ".spmx");
        write_dense(b, dense_path);
        if (!equal(read_dense(dense_path), b)) {
            return {false, fmt("dense round trip diverged on trial %d", trial)};
        }
        const auto csr_path = dir / ("rt_csr_" + std::to_string(trial) + ".spcr");
        write_csr(b, csr_path);
        if (!equal(read_csr(csr_path), b)) {
            return {false, fmt("CSR round trip diverged on trial %d", trial)};
        }
        const auto auto_path = dir / ("rt_auto_" + std::to_string(trial) + ".bin");
        write_auto(b, auto_path);
        if (!equal(read_bundle(auto_path), b)) {
            return {false, fmt("auto round trip diverged on trial %d", trial)};
        }
    }
    return {true, "100 randomized bundles, dense/CSR/auto containers, bit-exact"};
}

// 10. The parameter-weighted mean of block sparsities is the global sparsity.
Outcome block_report_identity() {
    Rng rng(1010);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Bundle b;
        const std::size_t layers = 1 + rng.next_u64() % 8;
        for (std::size_t i = 0; i < layers; ++i) {
            const std::size_t rows = 1 + rng.next_u64() % 32;
            const std::size_t cols = 1 + rng.next_u64() % 32;
            DenseMatrix m(rows, cols);
            const double sparsity = rng.next_unit();
            for (auto& v : m.data()) {
                v = rng.next_unit() < sparsity
                        ? 0.0
                        : static_cast<double>(static_cast<float>(rng.next_gaussian()));
            }
            const std::string block = b.blocks[rng.next_u64() % 3];
            b.tensors.push_back({block + "." + std::to_string(i), block, TensorKind::K, std::move(m)});
        }
        const StorageReport report = block_sparsity_report(b);
        double weighted = 0.0;
        for (const auto& blk : report.blocks) weighted += double(blk.params) * blk.sparsity;
        weighted /= double(report.total_params);
        worst = std::max(worst, std::fabs(weighted - report.global_sparsity));
    }
    return {worst <= 1e-12, fmt("max identity error %.2e (limit 1e-12) on 50 bundles", worst)};
}

} // namespace

int main() {
    struct Criterion {
        const char* title;
        Outcome (*run)();
    };
    const std::vector<Criterion> criteria = {
        {"closed-form equivalence", closed_form_equivalence},
        {"gradient audit", gradient_audit},
        {"Lipschitz bound", lipschitz_bound},
        {"zero-solution threshold", zero_solution_threshold_criterion},
        {"rate dominance", rate_dominance},
        {"sparsity-vs-lambda trend", sparsity_trend},
        {"storage arithmetic", storage_arithmetic},
        {"erasure-time budget", erasure_time},
        {"format round trips", format_round_trips},
        {"block report identity", block_report_identity},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].run();
        } catch (const std::exception& ex) {
            outcome = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("[%s] %zu. %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].title, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
