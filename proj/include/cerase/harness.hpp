#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cerase/solver.hpp"
#include "cerase/storage.hpp"

namespace cerase {

/// Deterministic 64-bit generator (splitmix64) with a Box-Muller gaussian
/// on top. Self-contained so synthetic problems reproduce bit-exactly for a
/// given seed regardless of the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform in (0, 1].
    double next_unit();
    double next_gaussian();

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct SyntheticLayerSpec {
    std::string name;
    std::string block;
    TensorKind kind = TensorKind::K;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
};

struct SyntheticBundleSpec {
    std::uint64_t seed = 0;
    std::vector<std::string> blocks = {"down", "mid", "up"};
    std::vector<SyntheticLayerSpec> layers;

    /// `count` K/V layers of identical shape, block labels assigned by
    /// thirds (down / mid / up).
    static SyntheticBundleSpec uniform(std::uint64_t seed, std::size_t count,
                                       std::uint32_t rows, std::uint32_t cols);

    /// Miniature of the usual U-Net K/V projection shapes: row counts
    /// {320, 640, 1280} and embedding width 768, divided by `scale_div`.
    static SyntheticBundleSpec sd_style(std::uint64_t seed, std::uint32_t scale_div);
};

struct SyntheticConceptSpec {
    std::uint64_t seed = 0;
    std::uint32_t embed_dim = 0; // 0 = infer from the weight bundle
    std::uint32_t n_erase = 0;
    std::uint32_t n_preserve = 0;
    bool unit_normalize = true;
};

/// Weights are i.i.d. N(0, 1/m) per entry (m = cols) and quantized to
/// storage precision, so a generated bundle round-trips files bit-exactly.
Bundle generate_synthetic_bundle(const SyntheticBundleSpec& spec);

/// Concept columns are i.i.d. standard normal, optionally normalized to
/// unit Euclidean length (exact in double precision).
ConceptMatrices generate_synthetic_concepts(const SyntheticConceptSpec& spec);

/// Concept matrices stored as a dense container with entries named
/// "C_e", "C_g" and (optionally) "C_p".
void write_concepts(const ConceptMatrices& concepts, const std::filesystem::path& path);
ConceptMatrices read_concepts(const std::filesystem::path& path);

struct RunConfig {
    // Exactly one of the two inputs per kind.
    std::optional<std::filesystem::path> input_path;
    std::optional<SyntheticBundleSpec> synthetic_input;
    std::optional<std::filesystem::path> concepts_path;
    std::optional<SyntheticConceptSpec> synthetic_concepts;

    double lambda = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double erase_scale = 1.0;
    std::size_t iterations = 1000;
    Algorithm algorithm = Algorithm::Fista;
    std::size_t trace_stride = 10;

    std::optional<std::filesystem::path> output_path;
    std::optional<std::filesystem::path> report_path;
    /// Force DENSE or CSR output; unset picks the smaller encoding per layer.
    std::optional<TensorFormat> force_format;
    /// Max concurrent layer solves. Results are independent of this value.
    unsigned parallelism = 1;
};

struct LayerRunResult {
    std::string name;
    std::string block;
    TensorKind kind = TensorKind::K;
    std::size_t iterations = 0;
    double final_objective = 0.0;
    double sparsity = 0.0;
    double lipschitz = 0.0;
    double solve_seconds = 0.0;
};

struct RunReport {
    std::vector<LayerRunResult> layers;
    std::vector<SolveTrace> traces; // parallel to layers
    StorageReport storage;
    Bundle edited;                 // storage-precision edited weights
    double solve_wall_seconds = 0.0; // sum of per-layer solve times
    double total_wall_seconds = 0.0; // end to end, including serialization
};

/// Solves every layer of the input bundle against the shared concept set,
/// writes the edited bundle and report when paths are configured, and
/// returns the full result. A layer failure aborts the run with an error
/// listing every failed layer.
RunReport run_erasure(const RunConfig& cfg);

std::string run_report_to_json(const RunConfig& cfg, const RunReport& report);

struct SweepSpec {
    std::vector<double> lambda_grid;          // strictly increasing, non-empty
    std::vector<std::size_t> iteration_grid;  // strictly increasing, non-empty
    std::vector<std::string> metrics = {"sparsity", "deployment_bytes", "zip_bytes",
                                        "wall_time", "objective"};
};

struct SweepRow {
    double lambda = 0.0;
    std::size_t iterations = 0;
    double sparsity = 0.0;
    std::uint64_t deployment_bytes = 0;
    std::uint64_t zip_bytes = 0;
    double wall_time = 0.0;  // summed layer solve seconds
    double objective = 0.0;  // summed final objective across layers
};

struct SweepResult {
    std::vector<std::string> metrics; // validated, in canonical order
    std::vector<SweepRow> rows;       // lambda-major, then iterations
};

SweepResult sweep(const RunConfig& base, const SweepSpec& spec);
std::string sweep_to_csv(const SweepResult& result);
std::string sweep_to_json(const SweepResult& result);

struct LayerComparison {
    std::string name;
    double rel_delta_lambda0 = 0.0; // |W_dense - W_iter(l=0)|_F / |W_dense|_F
    double dense_sparsity = 0.0;
    double sparse_sparsity = 0.0;
    std::uint64_t dense_deployment_bytes = 0;
    std::uint64_t sparse_deployment_bytes = 0;
};

struct ComparisonReport {
    std::vector<LayerComparison> layers;
    double max_rel_delta = 0.0;
    double dense_global_sparsity = 0.0;
    double sparse_global_sparsity = 0.0;
    std::uint64_t dense_total_deployment_bytes = 0;
    std::uint64_t sparse_total_deployment_bytes = 0;
};

/// Per layer: the one-shot dense update (closed_form_uce) vs the iterative
/// solver at lambda = 0 (they agree at high iteration counts), plus the
/// sparsity and deployment-size deltas at the configured lambda.
ComparisonReport compare_dense_vs_sparse(const RunConfig& cfg);
std::string comparison_to_json(const ComparisonReport& report);

} // namespace cerase
