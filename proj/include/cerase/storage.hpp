#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cerase/matrix.hpp"

namespace cerase {

enum class TensorKind { K, V };
enum class TensorFormat { Dense, Csr };

std::string to_string(TensorKind k);
std::string to_string(TensorFormat f);
TensorKind tensor_kind_from_string(const std::string& s);
TensorFormat tensor_format_from_string(const std::string& s);

/// One named weight matrix of a bundle, e.g. "down.1.attn2.to_k".
struct NamedTensor {
    std::string name;
    std::string block;
    TensorKind kind = TensorKind::K;
    DenseMatrix matrix;
};

/// A set of layers plus the declared block labels they may use.
struct Bundle {
    std::vector<std::string> blocks = {"down", "mid", "up"};
    std::vector<NamedTensor> tensors;
};

/// Manifest entry as serialized in the container header. byte_offset is
/// relative to the end of the manifest (the payload base).
struct ManifestEntry {
    std::string name;
    std::string block;
    TensorKind kind = TensorKind::K;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    TensorFormat format = TensorFormat::Dense;
    std::uint64_t byte_offset = 0;
    std::uint64_t byte_length = 0;
};

struct TensorManifest {
    std::vector<std::string> blocks;
    std::vector<ManifestEntry> entries;
};

/// Raw float payload bytes: 4 * rows * cols.
std::uint64_t dense_size_bytes(std::uint64_t rows, std::uint64_t cols);

/// CSR record bytes: 24-byte header + u32 row_ptr + (u32 + f32) per nonzero.
std::uint64_t csr_size_bytes(std::uint64_t rows, std::uint64_t nnz);

/// Writes a dense container (magic SPMX): every entry stored as raw
/// little-endian f32 row-major. Lossless round trip at storage precision.
void write_dense(const Bundle& bundle, const std::filesystem::path& path);

/// Reads a dense container; rejects anything but an SPMX file.
Bundle read_dense(const std::filesystem::path& path);

/// Writes a sparse container (magic SPCR): every entry stored as a CSR
/// record (24-byte header, row_ptr, col_idx, values, little-endian).
void write_csr(const Bundle& bundle, const std::filesystem::path& path);

/// Reads a sparse container; rejects anything but an SPCR file.
Bundle read_csr(const std::filesystem::path& path);

/// Writes each entry in whichever encoding is smaller (ties go to dense),
/// or in `force` when given. The file carries the SPCR magic as soon as any
/// entry is CSR-encoded, SPMX otherwise. Returns the per-entry formats.
std::vector<TensorFormat> write_auto(const Bundle& bundle, const std::filesystem::path& path,
                                     std::optional<TensorFormat> force = {});

/// Reads either container kind, dispatching on the per-entry format.
Bundle read_bundle(const std::filesystem::path& path);

/// In-memory serialization with the same byte layout as write_auto.
std::vector<std::uint8_t> serialize_auto(const Bundle& bundle,
                                         std::optional<TensorFormat> force = {});

/// Size in bytes of a single-member ZIP archive (DEFLATE at the default
/// level) holding the given bytes.
std::uint64_t zip_archive_size(std::span<const std::uint8_t> data, const std::string& member_name);

/// Same, for an existing file; the member is named after the file.
std::uint64_t zip_compressed_size(const std::filesystem::path& path);

/// Builds the archive itself (used by the functions above).
std::vector<std::uint8_t> zip_archive(std::span<const std::uint8_t> data,
                                      const std::string& member_name);

struct LayerStorage {
    std::string name;
    std::string block;
    TensorKind kind = TensorKind::K;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint64_t params = 0;
    std::uint64_t nnz = 0; // nonzeros at storage (f32) precision
    double sparsity = 0.0;
    std::uint64_t dense_bytes = 0;
    std::uint64_t csr_bytes = 0;
    std::uint64_t deployment_bytes = 0; // min(dense, csr)
    TensorFormat deployment_format = TensorFormat::Dense;
    std::uint64_t zip_bytes = 0;  // archive of the deployment-encoded record
    std::uint64_t gain_bytes = 0; // dense_bytes - deployment_bytes
};

struct BlockStorage {
    std::string block;
    std::uint64_t params = 0;
    std::uint64_t zeros = 0;
    double sparsity = 0.0;
    std::uint64_t dense_bytes = 0;
    std::uint64_t deployment_bytes = 0;
    std::uint64_t gain_bytes = 0;
};

struct StorageReport {
    std::vector<LayerStorage> layers;
    std::vector<BlockStorage> blocks; // one row per declared block, in order
    std::uint64_t total_params = 0;
    std::uint64_t total_zeros = 0;
    double global_sparsity = 0.0;
    std::uint64_t total_dense_bytes = 0;
    std::uint64_t total_csr_bytes = 0;
    std::uint64_t total_deployment_bytes = 0;
    std::uint64_t total_zip_bytes = 0; // archive of the auto-serialized bundle
    std::uint64_t total_gain_bytes = 0;
};

/// Per-layer, per-block and global sparsity plus the byte accounting.
/// The parameter-weighted mean of block sparsities equals the global
/// sparsity by construction. Throws invalid_input_error when a tensor
/// uses a block label outside the bundle's declared set.
StorageReport block_sparsity_report(const Bundle& bundle);

std::string storage_report_to_json(const StorageReport& report);
std::string storage_report_to_csv(const StorageReport& report);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace cerase
