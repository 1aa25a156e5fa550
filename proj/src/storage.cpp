#include "cerase/storage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <utility>

#include <zlib.h>

#include "json.hpp"

namespace cerase {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kCsrRecordHeader = 24;

// -------------------------------------------------------------------------
// Little-endian byte plumbing

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void put_u8(std::uint8_t v) { bytes.push_back(v); }
    void put_u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
};

struct ByteReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void require(std::size_t n) const {
        if (pos + n > bytes.size()) throw format_error("container: truncated data");
    }
    std::uint8_t get_u8() {
        require(1);
        return bytes[pos++];
    }
    std::uint16_t get_u16() {
        require(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos]) |
                          static_cast<std::uint16_t>(bytes[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    std::uint32_t get_u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t get_u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float get_f32() {
        std::uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

// -------------------------------------------------------------------------
// Payload encoding

std::vector<std::uint8_t> encode_dense_payload(const DenseMatrix& m) {
    ByteWriter w;
    w.bytes.reserve(4 * m.size());
    for (double v : m.data()) w.put_f32(static_cast<float>(v));
    return std::move(w.bytes);
}

DenseMatrix decode_dense_payload(std::span<const std::uint8_t> payload,
                                 std::uint32_t rows, std::uint32_t cols) {
    if (payload.size() != dense_size_bytes(rows, cols)) {
        throw format_error("container: dense payload length mismatch");
    }
    ByteReader r{payload};
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (auto& d : data) {
        const float f = r.get_f32();
        if (!std::isfinite(f)) throw format_error("container: non-finite dense value");
        d = static_cast<double>(f);
    }
    return DenseMatrix(rows, cols, std::move(data));
}

std::vector<std::uint8_t> encode_csr_payload(const CsrMatrix& s) {
    ByteWriter w;
    w.bytes.reserve(csr_size_bytes(s.rows, s.nnz()));
    w.put_u32(s.rows);
    w.put_u32(s.cols);
    w.put_u32(static_cast<std::uint32_t>(s.nnz()));
    w.put_u8(0); // dtype f32
    w.put_u8(0); // flags
    w.put_u16(0);
    w.put_u64(0); // reserved
    for (std::uint32_t v : s.row_ptr) w.put_u32(v);
    for (std::uint32_t v : s.col_idx) w.put_u32(v);
    for (float v : s.values) w.put_f32(v);
    return std::move(w.bytes);
}

CsrMatrix decode_csr_payload(std::span<const std::uint8_t> payload,
                             std::uint32_t rows, std::uint32_t cols) {
    ByteReader r{payload};
    CsrMatrix s;
    s.rows = r.get_u32();
    s.cols = r.get_u32();
    const std::uint32_t nnz = r.get_u32();
    const std::uint8_t dtype = r.get_u8();
    r.get_u8();
    r.get_u16();
    r.get_u64();
    if (s.rows != rows || s.cols != cols) {
        throw format_error("container: CSR record dimensions disagree with the manifest");
    }
    if (dtype != 0) throw format_error("container: unsupported CSR dtype");
    if (payload.size() != csr_size_bytes(rows, nnz)) {
        throw format_error("container: CSR payload length mismatch");
    }
    s.row_ptr.resize(static_cast<std::size_t>(rows) + 1);
    for (auto& v : s.row_ptr) v = r.get_u32();
    s.col_idx.resize(nnz);
    for (auto& v : s.col_idx) v = r.get_u32();
    s.values.resize(nnz);
    for (auto& v : s.values) v = r.get_f32();
    s.validate();
    return s;
}

// -------------------------------------------------------------------------
// Manifest

json manifest_to_json(const TensorManifest& manifest) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"name", e.name},
                           {"block", e.block},
                           {"kind", to_string(e.kind)},
                           {"rows", e.rows},
                           {"cols", e.cols},
                           {"dtype", "f32"},
                           {"format", to_string(e.format)},
                           {"byte_offset", e.byte_offset},
                           {"byte_length", e.byte_length}});
    }
    return json{{"blocks", manifest.blocks}, {"entries", entries}};
}

TensorManifest manifest_from_json(const json& j) {
    TensorManifest manifest;
    try {
        manifest.blocks = j.at("blocks").get<std::vector<std::string>>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.name = e.at("name").get<std::string>();
            entry.block = e.at("block").get<std::string>();
            entry.kind = tensor_kind_from_string(e.at("kind").get<std::string>());
            entry.rows = e.at("rows").get<std::uint32_t>();
            entry.cols = e.at("cols").get<std::uint32_t>();
            if (e.at("dtype").get<std::string>() != "f32") {
                throw format_error("container: unsupported dtype");
            }
            entry.format = tensor_format_from_string(e.at("format").get<std::string>());
            entry.byte_offset = e.at("byte_offset").get<std::uint64_t>();
            entry.byte_length = e.at("byte_length").get<std::uint64_t>();
            manifest.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& ex) {
        throw format_error(std::string("container: malformed manifest: ") + ex.what());
    }
    return manifest;
}

void validate_manifest(const TensorManifest& manifest, std::uint64_t payload_size) {
    std::set<std::string> names;
    std::set<std::string> blocks(manifest.blocks.begin(), manifest.blocks.end());
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& e : manifest.entries) {
        if (!names.insert(e.name).second) {
            throw format_error("container: duplicate tensor name '" + e.name + "'");
        }
        if (!blocks.count(e.block)) {
            throw format_error("container: entry '" + e.name + "' uses undeclared block '" + e.block + "'");
        }
        if (e.byte_offset + e.byte_length > payload_size) {
            throw format_error("container: entry '" + e.name + "' extends past the end of the file");
        }
        spans.emplace_back(e.byte_offset, e.byte_length);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
            throw format_error("container: overlapping payload ranges");
        }
    }
}

// -------------------------------------------------------------------------
// Container assembly

struct ParsedContainer {
    std::string magic;
    TensorManifest manifest;
    std::span<const std::uint8_t> payload;
};

std::vector<std::uint8_t> build_container(const Bundle& bundle,
                                          const std::vector<TensorFormat>& formats,
                                          const std::string& magic) {
    std::set<std::string> blocks(bundle.blocks.begin(), bundle.blocks.end());
    TensorManifest manifest;
    manifest.blocks = bundle.blocks;

    std::vector<std::vector<std::uint8_t>> payloads;
    payloads.reserve(bundle.tensors.size());
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < bundle.tensors.size(); ++i) {
        const NamedTensor& t = bundle.tensors[i];
        if (!blocks.count(t.block)) {
            throw invalid_input_error("bundle: tensor '" + t.name + "' uses undeclared block '" +
                                      t.block + "'");
        }
        if (t.matrix.rows() > std::numeric_limits<std::uint32_t>::max() ||
            t.matrix.cols() > std::numeric_limits<std::uint32_t>::max()) {
            throw capacity_error("bundle: dimensions exceed the 32-bit container fields");
        }
        ManifestEntry e;
        e.name = t.name;
        e.block = t.block;
        e.kind = t.kind;
        e.rows = static_cast<std::uint32_t>(t.matrix.rows());
        e.cols = static_cast<std::uint32_t>(t.matrix.cols());
        e.format = formats[i];
        std::vector<std::uint8_t> payload;
        if (e.format == TensorFormat::Dense) {
            payload = encode_dense_payload(t.matrix);
        } else {
            payload = encode_csr_payload(dense_to_csr(t.matrix));
        }
        e.byte_offset = offset;
        e.byte_length = payload.size();
        offset += payload.size();
        manifest.entries.push_back(std::move(e));
        payloads.push_back(std::move(payload));
    }

    const std::string manifest_text = manifest_to_json(manifest).dump();
    if (manifest_text.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw capacity_error("bundle: manifest exceeds the 32-bit length field");
    }

    ByteWriter w;
    w.put_bytes(magic.data(), 4);
    w.put_u32(kFormatVersion);
    w.put_u32(static_cast<std::uint32_t>(manifest_text.size()));
    w.put_bytes(manifest_text.data(), manifest_text.size());
    for (const auto& p : payloads) w.put_bytes(p.data(), p.size());
    return std::move(w.bytes);
}

ParsedContainer parse_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12) throw format_error("container: file too short");
    ParsedContainer out;
    out.magic.assign(reinterpret_cast<const char*>(bytes.data()), 4);
    if (out.magic != "SPMX" && out.magic != "SPCR") {
        throw format_error("container: unknown magic '" + out.magic + "'");
    }
    ByteReader r{bytes};
    r.pos = 4;
    const std::uint32_t version = r.get_u32();
    if (version != kFormatVersion) {
        throw format_error("container: unsupported version " + std::to_string(version));
    }
    const std::uint32_t manifest_len = r.get_u32();
    r.require(manifest_len);
    const char* manifest_begin = reinterpret_cast<const char*>(bytes.data() + r.pos);
    json parsed;
    try {
        parsed = json::parse(manifest_begin, manifest_begin + manifest_len);
    } catch (const json::exception& ex) {
        throw format_error(std::string("container: manifest is not valid JSON: ") + ex.what());
    }
    out.manifest = manifest_from_json(parsed);
    out.payload = bytes.subspan(r.pos + manifest_len);
    validate_manifest(out.manifest, out.payload.size());
    if (out.magic == "SPMX") {
        for (const auto& e : out.manifest.entries) {
            if (e.format != TensorFormat::Dense) {
                throw format_error("container: SPMX file declares a CSR entry");
            }
        }
    }
    return out;
}

Bundle decode_bundle(const ParsedContainer& c) {
    Bundle bundle;
    bundle.blocks = c.manifest.blocks;
    for (const auto& e : c.manifest.entries) {
        NamedTensor t;
        t.name = e.name;
        t.block = e.block;
        t.kind = e.kind;
        const auto payload = c.payload.subspan(e.byte_offset, e.byte_length);
        if (e.format == TensorFormat::Dense) {
            t.matrix = decode_dense_payload(payload, e.rows, e.cols);
        } else {
            t.matrix = csr_to_dense(decode_csr_payload(payload, e.rows, e.cols));
        }
        bundle.tensors.push_back(std::move(t));
    }
    return bundle;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw format_error("read failed for '" + path.string() + "'");
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot create '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw format_error("write failed for '" + path.string() + "'");
}

std::vector<TensorFormat> pick_formats(const Bundle& bundle, std::optional<TensorFormat> force) {
    std::vector<TensorFormat> formats;
    formats.reserve(bundle.tensors.size());
    for (const auto& t : bundle.tensors) {
        if (force) {
            formats.push_back(*force);
            continue;
        }
        std::uint64_t nnz = 0;
        for (double v : t.matrix.data()) {
            if (static_cast<float>(v) != 0.0f) ++nnz;
        }
        const std::uint64_t dense = dense_size_bytes(t.matrix.rows(), t.matrix.cols());
        const std::uint64_t csr = csr_size_bytes(t.matrix.rows(), nnz);
        formats.push_back(csr < dense ? TensorFormat::Csr : TensorFormat::Dense);
    }
    return formats;
}

// -------------------------------------------------------------------------
// ZIP (single member, DEFLATE at the library default level)

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data) {
    if (data.size() > std::numeric_limits<uInt>::max()) {
        throw capacity_error("zip: input exceeds the supported size");
    }
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw error("zip: deflateInit2 failed");
    }
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(data.size())));
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const uLong produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw error("zip: deflate failed");
    out.resize(produced);
    return out;
}

std::uint32_t crc32_bytes(std::span<const std::uint8_t> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

} // namespace

std::string to_string(TensorKind k) {
    return k == TensorKind::K ? "K" : "V";
}

std::string to_string(TensorFormat f) {
    return f == TensorFormat::Dense ? "DENSE" : "CSR";
}

TensorKind tensor_kind_from_string(const std::string& s) {
    if (s == "K") return TensorKind::K;
    if (s == "V") return TensorKind::V;
    throw format_error("unknown tensor kind '" + s + "'");
}

TensorFormat tensor_format_from_string(const std::string& s) {
    if (s == "DENSE") return TensorFormat::Dense;
    if (s == "CSR") return TensorFormat::Csr;
    throw format_error("unknown tensor format '" + s + "'");
}

std::uint64_t dense_size_bytes(std::uint64_t rows, std::uint64_t cols) {
    return 4 * rows * cols;
}

std::uint64_t csr_size_bytes(std::uint64_t rows, std::uint64_t nnz) {
    return kCsrRecordHeader + 4 * (rows + 1) + 8 * nnz;
}

namespace {

// SPMX may hold only dense entries; SPCR may mix, and is used as soon as
// any entry is CSR-encoded (or when a sparse container is explicitly asked
// for, so an empty write_csr still round-trips through read_csr).
std::string magic_for(const std::vector<TensorFormat>& formats) {
    for (TensorFormat f : formats) {
        if (f == TensorFormat::Csr) return "SPCR";
    }
    return "SPMX";
}

} // namespace

void write_dense(const Bundle& bundle, const std::filesystem::path& path) {
    std::vector<TensorFormat> formats(bundle.tensors.size(), TensorFormat::Dense);
    write_file_bytes(path, build_container(bundle, formats, "SPMX"));
}

Bundle read_dense(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    ParsedContainer c = parse_container(bytes);
    if (c.magic != "SPMX") throw format_error("expected an SPMX container");
    return decode_bundle(c);
}

void write_csr(const Bundle& bundle, const std::filesystem::path& path) {
    std::vector<TensorFormat> formats(bundle.tensors.size(), TensorFormat::Csr);
    write_file_bytes(path, build_container(bundle, formats, "SPCR"));
}

Bundle read_csr(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    ParsedContainer c = parse_container(bytes);
    if (c.magic != "SPCR") throw format_error("expected an SPCR container");
    return decode_bundle(c);
}

std::vector<TensorFormat> write_auto(const Bundle& bundle, const std::filesystem::path& path,
                                     std::optional<TensorFormat> force) {
    auto formats = pick_formats(bundle, force);
    write_file_bytes(path, build_container(bundle, formats, magic_for(formats)));
    return formats;
}

Bundle read_bundle(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_bundle(parse_container(bytes));
}

std::vector<std::uint8_t> serialize_auto(const Bundle& bundle, std::optional<TensorFormat> force) {
    auto formats = pick_formats(bundle, force);
    return build_container(bundle, formats, magic_for(formats));
}

std::vector<std::uint8_t> zip_archive(std::span<const std::uint8_t> data,
                                      const std::string& member_name) {
    const auto deflated = deflate_bytes(data);
    const std::uint32_t crc = crc32_bytes(data);
    if (data.size() > std::numeric_limits<std::uint32_t>::max() ||
        deflated.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw capacity_error("zip: archive members above 4 GiB are not supported");
    }
    const auto usize = static_cast<std::uint32_t>(data.size());
    const auto csize = static_cast<std::uint32_t>(deflated.size());
    const auto name_len = static_cast<std::uint16_t>(member_name.size());
    // Fixed timestamp (1980-01-01) keeps archives byte-reproducible.
    const std::uint16_t dos_time = 0;
    const std::uint16_t dos_date = 0x0021;

    ByteWriter w;
    // Local file header.
    w.put_u32(0x04034b50);
    w.put_u16(20);        // version needed
    w.put_u16(0);         // flags
    w.put_u16(8);         // method: deflate
    w.put_u16(dos_time);
    w.put_u16(dos_date);
    w.put_u32(crc);
    w.put_u32(csize);
    w.put_u32(usize);
    w.put_u16(name_len);
    w.put_u16(0); // extra length
    w.put_bytes(member_name.data(), member_name.size());
    w.put_bytes(deflated.data(), deflated.size());

    // Central directory.
    const auto cd_offset = static_cast<std::uint32_t>(w.bytes.size());
    w.put_u32(0x02014b50);
    w.put_u16(20); // version made by
    w.put_u16(20); // version needed
    w.put_u16(0);
    w.put_u16(8);
    w.put_u16(dos_time);
    w.put_u16(dos_date);
    w.put_u32(crc);
    w.put_u32(csize);
    w.put_u32(usize);
    w.put_u16(name_len);
    w.put_u16(0); // extra
    w.put_u16(0); // comment
    w.put_u16(0); // disk number
    w.put_u16(0); // internal attrs
    w.put_u32(0); // external attrs
    w.put_u32(0); // local header offset
    w.put_bytes(member_name.data(), member_name.size());
    const auto cd_size = static_cast<std::uint32_t>(w.bytes.size()) - cd_offset;

    // End of central directory.
    w.put_u32(0x06054b50);
    w.put_u16(0);
    w.put_u16(0);
    w.put_u16(1);
    w.put_u16(1);
    w.put_u32(cd_size);
    w.put_u32(cd_offset);
    w.put_u16(0);
    return std::move(w.bytes);
}

std::uint64_t zip_archive_size(std::span<const std::uint8_t> data, const std::string& member_name) {
    return zip_archive(data, member_name).size();
}

std::uint64_t zip_compressed_size(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return zip_archive_size(bytes, path.filename().string());
}

StorageReport block_sparsity_report(const Bundle& bundle) {
    std::set<std::string> declared(bundle.blocks.begin(), bundle.blocks.end());
    StorageReport report;

    struct BlockAccum {
        std::uint64_t params = 0, zeros = 0, dense = 0, deployment = 0;
    };
    std::vector<BlockAccum> acc(bundle.blocks.size()); // indexed like bundle.blocks

    for (const auto& t : bundle.tensors) {
        if (!declared.count(t.block)) {
            throw invalid_input_error("block_sparsity_report: unknown block label '" + t.block + "'");
        }
        LayerStorage layer;
        layer.name = t.name;
        layer.block = t.block;
        layer.kind = t.kind;
        layer.rows = static_cast<std::uint32_t>(t.matrix.rows());
        layer.cols = static_cast<std::uint32_t>(t.matrix.cols());
        layer.params = t.matrix.size();
        for (double v : t.matrix.data()) {
            if (static_cast<float>(v) != 0.0f) ++layer.nnz;
        }
        layer.sparsity = layer.params == 0
                             ? 0.0
                             : static_cast<double>(layer.params - layer.nnz) /
                                   static_cast<double>(layer.params);
        layer.dense_bytes = dense_size_bytes(layer.rows, layer.cols);
        layer.csr_bytes = csr_size_bytes(layer.rows, layer.nnz);
        layer.deployment_bytes = std::min(layer.dense_bytes, layer.csr_bytes);
        layer.deployment_format =
            layer.csr_bytes < layer.dense_bytes ? TensorFormat::Csr : TensorFormat::Dense;
        layer.gain_bytes = layer.dense_bytes - layer.deployment_bytes;
        const auto payload = layer.deployment_format == TensorFormat::Dense
                                 ? encode_dense_payload(t.matrix)
                                 : encode_csr_payload(dense_to_csr(t.matrix));
        layer.zip_bytes = zip_archive_size(payload, t.name);

        const auto bi = static_cast<std::size_t>(
            std::find(bundle.blocks.begin(), bundle.blocks.end(), t.block) - bundle.blocks.begin());
        acc[bi].params += layer.params;
        acc[bi].zeros += layer.params - layer.nnz;
        acc[bi].dense += layer.dense_bytes;
        acc[bi].deployment += layer.deployment_bytes;

        report.total_params += layer.params;
        report.total_zeros += layer.params - layer.nnz;
        report.total_dense_bytes += layer.dense_bytes;
        report.total_csr_bytes += layer.csr_bytes;
        report.total_deployment_bytes += layer.deployment_bytes;
        report.layers.push_back(std::move(layer));
    }

    for (std::size_t i = 0; i < bundle.blocks.size(); ++i) {
        BlockStorage b;
        b.block = bundle.blocks[i];
        b.params = acc[i].params;
        b.zeros = acc[i].zeros;
        b.sparsity = b.params == 0 ? 0.0
                                   : static_cast<double>(b.zeros) / static_cast<double>(b.params);
        b.dense_bytes = acc[i].dense;
        b.deployment_bytes = acc[i].deployment;
        b.gain_bytes = acc[i].dense - acc[i].deployment;
        report.blocks.push_back(std::move(b));
    }

    report.global_sparsity = report.total_params == 0
                                 ? 0.0
                                 : static_cast<double>(report.total_zeros) /
                                       static_cast<double>(report.total_params);
    report.total_gain_bytes = report.total_dense_bytes - report.total_deployment_bytes;
    report.total_zip_bytes = zip_archive_size(serialize_auto(bundle), "bundle");
    return report;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace

std::string storage_report_to_json(const StorageReport& report) {
    json layers = json::array();
    for (const auto& l : report.layers) {
        layers.push_back({{"name", l.name},
                          {"block", l.block},
                          {"kind", to_string(l.kind)},
                          {"rows", l.rows},
                          {"cols", l.cols},
                          {"params", l.params},
                          {"nnz", l.nnz},
                          {"sparsity", l.sparsity},
                          {"dense_bytes", l.dense_bytes},
                          {"csr_bytes", l.csr_bytes},
                          {"deployment_bytes", l.deployment_bytes},
                          {"deployment_format", to_string(l.deployment_format)},
                          {"zip_bytes", l.zip_bytes},
                          {"gain_bytes", l.gain_bytes}});
    }
    json blocks = json::array();
    for (const auto& b : report.blocks) {
        blocks.push_back({{"block", b.block},
                          {"params", b.params},
                          {"zeros", b.zeros},
                          {"sparsity", b.sparsity},
                          {"dense_bytes", b.dense_bytes},
                          {"deployment_bytes", b.deployment_bytes},
                          {"gain_bytes", b.gain_bytes}});
    }
    json j{{"layers", layers},
           {"blocks", blocks},
           {"total_params", report.total_params},
           {"total_zeros", report.total_zeros},
           {"global_sparsity", report.global_sparsity},
           {"total_dense_bytes", report.total_dense_bytes},
           {"total_csr_bytes", report.total_csr_bytes},
           {"total_deployment_bytes", report.total_deployment_bytes},
           {"total_zip_bytes", report.total_zip_bytes},
           {"total_gain_bytes", report.total_gain_bytes}};
    return j.dump(2);
}

std::string storage_report_to_csv(const StorageReport& report) {
    std::string csv =
        "name,block,kind,rows,cols,params,nnz,sparsity,dense_bytes,csr_bytes,"
        "deployment_bytes,deployment_format,zip_bytes,gain_bytes\n";
    for (const auto& l : report.layers) {
        csv += l.name + ',' + l.block + ',' + to_string(l.kind) + ',' +
               std::to_string(l.rows) + ',' + std::to_string(l.cols) + ',' +
               std::to_string(l.params) + ',' + std::to_string(l.nnz) + ',' +
               format_double(l.sparsity) + ',' + std::to_string(l.dense_bytes) + ',' +
               std::to_string(l.csr_bytes) + ',' + std::to_string(l.deployment_bytes) + ',' +
               to_string(l.deployment_format) + ',' + std::to_string(l.zip_bytes) + ',' +
               std::to_string(l.gain_bytes) + '\n';
    }
    return csv;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw format_error("cannot create '" + path.string() + "'");
    out << text;
    if (!out) throw format_error("write failed for '" + path.string() + "'");
}

} // namespace cerase
