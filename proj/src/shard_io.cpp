#include "hype/shard_io.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "hype/crc32c.hpp"
#include "hype/errors.hpp"

namespace hype {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(const char* p) {
    auto b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(const char* p) {
    auto b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    auto b = reinterpret_cast<const unsigned char*>(p);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

float get_f32(const char* p) { return std::bit_cast<float>(get_u32(p)); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw std::runtime_error("read failed for " + path);
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::uint64_t write_shard(std::span<const PairRecord> records, const std::string& path,
                          std::uint32_t dim, std::uint32_t flags) {
    if (dim < 1) throw std::invalid_argument("write_shard: dim must be >= 1");
    if (flags & ~(kFlagClipCos | kFlagCin))
        throw std::invalid_argument("write_shard: unknown flag bits");

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(records.size() * 2);

    ShardHeader header;
    header.dim = dim;
    header.count = records.size();
    header.flags = flags;

    std::string bytes;
    bytes.reserve(kShardHeaderSize + records.size() * header.record_size() + 4);
    bytes.append(kShardMagic, sizeof(kShardMagic));
    put_u16(bytes, header.version);
    put_u32(bytes, header.dim);
    put_u64(bytes, header.count);
    put_u32(bytes, header.flags);

    for (const PairRecord& rec : records) {
        if (rec.text_tangent.size() != dim || rec.image_tangent.size() != dim)
            throw std::invalid_argument("write_shard: record " + std::to_string(rec.id) +
                                        " dimension mismatch");
        if (!seen.insert(rec.id).second)
            throw std::invalid_argument("write_shard: duplicate id " + std::to_string(rec.id));
        put_u64(bytes, rec.id);
        for (float v : rec.text_tangent) put_f32(bytes, v);
        for (float v : rec.image_tangent) put_f32(bytes, v);
        if (flags & kFlagClipCos) put_f32(bytes, static_cast<float>(rec.clip_cos));
        if (flags & kFlagCin) bytes.push_back(rec.cin_flag ? '\x01' : '\x00');
    }

    std::uint32_t crc = crc32c(bytes.data() + kShardHeaderSize, bytes.size() - kShardHeaderSize);
    put_u32(bytes, crc);
    write_file(path, bytes);
    return records.size();
}

ShardReader::ShardReader(const std::string& path) : path_(path) {
    std::string bytes = read_file(path);
    if (bytes.size() < kShardHeaderSize)
        throw truncation_error(path_, bytes.size(), "file shorter than the shard header");
    if (std::memcmp(bytes.data(), kShardMagic, sizeof(kShardMagic)) != 0)
        throw magic_error(path_, 0, "bad magic");
    header_.version = get_u16(bytes.data() + 5);
    if (header_.version != kShardVersion)
        throw version_error(path_, 5,
                            "unsupported shard version " + std::to_string(header_.version));
    header_.dim = get_u32(bytes.data() + 7);
    header_.count = get_u64(bytes.data() + 11);
    header_.flags = get_u32(bytes.data() + 19);
    if (header_.dim < 1) throw format_error(path_, 7, "dim must be >= 1");
    if (header_.flags & ~(kFlagClipCos | kFlagCin))
        throw format_error(path_, 19, "unknown flag bits");

    if (header_.count > (bytes.size() - kShardHeaderSize) / header_.record_size())
        throw truncation_error(path_, 11, "header count does not fit in the file");
    std::size_t payload_size = header_.count * header_.record_size();
    std::size_t expected = kShardHeaderSize + payload_size + 4;
    if (bytes.size() < expected)
        throw truncation_error(path_, bytes.size(),
                               "record region truncated, expected " + std::to_string(expected) +
                                   " bytes");
    if (bytes.size() > expected)
        throw format_error(path_, expected, "trailing bytes after checksum");

    std::uint32_t stored = get_u32(bytes.data() + kShardHeaderSize + payload_size);
    std::uint32_t actual = crc32c(bytes.data() + kShardHeaderSize, payload_size);
    if (stored != actual)
        throw checksum_error(path_, kShardHeaderSize + payload_size,
                             "payload CRC-32C mismatch");
    payload_crc_ = actual;

    payload_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kShardHeaderSize),
                    bytes.begin() + static_cast<std::ptrdiff_t>(kShardHeaderSize + payload_size));
    remaining_ = header_.count;
}

bool ShardReader::next(PairRecord& out) {
    if (remaining_ == 0) return false;
    const char* p = payload_.data() + cursor_;
    out.id = get_u64(p);
    p += 8;
    out.text_tangent.resize(header_.dim);
    for (std::uint32_t d = 0; d < header_.dim; ++d, p += 4) out.text_tangent[d] = get_f32(p);
    out.image_tangent.resize(header_.dim);
    for (std::uint32_t d = 0; d < header_.dim; ++d, p += 4) out.image_tangent[d] = get_f32(p);
    if (header_.flags & kFlagClipCos) {
        out.clip_cos = get_f32(p);
        p += 4;
    } else {
        out.clip_cos = 0.0;
    }
    if (header_.flags & kFlagCin) {
        out.cin_flag = *p != '\x00';
        p += 1;
    } else {
        out.cin_flag = false;
    }
    if (!warned_missing_ && (header_.flags & (kFlagClipCos | kFlagCin)) !=
                                (kFlagClipCos | kFlagCin)) {
        std::cerr << "warning: " << path_
                  << " lacks stored clip_cos and/or cin; defaulting to 0/false. Scores computed"
                     " from this shard are missing those terms.\n";
        warned_missing_ = true;
    }
    cursor_ = static_cast<std::size_t>(p - payload_.data());
    --remaining_;
    return true;
}

std::vector<PairRecord> read_shard(const std::string& path) {
    ShardReader reader(path);
    std::vector<PairRecord> records;
    records.reserve(static_cast<std::size_t>(reader.header().count));
    PairRecord rec;
    while (reader.next(rec)) records.push_back(rec);
    return records;
}

Manifest manifest_for_shards(std::span<const std::string> shard_paths) {
    Manifest manifest;
    manifest.created = iso_timestamp();
    for (const std::string& path : shard_paths) {
        ShardReader reader(path);
        if (manifest.shards.empty()) {
            manifest.dim = reader.header().dim;
        } else if (reader.header().dim != manifest.dim) {
            throw format_error(path, 7, "shard dim differs from the manifest dim");
        }
        manifest.shards.push_back({path, reader.header().count, reader.payload_crc()});
        manifest.total_count += reader.header().count;
    }
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    nlohmann::json shards = nlohmann::json::array();
    for (const ManifestShard& s : manifest.shards)
        shards.push_back({{"path", s.path}, {"count", s.count}, {"crc32c", s.crc32c}});
    nlohmann::json doc{{"dim", manifest.dim},
                       {"total_count", manifest.total_count},
                       {"created", manifest.created},
                       {"shards", shards}};
    write_file(path, doc.dump(2) + "\n");
}

Manifest load_manifest(const std::string& path) {
    std::string bytes = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path, 0, std::string("manifest is not valid JSON: ") + e.what());
    }
    Manifest manifest;
    try {
        manifest.dim = doc.at("dim").get<std::uint32_t>();
        manifest.total_count = doc.at("total_count").get<std::uint64_t>();
        manifest.created = doc.value("created", "");
        for (const auto& s : doc.at("shards")) {
            manifest.shards.push_back({s.at("path").get<std::string>(),
                                       s.at("count").get<std::uint64_t>(),
                                       s.at("crc32c").get<std::uint32_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path, 0, std::string("manifest missing fields: ") + e.what());
    }
    std::uint64_t sum = 0;
    for (const ManifestShard& s : manifest.shards) sum += s.count;
    if (sum != manifest.total_count)
        throw format_error(path, 0, "manifest total_count does not match the shard counts");
    return manifest;
}

std::vector<PairRecord> load_dataset(const std::string& path, const ParallelConfig& par) {
    if (path.size() < 5 || path.substr(path.size() - 5) != ".json") return read_shard(path);

    Manifest manifest = load_manifest(path);
    std::vector<std::vector<PairRecord>> per_shard(manifest.shards.size());
    for_each_chunk(manifest.shards.size(), ParallelConfig{par.threads, 1},
                   [&](std::size_t, std::size_t begin, std::size_t end) {
                       for (std::size_t i = begin; i < end; ++i) {
                           ShardReader reader(manifest.shards[i].path);
                           if (reader.header().count != manifest.shards[i].count)
                               throw format_error(manifest.shards[i].path, 11,
                                                  "shard count does not match the manifest");
                           if (reader.payload_crc() != manifest.shards[i].crc32c)
                               throw checksum_error(manifest.shards[i].path, 0,
                                                    "shard CRC does not match the manifest");
                           if (reader.header().dim != manifest.dim)
                               throw format_error(manifest.shards[i].path, 7,
                                                  "shard dim does not match the manifest");
                           PairRecord rec;
                           while (reader.next(rec)) per_shard[i].push_back(rec);
                       }
                   });

    std::vector<PairRecord> all;
    all.reserve(manifest.total_count);
    for (auto& shard_records : per_shard)
        for (auto& rec : shard_records) all.push_back(std::move(rec));
    return all;
}

namespace {

constexpr char kRefMagic[5] = {'H', 'Y', 'P', 'R', '1'};
constexpr std::uint16_t kRefVersion = 1;
constexpr std::size_t kRefHeaderSize = 5 + 2 + 4 + 8 + 8;

void append_reference_block(std::string& bytes, const ReferenceSet& set) {
    for (std::uint64_t id : set.source_ids) put_u64(bytes, id);
    for (double v : set.points) put_f32(bytes, static_cast<float>(v));
}

void read_reference_block(const char* p, std::size_t m, std::size_t dim, Modality modality,
                          std::size_t n_aligned, ReferenceSet& out) {
    out.modality = modality;
    out.dim = dim;
    out.n_aligned = n_aligned;
    out.source_ids.resize(m);
    for (std::size_t i = 0; i < m; ++i, p += 8) out.source_ids[i] = get_u64(p);
    out.points.resize(m * (dim + 1));
    for (std::size_t i = 0; i < out.points.size(); ++i, p += 4) out.points[i] = get_f32(p);
}

}  // namespace

void write_reference_sets(const ReferenceSets& refs, const std::string& path) {
    if (refs.images.size() != refs.texts.size())
        throw std::invalid_argument("write_reference_sets: modality sizes differ");
    if (refs.images.dim != refs.texts.dim)
        throw std::invalid_argument("write_reference_sets: modality dims differ");

    std::string bytes;
    bytes.append(kRefMagic, sizeof(kRefMagic));
    put_u16(bytes, kRefVersion);
    put_u32(bytes, static_cast<std::uint32_t>(refs.images.dim));
    put_u64(bytes, refs.images.size());
    put_u64(bytes, refs.images.n_aligned);
    append_reference_block(bytes, refs.images);
    append_reference_block(bytes, refs.texts);
    std::uint32_t crc = crc32c(bytes.data() + kRefHeaderSize, bytes.size() - kRefHeaderSize);
    put_u32(bytes, crc);
    write_file(path, bytes);
}

ReferenceSets read_reference_sets(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < kRefHeaderSize)
        throw truncation_error(path, bytes.size(), "file shorter than the reference-set header");
    if (std::memcmp(bytes.data(), kRefMagic, sizeof(kRefMagic)) != 0)
        throw magic_error(path, 0, "bad magic");
    std::uint16_t version = get_u16(bytes.data() + 5);
    if (version != kRefVersion)
        throw version_error(path, 5, "unsupported reference-set version");
    std::size_t dim = get_u32(bytes.data() + 7);
    std::size_t m = get_u64(bytes.data() + 11);
    std::size_t n_aligned = get_u64(bytes.data() + 19);

    std::size_t block = m * 8 + m * (dim + 1) * 4;
    std::size_t expected = kRefHeaderSize + 2 * block + 4;
    if (bytes.size() < expected)
        throw truncation_error(path, bytes.size(), "reference blocks truncated");
    if (bytes.size() > expected) throw format_error(path, expected, "trailing bytes");
    std::uint32_t stored = get_u32(bytes.data() + expected - 4);
    std::uint32_t actual = crc32c(bytes.data() + kRefHeaderSize, 2 * block);
    if (stored != actual) throw checksum_error(path, expected - 4, "payload CRC-32C mismatch");

    ReferenceSets refs;
    read_reference_block(bytes.data() + kRefHeaderSize, m, dim, Modality::image, n_aligned,
                         refs.images);
    read_reference_block(bytes.data() + kRefHeaderSize + block, m, dim, Modality::text, n_aligned,
                         refs.texts);
    return refs;
}

}  // namespace hype
