#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hype/parallel.hpp"
#include "hype/specificity.hpp"

namespace hype {

// Binary embedding shard, little-endian throughout:
//   magic "HYPE1" (5 bytes), version u16, dim u32, count u64, flags u32,
//   then per record: id u64, text tangent dim x f32, image tangent dim x f32,
//   clip_cos f32 if flags bit0, cin u8 if flags bit1,
//   then CRC-32C (u32) of the record region.
inline constexpr char kShardMagic[5] = {'H', 'Y', 'P', 'E', '1'};
inline constexpr std::uint16_t kShardVersion = 1;
inline constexpr std::uint32_t kFlagClipCos = 1u << 0;
inline constexpr std::uint32_t kFlagCin = 1u << 1;
inline constexpr std::size_t kShardHeaderSize = 5 + 2 + 4 + 8 + 4;

struct ShardHeader {
    std::uint16_t version = kShardVersion;
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::uint32_t flags = kFlagClipCos | kFlagCin;

    std::size_t record_size() const {
        return 8 + 2 * std::size_t(dim) * 4 + ((flags & kFlagClipCos) ? 4 : 0) +
               ((flags & kFlagCin) ? 1 : 0);
    }
};

// Returns the number of records written.
std::uint64_t write_shard(std::span<const PairRecord> records, const std::string& path,
                          std::uint32_t dim, std::uint32_t flags = kFlagClipCos | kFlagCin);

// Validates magic, version, structural sizes and the payload checksum up
// front, then decodes records on demand in on-disk order.
class ShardReader {
public:
    explicit ShardReader(const std::string& path);

    const ShardHeader& header() const { return header_; }
    std::uint32_t payload_crc() const { return payload_crc_; }

    // False once the shard is exhausted. Missing optional fields default to
    // clip_cos = 0 / cin = false; the first such record emits a warning on
    // stderr because downstream scoring needs all five terms.
    bool next(PairRecord& out);

private:
    std::string path_;
    ShardHeader header_;
    std::vector<char> payload_;
    std::size_t cursor_ = 0;
    std::uint64_t remaining_ = 0;
    std::uint32_t payload_crc_ = 0;
    bool warned_missing_ = false;
};

std::vector<PairRecord> read_shard(const std::string& path);

// Manifest JSON: shard paths with per-shard count and payload CRC, the
// shared dim and the total count.
struct ManifestShard {
    std::string path;
    std::uint64_t count = 0;
    std::uint32_t crc32c = 0;
};

struct Manifest {
    std::uint32_t dim = 0;
    std::uint64_t total_count = 0;
    std::string created;
    std::vector<ManifestShard> shards;
};

Manifest manifest_for_shards(std::span<const std::string> shard_paths);
void write_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

// Loads a single shard or, for a .json path, every shard of a manifest
// (parallel across shards, concatenated in manifest order).
std::vector<PairRecord> load_dataset(const std::string& path, const ParallelConfig& par = {});

// Reference-set archive: magic "HYPR1", version u16, dim u32, m u64,
// n_aligned u64, then per modality (images first): m ids u64 and
// m x (dim+1) point coordinates as f32, then CRC-32C of the payload.
void write_reference_sets(const ReferenceSets& refs, const std::string& path);
ReferenceSets read_reference_sets(const std::string& path);

}  // namespace hype
