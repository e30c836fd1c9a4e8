#pragma once

#include <cstdint>
#include <vector>

#include "hype/rng.hpp"
#include "hype/specificity.hpp"

namespace hype::test {

// Seeded dataset with non-contiguous ids, tangents away from the exact
// origin, and both optional fields populated.
inline std::vector<PairRecord> make_synthetic_dataset(std::uint64_t seed, std::size_t count,
                                                      std::size_t dim) {
    Rng rng(seed);
    std::vector<PairRecord> records(count);
    for (std::size_t i = 0; i < count; ++i) {
        PairRecord& rec = records[i];
        rec.id = i * 3 + 1;
        rec.text_tangent.resize(dim);
        rec.image_tangent.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            rec.text_tangent[d] = static_cast<float>(0.8 * rng.normal());
            rec.image_tangent[d] = static_cast<float>(0.8 * rng.normal());
        }
        rec.clip_cos = rng.uniform(-1.0, 1.0);
        rec.cin_flag = (rng.next_u64() & 1) != 0;
    }
    return records;
}

}  // namespace hype::test
