#include "hype/pipeline.hpp"

#include <stdexcept>

namespace hype {

std::vector<SampleMetrics> compute_sample_metrics(std::span<const PairRecord> dataset,
                                                  const ReferenceSets& refs, Curvature curv,
                                                  ConeParams cone, const ParallelConfig& par) {
    std::vector<SpecificityResult> eps = specificity_for_dataset(dataset, refs, curv, cone, par);

    std::vector<SampleMetrics> metrics(dataset.size());
    std::size_t dim = refs.images.dim;
    for_each_chunk(dataset.size(), par, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> tangent(dim);
        std::vector<double> text_point(dim + 1);
        std::vector<double> image_point(dim + 1);
        for (std::size_t i = begin; i < end; ++i) {
            const PairRecord& rec = dataset[i];
            for (std::size_t d = 0; d < dim; ++d) tangent[d] = rec.text_tangent[d];
            exp_map_origin_packed(tangent.data(), dim, curv.c, text_point.data());
            for (std::size_t d = 0; d < dim; ++d) tangent[d] = rec.image_tangent[d];
            exp_map_origin_packed(tangent.data(), dim, curv.c, image_point.data());

            metrics[i].id = rec.id;
            metrics[i].eps_t = eps[i].eps_t;
            metrics[i].eps_i = eps[i].eps_i;
            metrics[i].neg_dl =
                neg_distance_packed(text_point.data(), image_point.data(), dim, curv.c);
            metrics[i].clip_cos = rec.clip_cos;
            metrics[i].cin_value = cin_value(rec.cin_flag);
        }
    });
    return metrics;
}

}  // namespace hype
