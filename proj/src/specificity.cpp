#include "hype/specificity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hype/errors.hpp"

namespace hype {

namespace {

// Packed (count x (dim+1)) matrix of exp-mapped points.
struct PointBlock {
    std::size_t dim = 0;
    std::vector<double> data;

    const double* point(std::size_t i) const { return data.data() + i * (dim + 1); }
    std::size_t size() const { return dim ? data.size() / (dim + 1) : 0; }
};

PointBlock exp_map_block(std::span<const PairRecord> records, Modality modality, Curvature curv) {
    PointBlock block;
    if (records.empty()) return block;
    block.dim = (modality == Modality::text ? records[0].text_tangent : records[0].image_tangent)
                    .size();
    std::size_t stride = block.dim + 1;
    block.data.resize(records.size() * stride);
    std::vector<double> tangent(block.dim);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& src =
            modality == Modality::text ? records[i].text_tangent : records[i].image_tangent;
        if (src.size() != block.dim)
            throw std::invalid_argument("dataset: embeddings do not share one dimension");
        for (std::size_t d = 0; d < block.dim; ++d) tangent[d] = src[d];
        exp_map_origin_packed(tangent.data(), block.dim, curv.c, block.data.data() + i * stride);
    }
    return block;
}

std::vector<double> apertures_of(const PointBlock& texts, Curvature curv, ConeParams cone) {
    std::vector<double> apertures(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i)
        apertures[i] = half_aperture_packed(texts.point(i), texts.dim, curv.c, cone.k);
    return apertures;
}

// Mean loss of one text point against every image of the block, in block order.
double mean_loss_text_vs_images(const double* text, double text_aperture, const PointBlock& images,
                                double c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < images.size(); ++j)
        sum += entailment_loss_packed(text, images.point(j), images.dim, c, text_aperture);
    return sum / static_cast<double>(images.size());
}

// Mean loss of every text of the block against one image point, in block order.
double mean_loss_texts_vs_image(const PointBlock& texts, std::span<const double> text_apertures,
                                const double* image, double c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < texts.size(); ++j)
        sum += entailment_loss_packed(texts.point(j), image, texts.dim, c, text_apertures[j]);
    return sum / static_cast<double>(texts.size());
}

// Indices of the m highest values, ties by ascending id; returned in rank order.
std::vector<std::size_t> top_m_by_value(std::span<const double> values,
                                        std::span<const PairRecord> dataset, std::size_t m) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return dataset[a].id < dataset[b].id;
    });
    order.resize(m);
    return order;
}

ReferenceSet make_reference_set(Modality modality, std::span<const PairRecord> dataset,
                                const PointBlock& points, std::span<const std::size_t> ranked,
                                std::size_t n_aligned) {
    ReferenceSet set;
    set.modality = modality;
    set.dim = points.dim;
    set.n_aligned = n_aligned;
    std::size_t stride = points.dim + 1;
    set.source_ids.reserve(ranked.size());
    set.points.reserve(ranked.size() * stride);
    for (std::size_t idx : ranked) {
        set.source_ids.push_back(dataset[idx].id);
        const double* p = points.point(idx);
        set.points.insert(set.points.end(), p, p + stride);
    }
    return set;
}

}  // namespace

std::vector<PairRecord> top_aligned_subset(std::span<const PairRecord> dataset, std::size_t n) {
    if (n < 1) throw std::invalid_argument("top_aligned_subset: n must be >= 1");
    if (n > dataset.size())
        throw std::invalid_argument("top_aligned_subset: n exceeds dataset size (" +
                                    std::to_string(n) + " > " + std::to_string(dataset.size()) +
                                    ")");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dataset[a].clip_cos != dataset[b].clip_cos)
            return dataset[a].clip_cos > dataset[b].clip_cos;
        return dataset[a].id < dataset[b].id;
    });
    std::vector<PairRecord> subset;
    subset.reserve(n);
    for (std::size_t i = 0; i < n; ++i) subset.push_back(dataset[order[i]]);
    return subset;
}

double avg_entailment_vs_subset(const LorentzPoint& candidate, Modality candidate_modality,
                                std::span<const PairRecord> subset, Curvature curv,
                                ConeParams cone) {
    if (subset.empty()) throw std::invalid_argument("avg_entailment_vs_subset: empty subset");
    if (candidate_modality == Modality::text) {
        PointBlock images = exp_map_block(subset, Modality::image, curv);
        double aperture = half_aperture_packed(candidate.coords.data(), candidate.dim(), curv.c,
                                               cone.k);
        return mean_loss_text_vs_images(candidate.coords.data(), aperture, images, curv.c);
    }
    PointBlock texts = exp_map_block(subset, Modality::text, curv);
    std::vector<double> apertures = apertures_of(texts, curv, cone);
    return mean_loss_texts_vs_image(texts, apertures, candidate.coords.data(), curv.c);
}

ReferenceSets build_reference_sets(std::span<const PairRecord> dataset, std::size_t n,
                                   std::size_t m, Curvature curv, ConeParams cone,
                                   const ParallelConfig& par) {
    if (m > dataset.size())
        throw std::invalid_argument("build_reference_sets: m exceeds dataset size");
    if (m < 1) throw std::invalid_argument("build_reference_sets: m must be >= 1");
    std::vector<PairRecord> probe = top_aligned_subset(dataset, n);

    PointBlock probe_texts = exp_map_block(probe, Modality::text, curv);
    PointBlock probe_images = exp_map_block(probe, Modality::image, curv);
    std::vector<double> probe_text_apertures = apertures_of(probe_texts, curv, cone);

    PointBlock all_texts = exp_map_block(dataset, Modality::text, curv);
    PointBlock all_images = exp_map_block(dataset, Modality::image, curv);
    std::vector<double> all_text_apertures = apertures_of(all_texts, curv, cone);

    // Average loss of every candidate against the probe subset; candidates
    // are chunk-parallel, the probe reduction order is fixed.
    std::vector<double> text_avg(dataset.size());
    std::vector<double> image_avg(dataset.size());
    for_each_chunk(dataset.size(), par, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            text_avg[i] = mean_loss_text_vs_images(all_texts.point(i), all_text_apertures[i],
                                                   probe_images, curv.c);
            image_avg[i] =
                mean_loss_texts_vs_image(probe_texts, probe_text_apertures, all_images.point(i),
                                         curv.c);
        }
    });

    std::vector<std::size_t> top_images = top_m_by_value(image_avg, dataset, m);
    std::vector<std::size_t> top_texts = top_m_by_value(text_avg, dataset, m);

    ReferenceSets refs;
    refs.images = make_reference_set(Modality::image, dataset, all_images, top_images, n);
    refs.texts = make_reference_set(Modality::text, dataset, all_texts, top_texts, n);
    return refs;
}

namespace {

double eps_text_packed(const double* text, std::size_t dim, const ReferenceSet& s_i, double c,
                       double text_aperture) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s_i.size(); ++j)
        sum += entailment_loss_packed(text, s_i.point(j), dim, c, text_aperture);
    return sum / static_cast<double>(s_i.size());
}

double eps_image_packed(const double* image, std::size_t dim, const ReferenceSet& s_t,
                        std::span<const double> ref_apertures, double c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s_t.size(); ++j)
        sum += entailment_loss_packed(s_t.point(j), image, dim, c, ref_apertures[j]);
    return sum / static_cast<double>(s_t.size());
}

std::vector<double> reference_apertures(const ReferenceSet& s_t, Curvature curv, ConeParams cone) {
    std::vector<double> apertures(s_t.size());
    for (std::size_t j = 0; j < s_t.size(); ++j)
        apertures[j] = half_aperture_packed(s_t.point(j), s_t.dim, curv.c, cone.k);
    return apertures;
}

}  // namespace

double epsilon_text(const LorentzPoint& text, const ReferenceSet& s_i, Curvature curv,
                    ConeParams cone) {
    if (s_i.size() == 0) throw std::invalid_argument("epsilon_text: empty reference set");
    if (s_i.modality != Modality::image)
        throw std::invalid_argument("epsilon_text: reference set must hold images");
    if (text.dim() != s_i.dim) throw std::invalid_argument("epsilon_text: dimension mismatch");
    double aperture = half_aperture_packed(text.coords.data(), text.dim(), curv.c, cone.k);
    return eps_text_packed(text.coords.data(), text.dim(), s_i, curv.c, aperture);
}

double epsilon_image(const LorentzPoint& image, const ReferenceSet& s_t, Curvature curv,
                     ConeParams cone) {
    if (s_t.size() == 0) throw std::invalid_argument("epsilon_image: empty reference set");
    if (s_t.modality != Modality::text)
        throw std::invalid_argument("epsilon_image: reference set must hold texts");
    if (image.dim() != s_t.dim) throw std::invalid_argument("epsilon_image: dimension mismatch");
    std::vector<double> apertures = reference_apertures(s_t, curv, cone);
    return eps_image_packed(image.coords.data(), image.dim(), s_t, apertures, curv.c);
}

std::vector<SpecificityResult> specificity_for_dataset(std::span<const PairRecord> dataset,
                                                       const ReferenceSets& refs, Curvature curv,
                                                       ConeParams cone, const ParallelConfig& par) {
    if (refs.images.size() == 0 || refs.texts.size() == 0)
        throw std::invalid_argument("specificity_for_dataset: empty reference set");
    std::vector<double> ref_text_apertures = reference_apertures(refs.texts, curv, cone);
    std::vector<SpecificityResult> results(dataset.size());
    std::size_t dim = refs.images.dim;
    std::size_t stride = dim + 1;

    for_each_chunk(dataset.size(), par, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> tangent(dim);
        std::vector<double> text_point(stride);
        std::vector<double> image_point(stride);
        for (std::size_t i = begin; i < end; ++i) {
            const PairRecord& rec = dataset[i];
            if (rec.text_tangent.size() != dim || rec.image_tangent.size() != dim)
                throw std::invalid_argument(
                    "specificity_for_dataset: record dimension does not match reference set");
            for (std::size_t d = 0; d < dim; ++d) tangent[d] = rec.text_tangent[d];
            exp_map_origin_packed(tangent.data(), dim, curv.c, text_point.data());
            for (std::size_t d = 0; d < dim; ++d) tangent[d] = rec.image_tangent[d];
            exp_map_origin_packed(tangent.data(), dim, curv.c, image_point.data());

            double aperture = half_aperture_packed(text_point.data(), dim, curv.c, cone.k);
            results[i].id = rec.id;
            results[i].eps_t = eps_text_packed(text_point.data(), dim, refs.images, curv.c,
                                               aperture);
            results[i].eps_i = eps_image_packed(image_point.data(), dim, refs.texts,
                                                ref_text_apertures, curv.c);
        }
    });
    return results;
}

std::vector<ConvergencePoint> convergence_diagnostic(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("convergence_diagnostic: empty stream");
    std::vector<ConvergencePoint> trace;
    trace.reserve(values.size());
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double count = static_cast<double>(i + 1);
        double delta = values[i] - mean;
        mean += delta / count;
        m2 += delta * (values[i] - mean);
        double stderr_ = 0.0;
        if (i >= 1) {
            double sample_var = m2 / static_cast<double>(i);  // n - 1
            stderr_ = std::sqrt(std::max(sample_var, 0.0) / count);
        }
        trace.push_back({i + 1, mean, stderr_});
    }
    return trace;
}

std::vector<SpecificityResult> brute_force_specificity(std::span<const PairRecord> dataset,
                                                       std::size_t n, std::size_t m,
                                                       Curvature curv, ConeParams cone) {
    constexpr std::size_t kMaxBruteForce = 256;
    if (dataset.size() > kMaxBruteForce)
        throw std::invalid_argument("brute_force_specificity: dataset exceeds " +
                                    std::to_string(kMaxBruteForce) + " records");
    if (n < 1 || n > dataset.size() || m < 1 || m > dataset.size())
        throw std::invalid_argument("brute_force_specificity: n and m must be in [1, D]");

    const std::size_t count = dataset.size();
    const std::size_t dim = dataset[0].text_tangent.size();
    const std::size_t stride = dim + 1;

    // Exp-map every embedding.
    std::vector<std::vector<double>> texts(count), images(count);
    std::vector<double> apertures(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> t(dataset[i].text_tangent.begin(), dataset[i].text_tangent.end());
        std::vector<double> y(dataset[i].image_tangent.begin(), dataset[i].image_tangent.end());
        texts[i].resize(stride);
        images[i].resize(stride);
        exp_map_origin_packed(t.data(), dim, curv.c, texts[i].data());
        exp_map_origin_packed(y.data(), dim, curv.c, images[i].data());
        apertures[i] = half_aperture_packed(texts[i].data(), dim, curv.c, cone.k);
    }

    // Full D x D loss matrix, loss[t][y] = L_e(text_t, image_y).
    std::vector<std::vector<double>> loss(count, std::vector<double>(count));
    for (std::size_t t = 0; t < count; ++t)
        for (std::size_t y = 0; y < count; ++y)
            loss[t][y] = entailment_loss_packed(texts[t].data(), images[y].data(), dim, curv.c,
                                                apertures[t]);

    // Probe subset: top n by clip_cos, ties ascending id.
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dataset[a].clip_cos != dataset[b].clip_cos)
            return dataset[a].clip_cos > dataset[b].clip_cos;
        return dataset[a].id < dataset[b].id;
    });
    order.resize(n);

    // Average loss of each candidate against the probe subset.
    std::vector<double> text_avg(count, 0.0), image_avg(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        double ts = 0.0, is = 0.0;
        for (std::size_t p : order) {
            ts += loss[i][p];
            is += loss[p][i];
        }
        text_avg[i] = ts / static_cast<double>(n);
        image_avg[i] = is / static_cast<double>(n);
    }

    auto rank_top_m = [&](const std::vector<double>& avg) {
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (avg[a] != avg[b]) return avg[a] > avg[b];
            return dataset[a].id < dataset[b].id;
        });
        idx.resize(m);
        return idx;
    };
    std::vector<std::size_t> s_i = rank_top_m(image_avg);  // reference images
    std::vector<std::size_t> s_t = rank_top_m(text_avg);   // reference texts

    std::vector<SpecificityResult> results(count);
    for (std::size_t i = 0; i < count; ++i) {
        double et = 0.0;
        for (std::size_t r : s_i) et += loss[i][r];
        double ei = 0.0;
        for (std::size_t r : s_t) ei += loss[r][i];
        results[i] = {dataset[i].id, et / static_cast<double>(m), ei / static_cast<double>(m)};
    }
    return results;
}

}  // namespace hype
