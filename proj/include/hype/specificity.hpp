#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hype/lorentz.hpp"
#include "hype/parallel.hpp"

namespace hype {

enum class Modality : std::uint8_t { text, image };

// One dataset sample. Tangent embeddings are encoder outputs before the
// exponential map; geometry is computed in double at use time.
struct PairRecord {
    std::uint64_t id = 0;
    std::vector<float> text_tangent;
    std::vector<float> image_tangent;
    double clip_cos = 0.0;
    bool cin_flag = false;
};

// M hyperboloid points of one modality, ranked by descending average
// entailment loss against the aligned probe subset (ties by ascending id).
struct ReferenceSet {
    Modality modality = Modality::image;
    std::size_t dim = 0;
    std::size_t n_aligned = 0;  // N used to pick the probe subset
    std::vector<std::uint64_t> source_ids;
    std::vector<double> points;  // size() x (dim+1), packed, time last

    std::size_t size() const { return source_ids.size(); }
    const double* point(std::size_t i) const { return points.data() + i * (dim + 1); }
};

struct ReferenceSets {
    ReferenceSet images;  // S_i
    ReferenceSet texts;   // S_t
};

struct SpecificityResult {
    std::uint64_t id = 0;
    double eps_t = 0.0;
    double eps_i = 0.0;
};

// The n records with the highest clip_cos, ties by ascending id, returned
// in that rank order.
std::vector<PairRecord> top_aligned_subset(std::span<const PairRecord> dataset, std::size_t n);

// Mean entailment loss of the candidate against the opposite modality of
// every subset record, in subset order.
double avg_entailment_vs_subset(const LorentzPoint& candidate, Modality candidate_modality,
                                std::span<const PairRecord> subset, Curvature curv,
                                ConeParams cone);

// Probe with the top-n aligned subset, rank every sample of each modality by
// average loss, keep the top m per modality as S_i / S_t.
ReferenceSets build_reference_sets(std::span<const PairRecord> dataset, std::size_t n,
                                   std::size_t m, Curvature curv, ConeParams cone,
                                   const ParallelConfig& par = {});

// eps_t: mean loss of the text within each reference image's pairing;
// requires s_i.modality == image.
double epsilon_text(const LorentzPoint& text, const ReferenceSet& s_i, Curvature curv,
                    ConeParams cone);

// eps_i: mean loss of each reference text against the image; requires
// s_t.modality == text.
double epsilon_image(const LorentzPoint& image, const ReferenceSet& s_t, Curvature curv,
                     ConeParams cone);

// Per-sample eps values for the whole dataset, chunk-parallel with a fixed
// per-candidate reduction order; output order matches the dataset.
std::vector<SpecificityResult> specificity_for_dataset(std::span<const PairRecord> dataset,
                                                       const ReferenceSets& refs, Curvature curv,
                                                       ConeParams cone,
                                                       const ParallelConfig& par = {});

struct ConvergencePoint {
    std::size_t count = 0;
    double running_mean = 0.0;
    double standard_error = 0.0;
};

// Running mean and standard error after every prefix of the stream.
std::vector<ConvergencePoint> convergence_diagnostic(std::span<const double> values);

// Exhaustive single-threaded reimplementation over the full DxD loss
// matrix; the oracle the chunked pipeline is validated against. Refuses
// datasets larger than 256 records.
std::vector<SpecificityResult> brute_force_specificity(std::span<const PairRecord> dataset,
                                                       std::size_t n, std::size_t m,
                                                       Curvature curv, ConeParams cone);

}  // namespace hype
