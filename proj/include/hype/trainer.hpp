#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hype/lorentz.hpp"
#include "hype/specificity.hpp"

namespace hype {

// Free tangent embedding tables standing in for the text/image encoders.
// alpha and temperature are learnable through log parameterizations so they
// stay positive under plain gradient steps.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::vector<double> text_params;   // text_count x dim, row-major
    std::vector<double> image_params;  // image_count x dim

    double log_alpha = 0.0;
    double log_temperature = std::log(0.07);

    std::size_t text_count() const { return dim ? text_params.size() / dim : 0; }
    std::size_t image_count() const { return dim ? image_params.size() / dim : 0; }
    double alpha() const { return std::exp(log_alpha); }
    double temperature() const { return std::exp(log_temperature); }

    const double* text_row(std::size_t i) const { return text_params.data() + i * dim; }
    const double* image_row(std::size_t i) const { return image_params.data() + i * dim; }
};

struct TrainerConfig {
    std::size_t dim = 8;
    double curvature = 1.0;
    double cone_k = 0.1;
    double lambda_entail = 1.0;
    double learning_rate = 0.02;
    std::size_t steps = 2000;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct PositivePair {
    std::uint32_t text_index = 0;
    std::uint32_t image_index = 0;
};

enum class TextLabel : std::uint8_t { generic, specific };

// Caption hierarchy: one specific caption per image, one generic caption per
// category paired with every image in it.
struct SyntheticCorpus {
    std::size_t text_count = 0;
    std::size_t image_count = 0;
    std::vector<PositivePair> pairs;
    std::vector<TextLabel> text_labels;
};

struct LossBreakdown {
    double contrastive = 0.0;
    double entailment = 0.0;
    double total = 0.0;
};

// Exp-mapped points for every table row, packed (count x (dim+1)).
struct ForwardPoints {
    std::size_t dim = 0;
    std::vector<double> text_points;
    std::vector<double> image_points;

    const double* text_point(std::size_t i) const { return text_points.data() + i * (dim + 1); }
    const double* image_point(std::size_t i) const { return image_points.data() + i * (dim + 1); }
};

ForwardPoints forward_points(const EmbeddingTable& table, Curvature curv);

// Symmetric InfoNCE over -d_L/tau logits plus the mean entailment loss of
// the positive pairs, weighted by lambda_entail.
LossBreakdown total_loss(const EmbeddingTable& table, std::span<const PositivePair> batch,
                         const TrainerConfig& config);

struct GradientTable {
    std::vector<double> text;
    std::vector<double> image;
    double log_alpha = 0.0;
    double log_temperature = 0.0;
};

// Hand-derived chain-rule gradients for every parameter. Clamped branches
// (arccosh/asin/arccos arguments, the entailment hinge) contribute the
// one-sided derivative of the active branch.
GradientTable grad_total_loss(const EmbeddingTable& table, std::span<const PositivePair> batch,
                              const TrainerConfig& config);

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::string worst_coordinate;
};

// Central differences (step 1e-5) over every parameter vs grad_total_loss.
FiniteDiffReport finite_diff_check(const EmbeddingTable& table,
                                   std::span<const PositivePair> batch,
                                   const TrainerConfig& config);

// Seeded N(0,1) tangent init sized for the corpus.
EmbeddingTable init_table(const TrainerConfig& config, const SyntheticCorpus& corpus);

struct TrainResult {
    EmbeddingTable table;
    std::vector<LossBreakdown> trace;  // pre-update loss per step
};

// Plain gradient descent; throws divergence_error when the loss leaves the
// finite range.
TrainResult train(const TrainerConfig& config, const SyntheticCorpus& corpus);

// categories x images_per_category images; requires images_per_category >= 4
// so generic captions keep at least 4 positives. The seed shuffles pair order.
SyntheticCorpus gen_synthetic_hierarchy(std::uint64_t seed, std::size_t categories,
                                        std::size_t images_per_category);

// Bridges trained embeddings into the scoring pipeline: one record per
// positive pair carrying the alpha-scaled tangents and the tangent-space
// cosine as the alignment stand-in.
std::vector<PairRecord> corpus_to_records(const EmbeddingTable& table,
                                          const SyntheticCorpus& corpus);

}  // namespace hype
