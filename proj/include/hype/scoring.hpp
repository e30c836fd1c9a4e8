#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hype/parallel.hpp"

namespace hype {

// The five score terms of one sample. cin_value is already encoded (0 or 10).
struct SampleMetrics {
    std::uint64_t id = 0;
    double eps_i = 0.0;
    double eps_t = 0.0;
    double neg_dl = 0.0;
    double clip_cos = 0.0;
    double cin_value = 0.0;
};

struct WeightVector {
    double w_eps_i = 1.0;
    double w_eps_t = 1.0;
    double w_negdl = 1.0;
    double w_cos = 1.0;
    double w_cin = 1.0;
};

// Ranked ids surviving a top-fraction cut.
struct FilterSelection {
    std::vector<std::uint64_t> ids;  // score-descending, ties by ascending id
    double fraction = 1.0;
    std::string source;
    std::vector<std::string> sources;  // inputs feeding this selection
    std::string mode = "top-fraction";
    std::size_t k = 0;
};

struct ScoreTable {
    std::vector<std::uint64_t> ids;
    std::vector<double> scores;

    std::size_t size() const { return ids.size(); }
};

// Cluster-membership term: 10 if the image belongs, 0 otherwise.
double cin_value(bool in_cluster);

double hype_score(const SampleMetrics& m, const WeightVector& w);

// Scores every record; throws data_integrity_error on duplicate ids. With
// cin_hard_gate, samples with cin_value == 0 are dropped from the table
// instead of carrying the additive term.
ScoreTable score_dataset(std::span<const SampleMetrics> metrics, const WeightVector& w,
                         const ParallelConfig& par = {}, bool cin_hard_gate = false);

// Keeps the k = max(1, floor(fraction * D)) highest-scored ids.
FilterSelection select_top_fraction(const ScoreTable& scores, double fraction,
                                    std::string source = {});

enum class CombineMode : std::uint8_t { intersect, set_union };

// Set combination; output keeps a's ranking first, then b's for ids only b
// contributes.
FilterSelection combine_selections(const FilterSelection& a, const FilterSelection& b,
                                   CombineMode mode);

struct ColumnStats {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // population
};

struct MetricStats {
    ColumnStats eps_t;
    ColumnStats eps_i;
    ColumnStats neg_dl;
    ColumnStats clip_cos;
    ColumnStats cin;
};

// Single-pass per-column mean and population standard deviation. Chunked
// Welford accumulators merged in chunk order, so results do not depend on
// the worker count.
MetricStats metric_stats(std::span<const SampleMetrics> metrics, const ParallelConfig& par = {});

// --- export formats ---------------------------------------------------------

// CSV `id,eps_i,eps_t,neg_dl,clip_cos,cin,score`, 9 significant digits.
// metrics and table must be index-aligned (as produced by score_dataset
// without the hard gate; with it, gated rows are skipped).
void write_score_csv(std::span<const SampleMetrics> metrics, const ScoreTable& table,
                     std::ostream& out);

struct ScoreRow {
    SampleMetrics metrics;
    double score = 0.0;
};

std::vector<ScoreRow> read_score_csv(std::istream& in, const std::string& path_for_errors = "");

// Newline-delimited decimal ids plus a JSON sidecar (<path>.json) with
// fraction, k, weights, sources and mode.
void write_selection(const FilterSelection& sel, const WeightVector& weights,
                     const std::string& path);

std::vector<std::uint64_t> read_selection_ids(const std::string& path);

}  // namespace hype
