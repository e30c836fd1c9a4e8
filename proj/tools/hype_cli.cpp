// Command-line front end for the scoring pipeline:
//   stats -> refset -> specificity -> score -> filter -> histogram
// plus the toy trainer and the selfcheck suites.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hype/errors.hpp"
#include "hype/histogram.hpp"
#include "hype/pipeline.hpp"
#include "hype/scoring.hpp"
#include "hype/selfcheck.hpp"
#include "hype/shard_io.hpp"
#include "hype/trainer.hpp"

namespace {

struct CommonOptions {
    unsigned threads = 0;
    std::size_t chunk_size = 1024;
    double curvature = 1.0;
    double k_aperture = 0.1;

    hype::ParallelConfig parallel() const { return {threads, chunk_size}; }
    hype::Curvature curv() const { return hype::Curvature(curvature); }
    hype::ConeParams cone() const { return hype::ConeParams(k_aperture); }
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_geometry = true) {
    cmd->add_option("--threads", opts.threads, "Worker threads (0 = hardware)")
        ->envname("HYPE_THREADS");
    cmd->add_option("--chunk-size", opts.chunk_size, "Items per work chunk")
        ->check(CLI::PositiveNumber);
    if (with_geometry) {
        cmd->add_option("--curvature", opts.curvature, "Curvature magnitude c (manifold has -c)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--k-aperture", opts.k_aperture, "Entailment cone half-aperture constant")
            ->check(CLI::PositiveNumber);
    }
}

void add_weights(CLI::App* cmd, hype::WeightVector& w) {
    cmd->add_option("--w-eps-i", w.w_eps_i, "Weight of image specificity");
    cmd->add_option("--w-eps-t", w.w_eps_t, "Weight of text specificity");
    cmd->add_option("--w-negdl", w.w_negdl, "Weight of the negative Lorentzian distance");
    cmd->add_option("--w-cos", w.w_cos, "Weight of the CLIP cosine");
    cmd->add_option("--w-cin", w.w_cin, "Weight of the cluster-membership term");
}

hype::ReferenceSets clamped_reference_sets(const std::vector<hype::PairRecord>& records,
                                           std::size_t n, std::size_t m,
                                           const CommonOptions& opts) {
    if (n > records.size() || m > records.size()) {
        std::size_t clamped_n = std::min(n, records.size());
        std::size_t clamped_m = std::min(m, records.size());
        std::cerr << "warning: dataset has " << records.size()
                  << " samples; clamping reference parameters to N=" << clamped_n
                  << " M=" << clamped_m << "\n";
        n = clamped_n;
        m = clamped_m;
    }
    return hype::build_reference_sets(records, n, m, opts.curv(), opts.cone(), opts.parallel());
}

std::vector<hype::ScoreRow> load_score_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return hype::read_score_csv(in, path);
}

void print_column(const char* name, const hype::ColumnStats& col) {
    std::printf("  %-9s %12.6f +- %.6f\n", name, col.mean, col.stddev);
}

int run_stats(const std::string& input, const std::string& refset_path,
              const CommonOptions& opts) {
    std::vector<hype::PairRecord> records = hype::load_dataset(input, opts.parallel());
    hype::ReferenceSets refs = hype::read_reference_sets(refset_path);
    std::vector<hype::SampleMetrics> metrics =
        hype::compute_sample_metrics(records, refs, opts.curv(), opts.cone(), opts.parallel());
    hype::MetricStats stats = hype::metric_stats(metrics, opts.parallel());

    std::printf("samples: %zu   (reference M=%zu, N=%zu)\n", metrics.size(), refs.images.size(),
                refs.images.n_aligned);
    print_column("eps_t", stats.eps_t);
    print_column("eps_i", stats.eps_i);
    print_column("neg_dl", stats.neg_dl);
    print_column("clip_cos", stats.clip_cos);
    print_column("c_in", stats.cin);
    return 0;
}

int run_refset(const std::string& input, const std::string& out, std::size_t n, std::size_t m,
               const CommonOptions& opts) {
    std::vector<hype::PairRecord> records = hype::load_dataset(input, opts.parallel());
    hype::ReferenceSets refs = clamped_reference_sets(records, n, m, opts);
    hype::write_reference_sets(refs, out);
    std::printf("reference sets written to %s (M=%zu per modality, dim=%zu)\n", out.c_str(),
                refs.images.size(), refs.images.dim);
    return 0;
}

int run_specificity(const std::string& input, const std::string& refset_path,
                    const std::string& out, const CommonOptions& opts) {
    std::vector<hype::PairRecord> records = hype::load_dataset(input, opts.parallel());
    hype::ReferenceSets refs = hype::read_reference_sets(refset_path);
    std::vector<hype::SpecificityResult> eps =
        hype::specificity_for_dataset(records, refs, opts.curv(), opts.cone(), opts.parallel());

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open " + out + " for writing");
    csv << "id,eps_t,eps_i\n";
    char line[128];
    for (const auto& r : eps) {
        std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g\n",
                      static_cast<unsigned long long>(r.id), r.eps_t, r.eps_i);
        csv << line;
    }
    std::printf("specificity for %zu samples written to %s\n", eps.size(), out.c_str());
    return 0;
}

int run_score(const std::string& input, const std::string& refset_path, const std::string& out,
              const hype::WeightVector& weights, bool cin_hard_gate, const CommonOptions& opts) {
    std::vector<hype::PairRecord> records = hype::load_dataset(input, opts.parallel());
    hype::ReferenceSets refs = hype::read_reference_sets(refset_path);
    std::vector<hype::SampleMetrics> metrics =
        hype::compute_sample_metrics(records, refs, opts.curv(), opts.cone(), opts.parallel());
    hype::ScoreTable table = hype::score_dataset(metrics, weights, opts.parallel(), cin_hard_gate);

    std::vector<hype::SampleMetrics> rows;
    if (cin_hard_gate) {
        rows.reserve(table.size());
        for (const auto& m : metrics)
            if (m.cin_value != 0.0) rows.push_back(m);
    } else {
        rows = std::move(metrics);
    }

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open " + out + " for writing");
    hype::write_score_csv(rows, table, csv);
    std::printf("scores for %zu samples written to %s\n", table.size(), out.c_str());
    return 0;
}

int run_filter(const std::string& scores_path, double fraction, const std::string& out,
               const std::string& combine_path, const std::string& mode_name,
               const hype::WeightVector& weights) {
    std::vector<hype::ScoreRow> rows = load_score_rows(scores_path);
    hype::ScoreTable table;
    table.ids.reserve(rows.size());
    table.scores.reserve(rows.size());
    for (const auto& r : rows) {
        table.ids.push_back(r.metrics.id);
        table.scores.push_back(r.score);
    }
    hype::FilterSelection sel = hype::select_top_fraction(table, fraction, scores_path);

    if (!combine_path.empty()) {
        hype::FilterSelection other;
        other.ids = hype::read_selection_ids(combine_path);
        other.k = other.ids.size();
        other.source = combine_path;
        hype::CombineMode mode = mode_name == "intersect" ? hype::CombineMode::intersect
                                                          : hype::CombineMode::set_union;
        sel = hype::combine_selections(sel, other, mode);
    }

    hype::write_selection(sel, weights, out);
    std::printf("%zu ids written to %s (+ %s.json)\n", sel.ids.size(), out.c_str(), out.c_str());
    return 0;
}

int run_histogram(const std::string& scores_path, const std::string& metric, std::size_t bins,
                  std::optional<double> range_min, std::optional<double> range_max,
                  const std::string& out) {
    std::vector<hype::ScoreRow> rows = load_score_rows(scores_path);
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& r : rows) {
        const hype::SampleMetrics& m = r.metrics;
        if (metric == "eps_i") values.push_back(m.eps_i);
        else if (metric == "eps_t") values.push_back(m.eps_t);
        else if (metric == "neg_dl") values.push_back(m.neg_dl);
        else if (metric == "clip_cos") values.push_back(m.clip_cos);
        else if (metric == "cin") values.push_back(m.cin_value);
        else values.push_back(r.score);
    }

    hype::HistogramSpec spec;
    spec.metric = metric;
    spec.bin_count = bins;
    spec.range_min = range_min;
    spec.range_max = range_max;
    std::vector<hype::HistogramBin> result = hype::export_histogram(values, spec);

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open " + out + " for writing");
    hype::write_histogram_csv(result, csv);
    std::printf("histogram of %s (%zu bins) written to %s\n", metric.c_str(), bins, out.c_str());
    return 0;
}

int run_train_toy(const hype::TrainerConfig& config, std::size_t categories,
                  std::size_t images_per_category, const std::string& trace_out,
                  const std::string& shard_out) {
    hype::SyntheticCorpus corpus =
        hype::gen_synthetic_hierarchy(config.seed, categories, images_per_category);
    hype::TrainResult result = hype::train(config, corpus);

    if (!trace_out.empty()) {
        std::ofstream csv(trace_out, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot open " + trace_out + " for writing");
        csv << "step,contrastive,entailment,total\n";
        char line[160];
        for (std::size_t i = 0; i < result.trace.size(); ++i) {
            std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", i,
                          result.trace[i].contrastive, result.trace[i].entailment,
                          result.trace[i].total);
            csv << line;
        }
    }
    if (!shard_out.empty()) {
        std::vector<hype::PairRecord> records = hype::corpus_to_records(result.table, corpus);
        hype::write_shard(records, shard_out, static_cast<std::uint32_t>(config.dim),
                          hype::kFlagClipCos);
    }

    double initial = result.trace.empty() ? 0.0 : result.trace.front().total;
    double final_loss = result.trace.empty() ? 0.0 : result.trace.back().total;
    std::printf("trained %zu texts / %zu images for %zu steps: total loss %.6f -> %.6f\n",
                corpus.text_count, corpus.image_count, config.steps, initial, final_loss);
    if (!trace_out.empty()) std::printf("loss trace written to %s\n", trace_out.c_str());
    if (!shard_out.empty()) std::printf("trained embeddings written to %s\n", shard_out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperbolic entailment scoring and dataset filtering"};
    app.require_subcommand(1);

    // stats
    auto* stats = app.add_subcommand("stats", "Per-metric mean and standard deviation");
    std::string stats_input, stats_refset;
    CommonOptions stats_opts;
    stats->add_option("--input", stats_input, "Shard or manifest JSON")->required();
    stats->add_option("--refset", stats_refset, "Reference-set archive")->required();
    add_common(stats, stats_opts);

    // refset
    auto* refset = app.add_subcommand("refset", "Build and persist the reference sets");
    std::string refset_input, refset_out;
    std::size_t refset_n = 20000, refset_m = 20000;
    CommonOptions refset_opts;
    refset->add_option("--input", refset_input, "Shard or manifest JSON")->required();
    refset->add_option("--out", refset_out, "Output archive path")->required();
    refset->add_option("--n", refset_n, "Aligned probe-subset size N")->check(CLI::PositiveNumber);
    refset->add_option("--m", refset_m, "Reference-set size M per modality")
        ->check(CLI::PositiveNumber);
    add_common(refset, refset_opts);

    // specificity
    auto* specificity = app.add_subcommand("specificity", "Per-sample eps_t and eps_i");
    std::string spec_input, spec_refset, spec_out;
    CommonOptions spec_opts;
    specificity->add_option("--input", spec_input, "Shard or manifest JSON")->required();
    specificity->add_option("--refset", spec_refset, "Reference-set archive")->required();
    specificity->add_option("--out", spec_out, "Output CSV")->required();
    add_common(specificity, spec_opts);

    // score
    auto* score = app.add_subcommand("score", "Combined per-sample score CSV");
    std::string score_input, score_refset, score_out;
    hype::WeightVector score_weights;
    bool cin_hard_gate = false;
    CommonOptions score_opts;
    score->add_option("--input", score_input, "Shard or manifest JSON")->required();
    score->add_option("--refset", score_refset, "Reference-set archive")->required();
    score->add_option("--out", score_out, "Output CSV")->required();
    add_weights(score, score_weights);
    score->add_flag("--cin-hard-gate", cin_hard_gate,
                    "Drop samples outside the cluster instead of adding the 0/10 term");
    add_common(score, score_opts);

    // filter
    auto* filter = app.add_subcommand("filter", "Top-fraction id selection");
    std::string filter_scores, filter_out, filter_combine, filter_mode = "intersect";
    double filter_fraction = 0.1;
    hype::WeightVector filter_weights;  // recorded in the sidecar
    filter->add_option("--scores", filter_scores, "Score CSV from `score`")->required();
    filter->add_option("--fraction", filter_fraction, "Fraction of the dataset to keep")
        ->required()
        ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0));
    filter->add_option("--out", filter_out, "Output id file")->required();
    filter->add_option("--combine", filter_combine, "Second id file to combine with");
    filter->add_option("--mode", filter_mode, "Combination mode")
        ->check(CLI::IsMember({"intersect", "union"}));
    add_weights(filter, filter_weights);

    // histogram
    auto* histogram = app.add_subcommand("histogram", "Relative-percentage histogram CSV");
    std::string hist_scores, hist_metric, hist_out;
    std::size_t hist_bins = 100;
    std::optional<double> hist_min, hist_max;
    histogram->add_option("--scores", hist_scores, "Score CSV from `score`")->required();
    histogram->add_option("--metric", hist_metric, "Metric column")
        ->required()
        ->check(CLI::IsMember({"eps_i", "eps_t", "neg_dl", "clip_cos", "cin", "score"}));
    histogram->add_option("--bins", hist_bins, "Bin count")->check(CLI::PositiveNumber);
    histogram->add_option("--min", hist_min, "Explicit range minimum");
    histogram->add_option("--max", hist_max, "Explicit range maximum");
    histogram->add_option("--out", hist_out, "Output CSV")->required();

    // train-toy
    auto* train_toy = app.add_subcommand("train-toy", "Train the synthetic-hierarchy tables");
    hype::TrainerConfig train_config;
    std::size_t train_categories = 2, train_images_per_category = 8;
    std::string train_trace_out, train_shard_out;
    train_toy->add_option("--dim", train_config.dim, "Embedding dimension")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--curvature", train_config.curvature, "Curvature magnitude c")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--k-aperture", train_config.cone_k, "Cone half-aperture constant")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--lambda-entail", train_config.lambda_entail,
                          "Entailment loss weight");
    train_toy->add_option("--lr", train_config.learning_rate, "Learning rate")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--steps", train_config.steps, "Gradient steps");
    train_toy->add_option("--batch", train_config.batch_size, "Batch size")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--seed", train_config.seed, "Seed");
    train_toy->add_option("--categories", train_categories, "Image categories")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--images-per-category", train_images_per_category,
                          "Images per category (>= 4)")
        ->check(CLI::PositiveNumber);
    train_toy->add_option("--trace-out", train_trace_out, "Loss trace CSV");
    train_toy->add_option("--shard-out", train_shard_out, "Trained-embedding shard");

    // selfcheck
    auto* selfcheck = app.add_subcommand("selfcheck", "Geometry-oracle and gradient suites");
    std::uint64_t selfcheck_seed = 20240501;
    selfcheck->add_option("--seed", selfcheck_seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (stats->parsed()) return run_stats(stats_input, stats_refset, stats_opts);
        if (refset->parsed())
            return run_refset(refset_input, refset_out, refset_n, refset_m, refset_opts);
        if (specificity->parsed())
            return run_specificity(spec_input, spec_refset, spec_out, spec_opts);
        if (score->parsed())
            return run_score(score_input, score_refset, score_out, score_weights, cin_hard_gate,
                             score_opts);
        if (filter->parsed())
            return run_filter(filter_scores, filter_fraction, filter_out, filter_combine,
                              filter_mode, filter_weights);
        if (histogram->parsed())
            return run_histogram(hist_scores, hist_metric, hist_bins, hist_min, hist_max,
                                 hist_out);
        if (train_toy->parsed())
            return run_train_toy(train_config, train_categories, train_images_per_category,
                                 train_trace_out, train_shard_out);
        if (selfcheck->parsed()) return hype::run_selfcheck(std::cout, selfcheck_seed) ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
