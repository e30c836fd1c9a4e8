// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "fixtures.hpp"
#include "hype/errors.hpp"
#include "hype/histogram.hpp"
#include "hype/lorentz.hpp"
#include "hype/pipeline.hpp"
#include "hype/rng.hpp"
#include "hype/scoring.hpp"
#include "hype/shard_io.hpp"
#include "hype/specificity.hpp"
#include "hype/trainer.hpp"

using namespace hype;
using hype::test::make_synthetic_dataset;

namespace fs = std::filesystem;

namespace {

int failures = 0;
std::vector<std::string> notes;

void note(const std::string& text) { notes.push_back(text); }

std::string fmt(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", value);
    return buf;
}

void criterion(const char* name, const std::function<bool()>& body) {
    notes.clear();
    auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string error;
    try {
        ok = body();
    } catch (const std::exception& e) {
        error = e.what();
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %-28s (%.2fs)\n", ok ? "PASS" : "FAIL", name, seconds);
    for (const std::string& text : notes) std::printf("       %s\n", text.c_str());
    if (!error.empty()) std::printf("       exception: %s\n", error.c_str());
    if (!ok) ++failures;
}

std::vector<double> random_tangent(Rng& rng, std::size_t dim, double c) {
    double max_radius = std::min(5.0, 6.5 / std::sqrt(c));
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    double radius = rng.uniform(0.0, max_radius);
    for (double& x : v) x *= norm > 0.0 ? radius / norm : 0.0;
    return v;
}

bool within_runtime(double seconds, double bound) {
    note("runtime " + fmt(seconds) + "s (bound " + fmt(bound) + "s)");
    return seconds < bound;
}

// --- criteria ----------------------------------------------------------------

bool geometry_suite() {
    auto start = std::chrono::steady_clock::now();
    Rng rng(1001);
    const double curvatures[] = {0.25, 1.0, 4.0};
    const std::size_t dims[] = {2, 16};
    const int per_combo = 10000 / 6 + 1;

    double worst_residual = 0.0, worst_radial = 0.0, worst_symmetry = 0.0, worst_identity = 0.0;
    for (double c : curvatures) {
        Curvature curv(c);
        for (std::size_t dim : dims) {
            LorentzPoint origin = lorentz_origin(dim, curv);
            LorentzPoint previous;
            for (int i = 0; i < per_combo; ++i) {
                std::vector<double> v = random_tangent(rng, dim, c);
                LorentzPoint lifted = lift(v, curv);
                LorentzPoint mapped = exp_map_origin(v, curv);
                for (const LorentzPoint& p : {lifted, mapped}) {
                    double residual = std::fabs(c * lorentz_inner(p, p) + 1.0);
                    worst_residual = std::max(worst_residual, residual);
                }
                double norm = std::sqrt(dot(v.data(), v.data(), dim));
                double d = -neg_lorentz_distance(origin, mapped, curv);
                worst_radial = std::max(worst_radial, std::fabs(d - norm));
                worst_identity =
                    std::max(worst_identity, std::fabs(neg_lorentz_distance(mapped, mapped, curv)));
                if (i > 0) {
                    double ab = neg_lorentz_distance(previous, mapped, curv);
                    double ba = neg_lorentz_distance(mapped, previous, curv);
                    worst_symmetry = std::max(worst_symmetry, std::fabs(ab - ba));
                }
                previous = mapped;
            }
        }
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    note("worst residual " + fmt(worst_residual) + ", radial " + fmt(worst_radial) +
         ", symmetry " + fmt(worst_symmetry) + ", identity " + fmt(worst_identity));
    return worst_residual <= 1e-9 && worst_radial <= 1e-9 && worst_symmetry <= 1e-12 &&
           worst_identity <= 1e-12 && within_runtime(seconds, 5.0);
}

bool oracle_equivalence() {
    auto start = std::chrono::steady_clock::now();
    Rng rng(1002);
    Curvature curv(1.0);
    ConeParams cone(0.1);
    double worst_angle = 0.0, worst_loss = 0.0;
    int done = 0;
    while (done < 1000) {
        std::size_t dim = done % 2 == 0 ? 2 : 16;
        LorentzPoint x = exp_map_origin(random_tangent(rng, dim, curv.c), curv);
        LorentzPoint y = exp_map_origin(random_tangent(rng, dim, curv.c), curv);
        if (std::sqrt(dot(x.coords.data(), x.coords.data(), dim)) < 1e-6) continue;
        if (-neg_lorentz_distance(x, y, curv) < 1e-6) continue;

        double direct = exterior_angle(x, y, curv);
        double oracle = angle_oracle(x, y, curv);
        worst_angle =
            std::max(worst_angle, std::fabs(direct - oracle) / std::max(1.0, std::fabs(oracle)));

        double loss = entailment_loss(x, y, curv, cone);
        double oracle_loss = std::max(0.0, oracle - half_aperture(x, curv, cone));
        worst_loss = std::max(worst_loss,
                              std::fabs(loss - oracle_loss) / std::max(1.0, std::fabs(oracle_loss)));
        ++done;
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    note("worst angle rel " + fmt(worst_angle) + ", worst loss rel " + fmt(worst_loss));
    return worst_angle <= 1e-6 && worst_loss <= 1e-6 && within_runtime(seconds, 5.0);
}

bool specificity_vs_brute_force() {
    auto start = std::chrono::steady_clock::now();
    Curvature curv(1.0);
    ConeParams cone(0.1);
    bool ok = true;
    for (std::size_t dim : {2ul, 16ul}) {
        std::vector<PairRecord> data = make_synthetic_dataset(2000 + dim, 64, dim);
        std::vector<SpecificityResult> oracle = brute_force_specificity(data, 8, 8, curv, cone);

        std::vector<SpecificityResult> reference;
        std::vector<std::uint64_t> members;
        bool first = true;
        for (std::size_t chunk : {1ul, 7ul, 64ul}) {
            for (unsigned threads : {1u, 4u}) {
                ParallelConfig par{threads, chunk};
                ReferenceSets refs = build_reference_sets(data, 8, 8, curv, cone, par);
                std::vector<SpecificityResult> eps =
                    specificity_for_dataset(data, refs, curv, cone, par);
                for (std::size_t i = 0; i < eps.size(); ++i) {
                    ok = ok && eps[i].id == oracle[i].id &&
                         std::fabs(eps[i].eps_t - oracle[i].eps_t) <= 1e-9 &&
                         std::fabs(eps[i].eps_i - oracle[i].eps_i) <= 1e-9;
                }
                if (first) {
                    reference = eps;
                    members = refs.images.source_ids;
                    first = false;
                } else {
                    ok = ok && refs.images.source_ids == members;
                    ok = ok && std::memcmp(reference.data(), eps.data(),
                                           eps.size() * sizeof(SpecificityResult)) == 0;
                }
            }
        }
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return ok && within_runtime(seconds, 10.0);
}

bool score_anchor() {
    WeightVector unit;
    SampleMetrics table2{0, 0.289, 0.211, -0.726, 0.208, 10.0};
    double score = hype_score(table2, unit);
    note("unit-weight score " + fmt(score));
    bool ok = std::fabs(score - 9.982) <= 1e-12;

    WeightVector no_cin = unit;
    no_cin.w_cin = 0.0;
    double ablated = hype_score(table2, no_cin);
    note("w_cin=0 score " + fmt(ablated));
    ok = ok && std::fabs(ablated - (-0.018)) <= 1e-12;

    // the exported CSV shows the same anchor at 9 significant digits
    ScoreTable table = score_dataset(std::vector<SampleMetrics>{table2}, unit);
    std::ostringstream csv;
    write_score_csv(std::vector<SampleMetrics>{table2}, table, csv);
    ok = ok && csv.str().find(",9.982") != std::string::npos;
    return ok;
}

bool selection_determinism() {
    Rng rng(1003);
    const std::size_t count = 100000;
    std::vector<SampleMetrics> metrics(count);
    for (std::size_t i = 0; i < count; ++i) {
        // quantized values create heavy score ties, exercising the id tiebreak
        double eps_i = std::round(rng.uniform(0.0, 0.6) * 1000.0) / 1000.0;
        double eps_t = std::round(rng.uniform(0.0, 0.5) * 1000.0) / 1000.0;
        metrics[i] = {i, eps_i, eps_t, -0.7, 0.2, cin_value((rng.next_u64() & 1) != 0)};
    }

    fs::path dir = fs::temp_directory_path() / "hype_acceptance_sel";
    fs::remove_all(dir);
    fs::create_directories(dir);

    WeightVector unit;
    bool ok = true;
    for (double fraction : {0.1, 0.2, 0.3}) {
        std::vector<std::string> files;
        for (unsigned threads : {1u, 8u}) {
            for (int run = 0; run < 5; ++run) {
                ScoreTable table = score_dataset(metrics, unit, ParallelConfig{threads, 4096});
                FilterSelection sel = select_top_fraction(table, fraction, "acceptance");
                ok = ok && sel.k == static_cast<std::size_t>(fraction * count + 0.5);
                std::string path =
                    (dir / ("sel_" + std::to_string(fraction) + "_" + std::to_string(threads) +
                            "_" + std::to_string(run) + ".txt"))
                        .string();
                write_selection(sel, unit, path);
                files.push_back(path);
            }
        }
        std::ifstream first(files[0], std::ios::binary);
        std::string reference((std::istreambuf_iterator<char>(first)),
                              std::istreambuf_iterator<char>());
        for (std::size_t i = 1; i < files.size(); ++i) {
            std::ifstream other(files[i], std::ios::binary);
            std::string bytes((std::istreambuf_iterator<char>(other)),
                              std::istreambuf_iterator<char>());
            ok = ok && bytes == reference;
        }
        note("fraction " + fmt(fraction) + ": 10 byte-identical id files");
    }

    // nesting across fractions
    ScoreTable table = score_dataset(metrics, unit);
    FilterSelection f1 = select_top_fraction(table, 0.1, "f1");
    FilterSelection f2 = select_top_fraction(table, 0.2, "f2");
    FilterSelection f3 = select_top_fraction(table, 0.3, "f3");
    auto subset_of = [](const FilterSelection& small, const FilterSelection& big) {
        std::unordered_set<std::uint64_t> in_big(big.ids.begin(), big.ids.end());
        for (std::uint64_t id : small.ids)
            if (!in_big.count(id)) return false;
        return true;
    };
    ok = ok && subset_of(f1, f2) && subset_of(f2, f3);
    ok = ok && f1.k == 10000 && f2.k == 20000 && f3.k == 30000;

    fs::remove_all(dir);
    return ok;
}

bool format_suite() {
    fs::path dir = fs::temp_directory_path() / "hype_acceptance_fmt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string path = (dir / "data.bin").string();

    std::vector<PairRecord> records = make_synthetic_dataset(1004, 1000, 8);
    write_shard(records, path, 8);
    std::vector<PairRecord> loaded = read_shard(path);
    bool ok = loaded.size() == records.size();
    for (std::size_t i = 0; ok && i < records.size(); ++i) {
        ok = loaded[i].id == records[i].id && loaded[i].text_tangent == records[i].text_tangent &&
             loaded[i].image_tangent == records[i].image_tangent &&
             static_cast<float>(loaded[i].clip_cos) == static_cast<float>(records[i].clip_cos) &&
             loaded[i].cin_flag == records[i].cin_flag;
    }
    note(std::string("round trip of 1000 records: ") + (ok ? "bit-exact" : "MISMATCH"));

    std::ifstream in(path, std::ios::binary);
    std::vector<char> good((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    Rng rng(1005);
    int caught = 0;
    for (int flip = 0; flip < 50; ++flip) {
        std::vector<char> bad = good;
        std::size_t offset = rng.index(bad.size());
        char mask = static_cast<char>(1 << rng.index(8));
        bad[offset] ^= mask;
        std::string bad_path = (dir / "flipped.bin").string();
        std::ofstream out(bad_path, std::ios::binary | std::ios::trunc);
        out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
        out.close();
        try {
            (void)read_shard(bad_path);
        } catch (const std::exception&) {
            ++caught;
        }
    }
    note("corruption detected in " + std::to_string(caught) + "/50 single-byte flips");
    ok = ok && caught == 50;

    Rng hist_rng(1006);
    std::vector<double> values(5000);
    for (double& v : values) v = hist_rng.normal();
    HistogramSpec spec;
    spec.bin_count = 100;
    auto bins = export_histogram(values, spec);
    double total = 0.0;
    for (const auto& bin : bins) total += bin.percent;
    note("histogram percentages sum to " + fmt(total));
    ok = ok && std::fabs(total - 100.0) <= 1e-6;

    fs::remove_all(dir);
    return ok;
}

bool trainer_suite() {
    auto start = std::chrono::steady_clock::now();

    // 20 seeded gradient configurations, n in {2,8} x batch in {2,8}
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(seed, 2, 4);
        TrainerConfig config;
        config.dim = seed % 2 == 0 ? 8 : 2;
        config.seed = seed;
        std::size_t batch_size = (seed / 2) % 2 == 0 ? 8 : 2;
        EmbeddingTable table = init_table(config, corpus);
        std::vector<PositivePair> batch(corpus.pairs.begin(), corpus.pairs.begin() + batch_size);
        FiniteDiffReport report = finite_diff_check(table, batch, config);
        worst = std::max(worst, report.max_rel_error);
    }
    note("worst finite-difference relative error " + fmt(worst));
    bool ok = worst < 1e-4;

    // default corpus: 2 categories x 8 images, seed 0, 2000 steps, n = 8
    SyntheticCorpus corpus = gen_synthetic_hierarchy(0, 2, 8);
    TrainerConfig config;
    config.dim = 8;
    config.seed = 0;
    config.steps = 2000;
    config.batch_size = 32;
    EmbeddingTable initial = init_table(config, corpus);
    LossBreakdown initial_loss = total_loss(initial, corpus.pairs, config);
    TrainResult result = train(config, corpus);
    LossBreakdown final_loss = total_loss(result.table, corpus.pairs, config);
    note("total loss " + fmt(initial_loss.total) + " -> " + fmt(final_loss.total) +
         ", entailment " + fmt(initial_loss.entailment) + " -> " + fmt(final_loss.entailment));
    ok = ok && final_loss.total < initial_loss.total;
    ok = ok && final_loss.entailment < initial_loss.entailment;

    Curvature curv(config.curvature);
    ForwardPoints points = forward_points(result.table, curv);
    auto mean_space_norm = [&](const std::vector<double>& pts, std::size_t count) {
        double sum = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double* p = pts.data() + i * (config.dim + 1);
            sum += std::sqrt(dot(p, p, config.dim));
        }
        return sum / static_cast<double>(count);
    };
    double text_norm = mean_space_norm(points.text_points, corpus.text_count);
    double image_norm = mean_space_norm(points.image_points, corpus.image_count);
    note("mean space norm: texts " + fmt(text_norm) + ", images " + fmt(image_norm));
    ok = ok && text_norm < image_norm;

    // generic captions must rank below specific captions on eps_t
    std::vector<PairRecord> records = corpus_to_records(result.table, corpus);
    ReferenceSets refs = build_reference_sets(records, records.size(), records.size() / 2,
                                              curv, ConeParams(config.cone_k));
    std::vector<double> eps_t(corpus.text_count);
    ConeParams cone(config.cone_k);
    for (std::size_t t = 0; t < corpus.text_count; ++t) {
        LorentzPoint point;
        point.coords.assign(points.text_point(t), points.text_point(t) + config.dim + 1);
        eps_t[t] = epsilon_text(point, refs.images, curv, cone);
    }
    std::size_t wins = 0, pairs = 0;
    for (std::size_t g = 0; g < corpus.text_count; ++g) {
        if (corpus.text_labels[g] != TextLabel::generic) continue;
        for (std::size_t s = 0; s < corpus.text_count; ++s) {
            if (corpus.text_labels[s] != TextLabel::specific) continue;
            ++pairs;
            if (eps_t[g] < eps_t[s]) ++wins;
        }
    }
    double ratio = static_cast<double>(wins) / static_cast<double>(pairs);
    note("eps_t(generic) < eps_t(specific) for " + std::to_string(wins) + "/" +
         std::to_string(pairs) + " caption pairs");
    ok = ok && ratio >= 0.9;

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return ok && within_runtime(seconds, 60.0);
}

bool throughput_sanity() {
    const std::size_t count = 100000;
    const std::size_t dim = 64;
    const std::size_t m = 1024;

    std::vector<PairRecord> dataset = make_synthetic_dataset(1007, count, dim);
    Curvature curv(1.0);
    ConeParams cone(0.1);

    // references drawn from a separate pool, exp-mapped once
    std::vector<PairRecord> pool = make_synthetic_dataset(1008, m, dim);
    ReferenceSets refs = build_reference_sets(pool, m, m, curv, cone, ParallelConfig{0, 256});

    auto run_once = [&](unsigned threads) {
        auto start = std::chrono::steady_clock::now();
        std::vector<SampleMetrics> metrics =
            compute_sample_metrics(dataset, refs, curv, cone, ParallelConfig{threads, 1024});
        ScoreTable table = score_dataset(metrics, WeightVector{}, ParallelConfig{threads, 4096});
        double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return std::pair{seconds, table.scores[0]};
    };

    auto [t1, s1] = run_once(1);
    auto [t4, s4] = run_once(4);
    note("1 thread: " + fmt(t1) + "s, 4 threads: " + fmt(t4) + "s");
    bool ok = t4 < 60.0;
    note(std::string("4-thread runtime bound 60s: ") + (ok ? "met" : "MISSED"));
    ok = ok && s1 == s4;

    double speedup = t1 / t4;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw >= 4) {
        note("speedup 1->4 threads: " + fmt(speedup) + " (need >= 2.5)");
        ok = ok && speedup >= 2.5;
    } else {
        note("speedup 1->4 threads: " + fmt(speedup) + " -- host has " +
             std::to_string(hw) + " cores, the 4-core >=2.5x clause is not evaluable here");
    }
    return ok;
}

}  // namespace

int main() {
    criterion("geometry suite", geometry_suite);
    criterion("oracle equivalence", oracle_equivalence);
    criterion("specificity vs brute force", specificity_vs_brute_force);
    criterion("score anchor", score_anchor);
    criterion("selection determinism", selection_determinism);
    criterion("format suite", format_suite);
    criterion("trainer suite", trainer_suite);
    criterion("throughput sanity", throughput_sanity);

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", failures);
    return 1;
}
