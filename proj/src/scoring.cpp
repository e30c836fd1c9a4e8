#include "hype/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "hype/errors.hpp"

namespace hype {

double cin_value(bool in_cluster) { return in_cluster ? 10.0 : 0.0; }

double hype_score(const SampleMetrics& m, const WeightVector& w) {
    return w.w_eps_i * m.eps_i + w.w_eps_t * m.eps_t + w.w_negdl * m.neg_dl +
           w.w_cos * m.clip_cos + w.w_cin * m.cin_value;
}

ScoreTable score_dataset(std::span<const SampleMetrics> metrics, const WeightVector& w,
                         const ParallelConfig& par, bool cin_hard_gate) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(metrics.size() * 2);
    for (const auto& m : metrics) {
        if (!seen.insert(m.id).second)
            throw data_integrity_error("score_dataset: duplicate sample id " +
                                       std::to_string(m.id));
    }

    std::vector<double> scores(metrics.size());
    for_each_chunk(metrics.size(), par, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) scores[i] = hype_score(metrics[i], w);
    });

    ScoreTable table;
    table.ids.reserve(metrics.size());
    table.scores.reserve(metrics.size());
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        if (cin_hard_gate && metrics[i].cin_value == 0.0) continue;
        table.ids.push_back(metrics[i].id);
        table.scores.push_back(scores[i]);
    }
    return table;
}

namespace {

// floor(fraction * D) evaluated so that products like 0.3 * 10 that are
// mathematically integral do not round down through the fp representation.
std::size_t top_fraction_count(double fraction, std::size_t total) {
    double k = std::floor(fraction * static_cast<double>(total) + 1e-9);
    auto count = static_cast<std::size_t>(k);
    if (count < 1) count = 1;
    if (count > total) count = total;
    return count;
}

}  // namespace

FilterSelection select_top_fraction(const ScoreTable& scores, double fraction,
                                    std::string source) {
    if (scores.size() == 0) throw std::invalid_argument("select_top_fraction: empty score table");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("select_top_fraction: fraction must be in (0, 1]");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
        return scores.ids[a] < scores.ids[b];
    });

    FilterSelection sel;
    sel.fraction = fraction;
    sel.source = std::move(source);
    sel.sources = {sel.source};
    sel.k = top_fraction_count(fraction, scores.size());
    sel.ids.reserve(sel.k);
    for (std::size_t i = 0; i < sel.k; ++i) sel.ids.push_back(scores.ids[order[i]]);
    return sel;
}

FilterSelection combine_selections(const FilterSelection& a, const FilterSelection& b,
                                   CombineMode mode) {
    std::unordered_set<std::uint64_t> in_b(b.ids.begin(), b.ids.end());
    FilterSelection out;
    out.fraction = a.fraction;
    out.mode = mode == CombineMode::intersect ? "intersect" : "union";
    out.sources = {a.source, b.source};
    out.source = out.mode + "(" + a.source + ", " + b.source + ")";
    if (mode == CombineMode::intersect) {
        for (std::uint64_t id : a.ids)
            if (in_b.count(id)) out.ids.push_back(id);
    } else {
        std::unordered_set<std::uint64_t> in_a(a.ids.begin(), a.ids.end());
        out.ids = a.ids;
        for (std::uint64_t id : b.ids)
            if (!in_a.count(id)) out.ids.push_back(id);
    }
    out.k = out.ids.size();
    return out;
}

namespace {

struct Welford {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
    }

    // Chan's pairwise merge.
    void merge(const Welford& other) {
        if (other.count == 0) return;
        if (count == 0) {
            *this = other;
            return;
        }
        double total = static_cast<double>(count + other.count);
        double delta = other.mean - mean;
        m2 += other.m2 +
              delta * delta * static_cast<double>(count) * static_cast<double>(other.count) / total;
        mean += delta * static_cast<double>(other.count) / total;
        count += other.count;
    }

    ColumnStats finish() const {
        ColumnStats stats;
        stats.count = count;
        stats.mean = mean;
        stats.stddev = count ? std::sqrt(std::max(m2, 0.0) / static_cast<double>(count)) : 0.0;
        return stats;
    }
};

struct WelfordRow {
    Welford eps_t, eps_i, neg_dl, clip_cos, cin;
};

}  // namespace

MetricStats metric_stats(std::span<const SampleMetrics> metrics, const ParallelConfig& par) {
    if (metrics.empty()) throw std::invalid_argument("metric_stats: empty stream");

    std::size_t chunks = chunk_count(metrics.size(), par.chunk_size);
    std::vector<WelfordRow> partials(chunks);
    for_each_chunk(metrics.size(), par, [&](std::size_t ci, std::size_t begin, std::size_t end) {
        WelfordRow& row = partials[ci];
        for (std::size_t i = begin; i < end; ++i) {
            row.eps_t.add(metrics[i].eps_t);
            row.eps_i.add(metrics[i].eps_i);
            row.neg_dl.add(metrics[i].neg_dl);
            row.clip_cos.add(metrics[i].clip_cos);
            row.cin.add(metrics[i].cin_value);
        }
    });

    WelfordRow total;
    for (const WelfordRow& row : partials) {
        total.eps_t.merge(row.eps_t);
        total.eps_i.merge(row.eps_i);
        total.neg_dl.merge(row.neg_dl);
        total.clip_cos.merge(row.clip_cos);
        total.cin.merge(row.cin);
    }

    return {total.eps_t.finish(), total.eps_i.finish(), total.neg_dl.finish(),
            total.clip_cos.finish(), total.cin.finish()};
}

namespace {

void append_g9(std::string& out, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    out += buf;
}

}  // namespace

void write_score_csv(std::span<const SampleMetrics> metrics, const ScoreTable& table,
                     std::ostream& out) {
    if (metrics.size() != table.size())
        throw std::invalid_argument("write_score_csv: metrics and score table sizes differ");
    out << "id,eps_i,eps_t,neg_dl,clip_cos,cin,score\n";
    std::string line;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        line.clear();
        line += std::to_string(metrics[i].id);
        line += ',';
        append_g9(line, metrics[i].eps_i);
        line += ',';
        append_g9(line, metrics[i].eps_t);
        line += ',';
        append_g9(line, metrics[i].neg_dl);
        line += ',';
        append_g9(line, metrics[i].clip_cos);
        line += ',';
        append_g9(line, metrics[i].cin_value);
        line += ',';
        append_g9(line, table.scores[i]);
        line += '\n';
        out << line;
    }
}

std::vector<ScoreRow> read_score_csv(std::istream& in, const std::string& path_for_errors) {
    std::string name = path_for_errors.empty() ? "score csv" : path_for_errors;
    std::string line;
    if (!std::getline(in, line))
        throw data_integrity_error(name + ": empty file");
    if (line != "id,eps_i,eps_t,neg_dl,clip_cos,cin,score")
        throw data_integrity_error(name + ": unexpected header '" + line + "'");

    std::vector<ScoreRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string field;
        ScoreRow row;
        double* slots[6] = {&row.metrics.eps_i,    &row.metrics.eps_t, &row.metrics.neg_dl,
                            &row.metrics.clip_cos, &row.metrics.cin_value, &row.score};
        if (!std::getline(fields, field, ','))
            throw data_integrity_error(name + ": short row at line " + std::to_string(lineno));
        row.metrics.id = std::stoull(field);
        for (double* slot : slots) {
            if (!std::getline(fields, field, ','))
                throw data_integrity_error(name + ": short row at line " + std::to_string(lineno));
            *slot = std::stod(field);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_selection(const FilterSelection& sel, const WeightVector& weights,
                     const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("write_selection: cannot open " + path);
        std::string buf;
        for (std::uint64_t id : sel.ids) {
            buf += std::to_string(id);
            buf += '\n';
        }
        out << buf;
        if (!out) throw std::runtime_error("write_selection: write failed for " + path);
    }
    nlohmann::json sidecar{
        {"fraction", sel.fraction},
        {"k", sel.k},
        {"weights",
         {{"w_eps_i", weights.w_eps_i},
          {"w_eps_t", weights.w_eps_t},
          {"w_negdl", weights.w_negdl},
          {"w_cos", weights.w_cos},
          {"w_cin", weights.w_cin}}},
        {"sources", sel.sources},
        {"mode", sel.mode},
        {"source", sel.source},
    };
    std::ofstream side(path + ".json", std::ios::binary);
    if (!side) throw std::runtime_error("write_selection: cannot open " + path + ".json");
    side << sidecar.dump(2) << '\n';
}

std::vector<std::uint64_t> read_selection_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_selection_ids: cannot open " + path);
    std::vector<std::uint64_t> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ids.push_back(std::stoull(line));
    }
    return ids;
}

}  // namespace hype
