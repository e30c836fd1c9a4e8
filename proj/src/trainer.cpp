#include "hype/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hype/errors.hpp"
#include "hype/rng.hpp"

namespace hype {

namespace {

// sinh(r)/r and its slope-over-r companion (r cosh r - sinh r)/r^3, both
// with series fallbacks through their removable singularities.
double sinh_ratio(double r) {
    if (r < 1e-2) {
        double r2 = r * r;
        return 1.0 + r2 / 6.0 + r2 * r2 / 120.0 + r2 * r2 * r2 / 5040.0;
    }
    return std::sinh(r) / r;
}

double sinh_ratio_slope(double r) {
    if (r < 1e-2) {
        double r2 = r * r;
        return 1.0 / 3.0 + r2 / 30.0 + r2 * r2 / 840.0;
    }
    return (r * std::cosh(r) - std::sinh(r)) / (r * r * r);
}

struct BatchForward {
    std::size_t size = 0;
    std::size_t dim = 0;
    std::vector<double> text_z, image_z;      // size x dim, alpha-scaled tangents
    std::vector<double> text_pts, image_pts;  // size x (dim+1)
    std::vector<double> dist;                 // size x size, d(text_i, image_j) >= 0
    std::vector<double> acosh_arg;            // size x size, pre-clamp value
    std::vector<double> logits;               // size x size, -dist/tau

    const double* tz(std::size_t k) const { return text_z.data() + k * dim; }
    const double* iz(std::size_t k) const { return image_z.data() + k * dim; }
    const double* tp(std::size_t k) const { return text_pts.data() + k * (dim + 1); }
    const double* ip(std::size_t k) const { return image_pts.data() + k * (dim + 1); }
};

BatchForward forward_batch(const EmbeddingTable& table, std::span<const PositivePair> batch,
                           const TrainerConfig& config) {
    const std::size_t B = batch.size();
    const std::size_t dim = table.dim;
    const double alpha = table.alpha();
    const double c = config.curvature;
    const double tau = table.temperature();

    BatchForward fwd;
    fwd.size = B;
    fwd.dim = dim;
    fwd.text_z.resize(B * dim);
    fwd.image_z.resize(B * dim);
    fwd.text_pts.resize(B * (dim + 1));
    fwd.image_pts.resize(B * (dim + 1));

    for (std::size_t k = 0; k < B; ++k) {
        if (batch[k].text_index >= table.text_count() ||
            batch[k].image_index >= table.image_count())
            throw std::invalid_argument("forward_batch: pair index out of range");
        const double* t = table.text_row(batch[k].text_index);
        const double* im = table.image_row(batch[k].image_index);
        for (std::size_t d = 0; d < dim; ++d) {
            fwd.text_z[k * dim + d] = alpha * t[d];
            fwd.image_z[k * dim + d] = alpha * im[d];
        }
        exp_map_origin_packed(fwd.tz(k), dim, c, fwd.text_pts.data() + k * (dim + 1));
        exp_map_origin_packed(fwd.iz(k), dim, c, fwd.image_pts.data() + k * (dim + 1));
    }

    fwd.dist.resize(B * B);
    fwd.acosh_arg.resize(B * B);
    fwd.logits.resize(B * B);
    const double inv_sqrt_c = 1.0 / std::sqrt(c);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            double arg = -c * lorentz_inner_packed(fwd.tp(i), fwd.ip(j), dim);
            fwd.acosh_arg[i * B + j] = arg;
            double d = inv_sqrt_c * std::acosh(std::max(arg, 1.0));
            fwd.dist[i * B + j] = d;
            fwd.logits[i * B + j] = -d / tau;
        }
    }
    return fwd;
}

double logsumexp(const double* values, std::size_t n, std::size_t stride) {
    double max_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) max_v = std::max(max_v, values[i * stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(values[i * stride] - max_v);
    return max_v + std::log(sum);
}

LossBreakdown loss_from_forward(const BatchForward& fwd, const TrainerConfig& config) {
    const std::size_t B = fwd.size;
    const double c = config.curvature;

    double ce_sum = 0.0;
    for (std::size_t i = 0; i < B; ++i)
        ce_sum += logsumexp(fwd.logits.data() + i * B, B, 1) - fwd.logits[i * B + i];
    for (std::size_t j = 0; j < B; ++j)
        ce_sum += logsumexp(fwd.logits.data() + j, B, B) - fwd.logits[j * B + j];
    double contrastive = ce_sum / (2.0 * static_cast<double>(B));

    double entail_sum = 0.0;
    for (std::size_t k = 0; k < B; ++k) {
        double aperture = half_aperture_packed(fwd.tp(k), fwd.dim, c, config.cone_k);
        entail_sum += entailment_loss_packed(fwd.tp(k), fwd.ip(k), fwd.dim, c, aperture);
    }
    double entailment = entail_sum / static_cast<double>(B);

    return {contrastive, entailment, contrastive + config.lambda_entail * entailment};
}

// Adjoint state per batch row, in manifold coordinates.
struct CoordAdjoints {
    std::vector<double> text_space, image_space;  // size x dim
    std::vector<double> text_time, image_time;    // size

    explicit CoordAdjoints(std::size_t size, std::size_t dim)
        : text_space(size * dim, 0.0),
          image_space(size * dim, 0.0),
          text_time(size, 0.0),
          image_time(size, 0.0) {}
};

// d(total)/d(distance[i][j]) contributions from the symmetric InfoNCE term,
// plus the log-temperature gradient.
void contrastive_adjoints(const BatchForward& fwd, std::vector<double>& dist_bar,
                          double& log_tau_bar, const EmbeddingTable& table) {
    const std::size_t B = fwd.size;
    const double tau = table.temperature();
    const double inv_2b = 1.0 / (2.0 * static_cast<double>(B));

    std::vector<double> row_softmax(B * B), col_softmax(B * B);
    for (std::size_t i = 0; i < B; ++i) {
        double lse = logsumexp(fwd.logits.data() + i * B, B, 1);
        for (std::size_t j = 0; j < B; ++j)
            row_softmax[i * B + j] = std::exp(fwd.logits[i * B + j] - lse);
    }
    for (std::size_t j = 0; j < B; ++j) {
        double lse = logsumexp(fwd.logits.data() + j, B, B);
        for (std::size_t i = 0; i < B; ++i)
            col_softmax[i * B + j] = std::exp(fwd.logits[i * B + j] - lse);
    }

    log_tau_bar = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            double delta = i == j ? 1.0 : 0.0;
            double logit_bar =
                inv_2b * (row_softmax[i * B + j] - delta) + inv_2b * (col_softmax[i * B + j] - delta);
            // logit = -dist/tau; d(logit)/d(log tau) = dist/tau.
            dist_bar[i * B + j] += logit_bar * (-1.0 / tau);
            log_tau_bar += logit_bar * fwd.dist[i * B + j] / tau;
        }
    }
}

// Adds the coordinate adjoints of dist_bar[i][j] * d dist(i,j)/d coords.
void distance_adjoints(const BatchForward& fwd, std::span<const double> dist_bar, double c,
                       CoordAdjoints& adj) {
    const std::size_t B = fwd.size;
    const std::size_t dim = fwd.dim;
    const double sqrt_c = std::sqrt(c);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            double bar = dist_bar[i * B + j];
            if (bar == 0.0) continue;
            double arg = fwd.acosh_arg[i * B + j];
            if (arg <= 1.0) continue;  // clamped branch is constant
            double dd_dinner = -sqrt_c / std::sqrt(arg * arg - 1.0);
            double phi = bar * dd_dinner;
            const double* x = fwd.tp(i);
            const double* y = fwd.ip(j);
            for (std::size_t d = 0; d < dim; ++d) {
                adj.text_space[i * dim + d] += phi * y[d];
                adj.image_space[j * dim + d] += phi * x[d];
            }
            adj.text_time[i] -= phi * y[dim];
            adj.image_time[j] -= phi * x[dim];
        }
    }
}

// Entailment hinge adjoints for the positive (diagonal) pairs.
void entailment_adjoints(const BatchForward& fwd, const TrainerConfig& config, double scale,
                         CoordAdjoints& adj) {
    const std::size_t B = fwd.size;
    const std::size_t dim = fwd.dim;
    const double c = config.curvature;

    for (std::size_t k = 0; k < B; ++k) {
        const double* x = fwd.tp(k);
        const double* y = fwd.ip(k);
        double beta = c * lorentz_inner_packed(x, y, dim);
        double gap = beta * beta - 1.0;
        if (gap <= 0.0) continue;  // coincident: loss pinned at 0

        double radius_sq = dot(x, x, dim);
        double radius = std::sqrt(radius_sq);
        double g = std::sqrt(gap);
        double num = y[dim] + x[dim] * beta;
        double den = radius * g;
        double w = num / den;

        double aperture_arg = 2.0 * config.cone_k / (std::sqrt(c) * radius);
        double aperture = std::asin(std::min(aperture_arg, 1.0));
        double ext = std::acos(std::clamp(w, -1.0, 1.0));
        if (ext - aperture <= 0.0) continue;  // hinge inactive

        // ext branch: d(acos w)/dw unless w is clamped.
        double dext_dw = 0.0;
        if (w > -1.0 && w < 1.0) dext_dw = -1.0 / std::sqrt(1.0 - w * w);

        double den_sq = den * den;
        double beta_over_g = beta / g;
        for (std::size_t d = 0; d < dim; ++d) {
            // d w / d x_space[d]
            double dnum = c * x[dim] * y[d];
            double dden = (x[d] / radius) * g + radius * beta_over_g * c * y[d];
            double dw = (dnum * den - num * dden) / den_sq;
            double grad = dext_dw * dw;
            // aperture branch only flows when asin is not clamped
            if (aperture_arg < 1.0) {
                double daper = -(aperture_arg / std::sqrt(1.0 - aperture_arg * aperture_arg)) *
                               x[d] / radius_sq;
                grad -= daper;
            }
            adj.text_space[k * dim + d] += scale * grad;

            // d w / d y_space[d]
            double dnum_y = c * x[dim] * x[d];
            double dden_y = radius * beta_over_g * c * x[d];
            adj.image_space[k * dim + d] +=
                scale * dext_dw * (dnum_y * den - num * dden_y) / den_sq;
        }
        // d w / d x_time
        {
            double dnum = beta - c * x[dim] * y[dim];
            double dden = radius * beta_over_g * (-c * y[dim]);
            adj.text_time[k] += scale * dext_dw * (dnum * den - num * dden) / den_sq;
        }
        // d w / d y_time
        {
            double dnum = 1.0 - c * x[dim] * x[dim];
            double dden = radius * beta_over_g * (-c * x[dim]);
            adj.image_time[k] += scale * dext_dw * (dnum * den - num * dden) / den_sq;
        }
    }
}

// Pulls one point's coordinate adjoints back through the exponential map to
// the scaled tangent z: zbar = g*sbar + (c*h*(z.sbar) + sqrt(c)*g*tbar) * z.
void pullback_exp_map(const double* z, std::size_t dim, double c, const double* space_bar,
                      double time_bar, double* z_bar_out) {
    double s_sq = dot(z, z, dim);
    double s = std::sqrt(s_sq);
    double r = std::sqrt(c) * s;
    double g = sinh_ratio(r);
    double h = sinh_ratio_slope(r);
    double z_dot_sbar = dot(z, space_bar, dim);
    double coeff = c * h * z_dot_sbar + std::sqrt(c) * g * time_bar;
    for (std::size_t d = 0; d < dim; ++d) z_bar_out[d] = g * space_bar[d] + coeff * z[d];
}

GradientTable grad_from_forward(const EmbeddingTable& table, std::span<const PositivePair> batch,
                                const TrainerConfig& config, const BatchForward& fwd) {
    const std::size_t B = fwd.size;
    const std::size_t dim = fwd.dim;
    const double c = config.curvature;
    const double alpha = table.alpha();

    GradientTable grads;
    grads.text.assign(table.text_params.size(), 0.0);
    grads.image.assign(table.image_params.size(), 0.0);

    std::vector<double> dist_bar(B * B, 0.0);
    contrastive_adjoints(fwd, dist_bar, grads.log_temperature, table);

    CoordAdjoints adj(B, dim);
    distance_adjoints(fwd, dist_bar, c, adj);
    entailment_adjoints(fwd, config, config.lambda_entail / static_cast<double>(B), adj);

    std::vector<double> z_bar(dim);
    for (std::size_t k = 0; k < B; ++k) {
        pullback_exp_map(fwd.tz(k), dim, c, adj.text_space.data() + k * dim, adj.text_time[k],
                         z_bar.data());
        double* row = grads.text.data() + std::size_t(batch[k].text_index) * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            row[d] += alpha * z_bar[d];
            grads.log_alpha += z_bar[d] * fwd.tz(k)[d];
        }

        pullback_exp_map(fwd.iz(k), dim, c, adj.image_space.data() + k * dim, adj.image_time[k],
                         z_bar.data());
        row = grads.image.data() + std::size_t(batch[k].image_index) * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            row[d] += alpha * z_bar[d];
            grads.log_alpha += z_bar[d] * fwd.iz(k)[d];
        }
    }
    return grads;
}

}  // namespace

ForwardPoints forward_points(const EmbeddingTable& table, Curvature curv) {
    ForwardPoints points;
    points.dim = table.dim;
    const double alpha = table.alpha();
    std::vector<double> z(table.dim);

    auto map_all = [&](const std::vector<double>& params, std::vector<double>& out) {
        std::size_t count = table.dim ? params.size() / table.dim : 0;
        out.resize(count * (table.dim + 1));
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t d = 0; d < table.dim; ++d) z[d] = alpha * params[i * table.dim + d];
            exp_map_origin_packed(z.data(), table.dim, curv.c, out.data() + i * (table.dim + 1));
        }
    };
    map_all(table.text_params, points.text_points);
    map_all(table.image_params, points.image_points);
    return points;
}

LossBreakdown total_loss(const EmbeddingTable& table, std::span<const PositivePair> batch,
                         const TrainerConfig& config) {
    if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
    BatchForward fwd = forward_batch(table, batch, config);
    return loss_from_forward(fwd, config);
}

GradientTable grad_total_loss(const EmbeddingTable& table, std::span<const PositivePair> batch,
                              const TrainerConfig& config) {
    if (batch.empty()) throw std::invalid_argument("grad_total_loss: empty batch");
    BatchForward fwd = forward_batch(table, batch, config);
    return grad_from_forward(table, batch, config, fwd);
}

FiniteDiffReport finite_diff_check(const EmbeddingTable& table,
                                   std::span<const PositivePair> batch,
                                   const TrainerConfig& config) {
    constexpr double kStep = 1e-5;
    GradientTable analytic = grad_total_loss(table, batch, config);

    EmbeddingTable probe = table;
    auto eval = [&]() { return total_loss(probe, batch, config).total; };

    FiniteDiffReport report;
    auto check = [&](double* slot, double analytic_value, const std::string& name) {
        double saved = *slot;
        *slot = saved + kStep;
        double up = eval();
        *slot = saved - kStep;
        double down = eval();
        *slot = saved;
        double numeric = (up - down) / (2.0 * kStep);
        double rel = std::fabs(analytic_value - numeric) /
                     std::max({std::fabs(analytic_value), std::fabs(numeric), 1e-6});
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = name;
        }
    };

    for (std::size_t i = 0; i < probe.text_params.size(); ++i)
        check(&probe.text_params[i], analytic.text[i],
              "text[" + std::to_string(i / table.dim) + "][" + std::to_string(i % table.dim) + "]");
    for (std::size_t i = 0; i < probe.image_params.size(); ++i)
        check(&probe.image_params[i], analytic.image[i],
              "image[" + std::to_string(i / table.dim) + "][" + std::to_string(i % table.dim) +
                  "]");
    check(&probe.log_alpha, analytic.log_alpha, "log_alpha");
    check(&probe.log_temperature, analytic.log_temperature, "log_temperature");
    return report;
}

EmbeddingTable init_table(const TrainerConfig& config, const SyntheticCorpus& corpus) {
    EmbeddingTable table;
    table.dim = config.dim;
    table.log_alpha = 0.5 * std::log(1.0 / static_cast<double>(config.dim));
    table.log_temperature = std::log(0.07);
    table.text_params.resize(corpus.text_count * config.dim);
    table.image_params.resize(corpus.image_count * config.dim);
    Rng rng(config.seed);
    for (double& v : table.text_params) v = rng.normal();
    for (double& v : table.image_params) v = rng.normal();
    return table;
}

TrainResult train(const TrainerConfig& config, const SyntheticCorpus& corpus) {
    if (corpus.pairs.empty()) throw std::invalid_argument("train: corpus has no positive pairs");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    TrainResult result;
    result.table = init_table(config, corpus);
    result.trace.reserve(config.steps);

    Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ull);
    std::vector<std::size_t> order(corpus.pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();  // trigger a shuffle on the first step

    std::vector<PositivePair> batch;
    const std::size_t batch_size = std::min(config.batch_size, corpus.pairs.size());

    for (std::size_t step = 0; step < config.steps; ++step) {
        batch.clear();
        while (batch.size() < batch_size) {
            if (cursor >= order.size()) {
                shuffle_rng.shuffle(order.begin(), order.end());
                cursor = 0;
            }
            batch.push_back(corpus.pairs[order[cursor++]]);
        }

        BatchForward fwd = forward_batch(result.table, batch, config);
        LossBreakdown loss = loss_from_forward(fwd, config);
        if (!std::isfinite(loss.total))
            throw divergence_error(step, "train: loss became non-finite");
        GradientTable grads = grad_from_forward(result.table, batch, config, fwd);

        const double lr = config.learning_rate;
        for (std::size_t i = 0; i < result.table.text_params.size(); ++i)
            result.table.text_params[i] -= lr * grads.text[i];
        for (std::size_t i = 0; i < result.table.image_params.size(); ++i)
            result.table.image_params[i] -= lr * grads.image[i];
        result.table.log_alpha -= lr * grads.log_alpha;
        result.table.log_temperature -= lr * grads.log_temperature;

        result.trace.push_back(loss);
    }
    return result;
}

SyntheticCorpus gen_synthetic_hierarchy(std::uint64_t seed, std::size_t categories,
                                        std::size_t images_per_category) {
    if (categories < 1) throw std::invalid_argument("gen_synthetic_hierarchy: need >= 1 category");
    if (images_per_category < 4)
        throw std::invalid_argument(
            "gen_synthetic_hierarchy: generic captions need >= 4 images per category");

    SyntheticCorpus corpus;
    corpus.image_count = categories * images_per_category;
    corpus.text_count = corpus.image_count + categories;
    corpus.text_labels.assign(corpus.text_count, TextLabel::specific);
    for (std::size_t cat = 0; cat < categories; ++cat)
        corpus.text_labels[corpus.image_count + cat] = TextLabel::generic;

    for (std::uint32_t img = 0; img < corpus.image_count; ++img)
        corpus.pairs.push_back({img, img});  // specific caption per image
    for (std::uint32_t cat = 0; cat < categories; ++cat)
        for (std::uint32_t j = 0; j < images_per_category; ++j)
            corpus.pairs.push_back(
                {static_cast<std::uint32_t>(corpus.image_count + cat),
                 static_cast<std::uint32_t>(cat * images_per_category + j)});

    Rng rng(seed);
    rng.shuffle(corpus.pairs.begin(), corpus.pairs.end());
    return corpus;
}

std::vector<PairRecord> corpus_to_records(const EmbeddingTable& table,
                                          const SyntheticCorpus& corpus) {
    const double alpha = table.alpha();
    std::vector<PairRecord> records;
    records.reserve(corpus.pairs.size());
    for (std::size_t p = 0; p < corpus.pairs.size(); ++p) {
        const PositivePair& pair = corpus.pairs[p];
        const double* t = table.text_row(pair.text_index);
        const double* im = table.image_row(pair.image_index);

        PairRecord rec;
        rec.id = p;
        rec.text_tangent.resize(table.dim);
        rec.image_tangent.resize(table.dim);
        for (std::size_t d = 0; d < table.dim; ++d) {
            rec.text_tangent[d] = static_cast<float>(alpha * t[d]);
            rec.image_tangent[d] = static_cast<float>(alpha * im[d]);
        }
        double tn = std::sqrt(dot(t, t, table.dim));
        double in = std::sqrt(dot(im, im, table.dim));
        rec.clip_cos =
            tn > 0.0 && in > 0.0 ? std::clamp(dot(t, im, table.dim) / (tn * in), -1.0, 1.0) : 0.0;
        rec.cin_flag = false;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace hype
