#include <cmath>
#include <vector>

#include <doctest.h>

#include "hype/errors.hpp"
#include "hype/lorentz.hpp"
#include "hype/trainer.hpp"

using namespace hype;

namespace {

// Straightforward reimplementation of the loss through the public point API,
// kept independent of the batched internals it checks.
double naive_total_loss(const EmbeddingTable& table, std::span<const PositivePair> batch,
                        const TrainerConfig& config) {
    Curvature curv(config.curvature);
    ConeParams cone(config.cone_k);
    const double alpha = table.alpha();
    const double tau = table.temperature();
    const std::size_t B = batch.size();

    std::vector<LorentzPoint> texts, images;
    for (const PositivePair& pair : batch) {
        std::vector<double> zt(table.dim), zi(table.dim);
        for (std::size_t d = 0; d < table.dim; ++d) {
            zt[d] = alpha * table.text_row(pair.text_index)[d];
            zi[d] = alpha * table.image_row(pair.image_index)[d];
        }
        texts.push_back(exp_map_origin(zt, curv));
        images.push_back(exp_map_origin(zi, curv));
    }

    std::vector<std::vector<double>> logits(B, std::vector<double>(B));
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j)
            logits[i][j] = neg_lorentz_distance(texts[i], images[j], curv) / tau;

    double ce = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < B; ++j) denom += std::exp(logits[i][j]);
        ce += -std::log(std::exp(logits[i][i]) / denom);
    }
    for (std::size_t j = 0; j < B; ++j) {
        double denom = 0.0;
        for (std::size_t i = 0; i < B; ++i) denom += std::exp(logits[i][j]);
        ce += -std::log(std::exp(logits[j][j]) / denom);
    }
    double contrastive = ce / (2.0 * static_cast<double>(B));

    double entail = 0.0;
    for (std::size_t k = 0; k < B; ++k) entail += entailment_loss(texts[k], images[k], curv, cone);
    entail /= static_cast<double>(B);

    return contrastive + config.lambda_entail * entail;
}

EmbeddingTable tiny_table(std::size_t dim, std::vector<double> text, std::vector<double> image) {
    EmbeddingTable table;
    table.dim = dim;
    table.text_params = std::move(text);
    table.image_params = std::move(image);
    table.log_alpha = 0.0;
    return table;
}

}  // namespace

TEST_CASE("forward points") {
    TrainerConfig config;
    config.dim = 2;

    SUBCASE("zero parameters map to the origin") {
        EmbeddingTable table = tiny_table(2, {0.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
        ForwardPoints points = forward_points(table, Curvature(1.0));
        CHECK(points.text_point(0)[0] == 0.0);
        CHECK(points.text_point(0)[2] == 1.0);
        CHECK(points.image_point(1)[2] == 1.0);
    }

    SUBCASE("doubling alpha doubles the geodesic radius") {
        EmbeddingTable table = tiny_table(2, {0.8, 0.0}, {0.8, 0.0});
        Curvature c1(1.0);
        LorentzPoint origin = lorentz_origin(2, c1);
        ForwardPoints base = forward_points(table, c1);
        LorentzPoint p;
        p.coords.assign(base.text_point(0), base.text_point(0) + 3);
        double d1 = -neg_lorentz_distance(origin, p, c1);
        CHECK(d1 == doctest::Approx(0.8).epsilon(1e-12));

        table.log_alpha = std::log(2.0);
        ForwardPoints doubled = forward_points(table, c1);
        p.coords.assign(doubled.text_point(0), doubled.text_point(0) + 3);
        double d2 = -neg_lorentz_distance(origin, p, c1);
        CHECK(d2 == doctest::Approx(1.6).epsilon(1e-12));
    }

    SUBCASE("all outputs stay on the manifold") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(3, 2, 4);
        EmbeddingTable table = init_table(config, corpus);
        ForwardPoints points = forward_points(table, Curvature(1.0));
        for (std::size_t i = 0; i < corpus.text_count; ++i) {
            LorentzPoint p;
            p.coords.assign(points.text_point(i), points.text_point(i) + 3);
            CHECK(std::fabs(lorentz_inner(p, p) + 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("total loss") {
    TrainerConfig config;
    config.dim = 2;

    SUBCASE("batch of one has zero contrastive loss") {
        EmbeddingTable table = tiny_table(2, {0.7, 0.1}, {1.2, -0.4});
        std::vector<PositivePair> batch{{0, 0}};
        LossBreakdown loss = total_loss(table, batch, config);
        CHECK(loss.contrastive == doctest::Approx(0.0).epsilon(1e-15));
        Curvature c1(1.0);
        ConeParams cone(0.1);
        double alpha = table.alpha();
        LorentzPoint text = exp_map_origin(std::vector<double>{0.7 * alpha, 0.1 * alpha}, c1);
        LorentzPoint image = exp_map_origin(std::vector<double>{1.2 * alpha, -0.4 * alpha}, c1);
        CHECK(loss.entailment ==
              doctest::Approx(entailment_loss(text, image, c1, cone)).epsilon(1e-12));
        CHECK(loss.total == loss.contrastive + config.lambda_entail * loss.entailment);
    }

    SUBCASE("identical logits give ln(batch) rows") {
        EmbeddingTable table = tiny_table(2, {0.5, 0.2}, {0.9, -0.1});
        std::vector<PositivePair> batch{{0, 0}, {0, 0}, {0, 0}};
        LossBreakdown loss = total_loss(table, batch, config);
        CHECK(loss.contrastive == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }

    SUBCASE("matches the straightforward reimplementation") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(9, 1, 4);
        TrainerConfig cfg;
        cfg.dim = 2;
        cfg.seed = 9;
        EmbeddingTable table = init_table(cfg, corpus);
        std::vector<PositivePair> batch(corpus.pairs.begin(), corpus.pairs.begin() + 4);
        LossBreakdown loss = total_loss(table, batch, cfg);
        double naive = naive_total_loss(table, batch, cfg);
        CHECK(loss.total == doctest::Approx(naive).epsilon(1e-9));
        CHECK(loss.total == doctest::Approx(loss.contrastive +
                                            cfg.lambda_entail * loss.entailment)
                                .epsilon(1e-15));
    }
}

TEST_CASE("gradients") {
    SUBCASE("zero at a loss-free single-pair optimum") {
        TrainerConfig config;
        config.dim = 2;
        EmbeddingTable table = tiny_table(2, {1.0, 0.0}, {2.0, 0.0});
        std::vector<PositivePair> batch{{0, 0}};
        LossBreakdown loss = total_loss(table, batch, config);
        CHECK(loss.total == 0.0);
        GradientTable grads = grad_total_loss(table, batch, config);
        for (double g : grads.text) CHECK(g == 0.0);
        for (double g : grads.image) CHECK(g == 0.0);
        CHECK(grads.log_alpha == 0.0);
        CHECK(grads.log_temperature == 0.0);
    }

    SUBCASE("lambda zero leaves only the contrastive gradient") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(5, 1, 4);
        TrainerConfig with;
        with.dim = 2;
        with.seed = 5;
        TrainerConfig without = with;
        without.lambda_entail = 0.0;
        EmbeddingTable table = init_table(with, corpus);
        std::vector<PositivePair> batch(corpus.pairs.begin(), corpus.pairs.begin() + 4);

        GradientTable contrastive_only = grad_total_loss(table, batch, without);
        FiniteDiffReport report = finite_diff_check(table, batch, without);
        CHECK(report.max_rel_error < 1e-4);

        // and the full gradient differs once the hinge engages
        GradientTable full = grad_total_loss(table, batch, with);
        double diff = 0.0;
        for (std::size_t i = 0; i < full.text.size(); ++i)
            diff += std::fabs(full.text[i] - contrastive_only.text[i]);
        CHECK(diff > 0.0);
    }

    SUBCASE("matches central differences on seeded configurations") {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            SyntheticCorpus corpus = gen_synthetic_hierarchy(seed, 2, 4);
            TrainerConfig config;
            config.dim = seed % 2 == 0 ? 8 : 2;
            config.seed = seed;
            EmbeddingTable table = init_table(config, corpus);
            std::size_t batch_size = seed % 2 == 0 ? 8 : 2;
            std::vector<PositivePair> batch(corpus.pairs.begin(),
                                            corpus.pairs.begin() + batch_size);
            FiniteDiffReport report = finite_diff_check(table, batch, config);
            INFO("seed ", seed, " worst ", report.worst_coordinate);
            CHECK(report.max_rel_error < 1e-4);
        }
    }

    SUBCASE("a corrupted coordinate is flagged by the comparison") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(6, 1, 4);
        TrainerConfig config;
        config.dim = 2;
        config.seed = 6;
        EmbeddingTable table = init_table(config, corpus);
        std::vector<PositivePair> batch(corpus.pairs.begin(), corpus.pairs.begin() + 4);

        GradientTable analytic = grad_total_loss(table, batch, config);
        std::size_t worst = 0;
        for (std::size_t i = 1; i < analytic.text.size(); ++i)
            if (std::fabs(analytic.text[i]) > std::fabs(analytic.text[worst])) worst = i;
        REQUIRE(std::fabs(analytic.text[worst]) > 1e-3);
        double corrupted = analytic.text[worst] * 2.0;

        EmbeddingTable probe = table;
        const double h = 1e-5;
        probe.text_params[worst] += h;
        double up = total_loss(probe, batch, config).total;
        probe.text_params[worst] -= 2.0 * h;
        double down = total_loss(probe, batch, config).total;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::fabs(corrupted - numeric) /
                     std::max({std::fabs(corrupted), std::fabs(numeric), 1e-6});
        CHECK(rel > 1e-2);
    }

    SUBCASE("zero parameters stay finite") {
        TrainerConfig config;
        config.dim = 2;
        EmbeddingTable table = tiny_table(2, {0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
        std::vector<PositivePair> batch{{0, 0}, {1, 1}};
        FiniteDiffReport report = finite_diff_check(table, batch, config);
        CHECK(std::isfinite(report.max_rel_error));
        GradientTable grads = grad_total_loss(table, batch, config);
        for (double g : grads.text) CHECK(std::isfinite(g));
        CHECK(std::isfinite(grads.log_alpha));
    }
}

TEST_CASE("synthetic hierarchy generation") {
    SyntheticCorpus corpus = gen_synthetic_hierarchy(0, 2, 4);
    CHECK(corpus.image_count == 8);
    CHECK(corpus.text_count == 10);
    CHECK(corpus.pairs.size() == 16);

    std::size_t generic = 0, specific = 0;
    for (TextLabel label : corpus.text_labels)
        (label == TextLabel::generic ? generic : specific) += 1;
    CHECK(generic == 2);
    CHECK(specific == 8);

    std::vector<int> image_positive(corpus.image_count, 0);
    for (const PositivePair& pair : corpus.pairs) {
        REQUIRE(pair.text_index < corpus.text_count);
        REQUIRE(pair.image_index < corpus.image_count);
        ++image_positive[pair.image_index];
    }
    for (int count : image_positive) CHECK(count >= 1);

    SyntheticCorpus again = gen_synthetic_hierarchy(0, 2, 4);
    CHECK(again.pairs.size() == corpus.pairs.size());
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        CHECK(again.pairs[i].text_index == corpus.pairs[i].text_index);
        CHECK(again.pairs[i].image_index == corpus.pairs[i].image_index);
    }

    CHECK_THROWS_AS((void)gen_synthetic_hierarchy(0, 2, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_synthetic_hierarchy(0, 0, 4), std::invalid_argument);
}

TEST_CASE("training") {
    SUBCASE("zero steps leave the table at its initialisation") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(1, 1, 4);
        TrainerConfig config;
        config.dim = 2;
        config.seed = 1;
        config.steps = 0;
        TrainResult result = train(config, corpus);
        EmbeddingTable init = init_table(config, corpus);
        CHECK(result.trace.empty());
        CHECK(result.table.text_params == init.text_params);
        CHECK(result.table.image_params == init.image_params);
        CHECK(result.table.log_alpha == init.log_alpha);
    }

    SUBCASE("loss falls on a short run") {
        SyntheticCorpus corpus = gen_synthetic_hierarchy(0, 2, 4);
        TrainerConfig config;
        config.dim = 4;
        config.seed = 0;
        config.steps = 300;
        config.batch_size = 16;
        TrainResult result = train(config, corpus);
        LossBreakdown trained = total_loss(result.table, corpus.pairs, config);
        EmbeddingTable fresh = init_table(config, corpus);
        LossBreakdown start = total_loss(fresh, corpus.pairs, config);
        CHECK(trained.total < start.total);
        CHECK(trained.entailment < start.entailment);  // the hinge relaxes under lambda > 0
        CHECK(result.trace.size() == 300);
        for (const LossBreakdown& l : result.trace)
            CHECK(l.total == doctest::Approx(l.contrastive +
                                             config.lambda_entail * l.entailment)
                                 .epsilon(1e-12));

        // trained points stay on the manifold
        ForwardPoints points = forward_points(result.table, Curvature(config.curvature));
        for (std::size_t i = 0; i < corpus.text_count; ++i) {
            LorentzPoint p;
            p.coords.assign(points.text_point(i), points.text_point(i) + config.dim + 1);
            REQUIRE(std::fabs(config.curvature * lorentz_inner(p, p) + 1.0) <= 1e-7);
        }
        for (std::size_t i = 0; i < corpus.image_count; ++i) {
            LorentzPoint p;
            p.coords.assign(points.image_point(i), points.image_point(i) + config.dim + 1);
            REQUIRE(std::fabs(config.curvature * lorentz_inner(p, p) + 1.0) <= 1e-7);
        }
    }

    SUBCASE("a diverging run aborts with the step index") {
        // Gradient ascent overflows the exp map within a couple of steps.
        // Huge positive rates cannot serve here: they underflow alpha and
        // park every point on the flat all-at-origin plateau instead.
        SyntheticCorpus corpus = gen_synthetic_hierarchy(2, 1, 4);
        TrainerConfig config;
        config.dim = 2;
        config.seed = 2;
        config.steps = 200;
        config.learning_rate = -1.0;
        CHECK_THROWS_AS((void)train(config, corpus), divergence_error);
    }
}

TEST_CASE("corpus export to pipeline records") {
    SyntheticCorpus corpus = gen_synthetic_hierarchy(4, 2, 4);
    TrainerConfig config;
    config.dim = 4;
    config.seed = 4;
    EmbeddingTable table = init_table(config, corpus);
    std::vector<PairRecord> records = corpus_to_records(table, corpus);

    REQUIRE(records.size() == corpus.pairs.size());
    for (std::size_t p = 0; p < records.size(); ++p) {
        CHECK(records[p].id == p);
        CHECK(records[p].text_tangent.size() == 4);
        CHECK(records[p].clip_cos >= -1.0);
        CHECK(records[p].clip_cos <= 1.0);
        CHECK(records[p].cin_flag == false);
        const double* t = table.text_row(corpus.pairs[p].text_index);
        CHECK(records[p].text_tangent[0] ==
              doctest::Approx(table.alpha() * t[0]).epsilon(1e-6));
    }
}
