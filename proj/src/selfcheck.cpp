#include "hype/selfcheck.hpp"

#include <cmath>
#include <ostream>
#include <vector>

#include "hype/lorentz.hpp"
#include "hype/rng.hpp"
#include "hype/trainer.hpp"

namespace hype {

namespace {

// Random tangent with radius <= min(5, 6.5/sqrt(c)); beyond that the stored
// f64 coordinates cannot satisfy a 1e-9 manifold residual at high curvature.
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
    if (norm > 0.0)
        for (double& x : v) x *= radius / norm;
    return v;
}

}  // namespace

bool run_selfcheck(std::ostream& out, std::uint64_t seed) {
    std::size_t checks = 0;
    std::size_t failures = 0;
    auto suite = [&](const char* name, auto&& body) {
        std::size_t before = failures;
        body();
        out << (failures == before ? "[pass] " : "[FAIL] ") << name << "\n";
    };
    auto expect = [&](bool ok) {
        ++checks;
        if (!ok) ++failures;
    };

    Rng rng(seed);

    suite("manifold membership (lift, exp map)", [&] {
        for (double c : {0.25, 1.0, 4.0}) {
            Curvature curv(c);
            for (std::size_t dim : {2ul, 16ul}) {
                for (int i = 0; i < 250; ++i) {
                    std::vector<double> v = random_tangent(rng, dim, c);
                    for (const LorentzPoint& p : {lift(v, curv), exp_map_origin(v, curv)}) {
                        double residual = std::fabs(c * lorentz_inner(p, p) + 1.0);
                        expect(residual <= 1e-9);
                    }
                }
            }
        }
    });

    suite("radial isometry of the exp map", [&] {
        for (double c : {0.25, 1.0, 4.0}) {
            Curvature curv(c);
            LorentzPoint origin = lorentz_origin(2, curv);
            for (int i = 0; i < 300; ++i) {
                std::vector<double> v = random_tangent(rng, 2, c);
                double norm = std::sqrt(dot(v.data(), v.data(), v.size()));
                double d = -neg_lorentz_distance(origin, exp_map_origin(v, curv), curv);
                expect(std::fabs(d - norm) <= 1e-9);
            }
        }
    });

    suite("exterior angle vs law-of-cosines oracle", [&] {
        Curvature curv(1.0);
        for (std::size_t dim : {2ul, 16ul}) {
            for (int i = 0; i < 500; ++i) {
                LorentzPoint x = exp_map_origin(random_tangent(rng, dim, curv.c), curv);
                LorentzPoint y = exp_map_origin(random_tangent(rng, dim, curv.c), curv);
                if (std::sqrt(dot(x.coords.data(), x.coords.data(), dim)) < 1e-6) continue;
                if (-neg_lorentz_distance(x, y, curv) < 1e-6) continue;
                double direct = exterior_angle(x, y, curv);
                double oracle = angle_oracle(x, y, curv);
                expect(std::fabs(direct - oracle) <= 1e-6 * std::max(1.0, std::fabs(oracle)));
            }
        }
    });

    suite("analytic gradients vs central differences", [&] {
        for (std::uint64_t s = 1; s <= 4; ++s) {
            SyntheticCorpus corpus = gen_synthetic_hierarchy(s, 1, 4);
            TrainerConfig config;
            config.dim = 2 + 2 * static_cast<std::size_t>(s % 2);
            config.seed = s;
            EmbeddingTable table = init_table(config, corpus);
            std::vector<PositivePair> batch(corpus.pairs.begin(),
                                            corpus.pairs.begin() + 4);
            expect(finite_diff_check(table, batch, config).max_rel_error < 1e-4);
        }
    });

    out << "selfcheck: " << (checks - failures) << "/" << checks << " checks passed\n";
    return failures == 0;
}

}  // namespace hype
