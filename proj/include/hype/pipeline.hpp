#pragma once

#include <span>
#include <vector>

#include "hype/scoring.hpp"
#include "hype/specificity.hpp"

namespace hype {

// Per-sample score terms: eps values against the reference sets, the pair's
// negative Lorentzian distance, and the stored clip_cos / encoded cin.
// Output order matches the dataset.
std::vector<SampleMetrics> compute_sample_metrics(std::span<const PairRecord> dataset,
                                                  const ReferenceSets& refs, Curvature curv,
                                                  ConeParams cone, const ParallelConfig& par = {});

}  // namespace hype
