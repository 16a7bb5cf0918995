#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tmclab/inference.hpp"

namespace tmclab {

// a seeded trajectory generator; each call may consume any amount of randomness
using Generator = std::function<Trajectory(Rng&)>;

struct CoverageStats {
    double easy_share = 0.0;
    double hard_share = 0.0;
    double invalid_share = 0.0;
    size_t sample_count = 0;
};

CoverageStats coverage_stats(const Generator& gen, const Topology& topo, const TaskSpec& task,
                             size_t samples, uint64_t seed, size_t threads = 1);

struct PassAtKResult {
    size_t k = 0;
    size_t trials = 0;
    double success_rate = 0.0;
    double standard_error = 0.0;
};

// Per trial: one fresh instance, K generator draws, success iff any lies in the
// correct set; unsolvable instances count as failures. The instance stream and the
// drawing stream are seeded separately so instances can be shared across strategies
// while each strategy keeps an independent sampler stream.
PassAtKResult pass_at_k(const Generator& gen, const TaskSpec& task, size_t k, size_t trials,
                        uint64_t instance_seed, uint64_t draw_seed, size_t threads = 1);

// shared-draw profile: success@k is monotone in k by construction
std::vector<PassAtKResult> pass_at_k_profile(const Generator& gen, const TaskSpec& task,
                                             const std::vector<size_t>& ks, size_t trials,
                                             uint64_t instance_seed, uint64_t draw_seed,
                                             size_t threads = 1);

// E over instances and one sampled trajectory of the outcome reward
double expected_correctness(const PolicyParams& policy, const TaskSpec& task, EstimateMode mode,
                            size_t mc_samples = 100000, Rng* rng = nullptr);

} // namespace tmclab
