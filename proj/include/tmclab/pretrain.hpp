#pragma once

#include <optional>
#include <vector>

#include "tmclab/policy.hpp"

namespace tmclab {

enum class PretrainMode { Population, SampledPairs };

struct PretrainOptions {
    double eta = 0.0; // 0 means "use branching M" (the Θ(M) default)
    size_t t1 = 2000;
    size_t t2 = 500;
    double c_thres = 0.5;        // threshold factor; edges with p̂ < c_thres·c get masked
    PretrainMode mode = PretrainMode::Population;
    size_t error_log_every = 50; // phase-2 error trace stride
};

struct PretrainReport {
    size_t iterations_phase1 = 0;
    size_t iterations_phase2 = 0;
    double max_abs_error = 0.0;  // sup-norm gap over surviving edges
    size_t thresholded_edges = 0;
    std::vector<double> phase2_error_trace;
};

// Cross-entropy pretraining with thresholding. Starts from all-zero logits unless
// an initial parameter set is provided.
std::pair<PolicyParams, PretrainReport> pretrain(const Topology& topo, const PretrainOptions& opts,
                                                 Rng& rng,
                                                 const PolicyParams* init = nullptr);

} // namespace tmclab
