#pragma once

#include <functional>
#include <map>

#include "tmclab/policy.hpp"

namespace tmclab {

enum class EstimateMode { Exact, MonteCarlo };

struct EstimateOptions {
    EstimateMode mode = EstimateMode::Exact;
    size_t mc_samples = 1000;
};

// V(prefix): expected outcome reward of completing prefix under the policy,
// with per-CoT correctness marginalized to p_acc. Exact mode enumerates all
// continuations; MC averages rollouts against freshly sampled instances.
double estimate_value(const PolicyParams& policy, const TaskSpec& task, const Trajectory& prefix,
                      const EstimateOptions& opts, Rng* rng = nullptr);

// A(prefix, next) = Q(prefix, next) - V(prefix)
double estimate_advantage(const PolicyParams& policy, const TaskSpec& task,
                          const Trajectory& prefix, StateId next, const EstimateOptions& opts,
                          Rng* rng = nullptr);

// exact advantages for every (prefix, unmasked successor) pair reachable from the
// task question, plus the value function per prefix
struct AdvantageTable {
    std::map<Trajectory, double> value_fn;
    std::map<std::pair<Trajectory, StateId>, double> values;

    double advantage(const Trajectory& prefix, StateId next) const {
        return values.at({prefix, next});
    }
};

AdvantageTable build_advantage_table(const PolicyParams& policy, const TaskSpec& task);

} // namespace tmclab
