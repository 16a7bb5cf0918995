#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tmclab/value.hpp"

namespace tmclab {

enum class Algorithm { Reinforce, Raft, Ppo, Grpo, RlRej };
enum class GradientMode { Sampled, Population };
enum class RejectionCriterion { Confidence, StepThreshold };

Algorithm algorithm_from_string(const std::string& s);
const char* algorithm_name(Algorithm a);

struct FinetuneConfig {
    Algorithm algorithm = Algorithm::Reinforce;
    double eta = 0.05;
    size_t iterations = 1000;
    size_t rollouts = 1;      // sampled-mode batch per iteration (instances x 1 rollout)
    size_t group_size = 8;    // GRPO G
    double clip_epsilon = 0.2;
    bool forced_clip = false; // simplified always-active-clip objective
    double kl_beta = 0.0;     // GRPO KL coefficient (0 disables)
    double rejection_epsilon = 0.1;
    RejectionCriterion rejection_criterion = RejectionCriterion::Confidence;
    size_t rejection_g = 1;   // parallel-rollout exponent of the confidence criterion
    GradientMode gradient_mode = GradientMode::Sampled;
    EstimateMode advantage_mode = EstimateMode::Exact;
    size_t mc_value_samples = 1000;
    size_t log_interval = 50;
    size_t capability_m = 0; // topology branching M; 0 derives it from layer widths

    void validate() const;
};

struct MetricsRow {
    size_t iteration = 0;
    double mean_reward = 0.0;
    double easy_share = 0.0;
    double hard_share = 0.0;
    double invalid_share = 0.0;
    double entropy = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

// single optimizer steps (pure: return the updated parameters)
PolicyParams reinforce_step(const PolicyParams& params, const TaskSpec& task,
                            const FinetuneConfig& config, Rng& rng);
PolicyParams raft_step(const PolicyParams& params, const TaskSpec& task,
                       const FinetuneConfig& config, Rng& rng);
PolicyParams ppo_clip_step(const PolicyParams& params, const TaskSpec& task,
                           const FinetuneConfig& config, Rng& rng);
PolicyParams grpo_step(const PolicyParams& params, const PolicyParams& params_ref,
                       const TaskSpec& task, const FinetuneConfig& config, Rng& rng);

// closed-form expected-gradient steps (enumeration over trajectories and instances)
PolicyParams reinforce_population_step(const PolicyParams& params, const TaskSpec& task,
                                       double eta);
PolicyParams raft_population_step(const PolicyParams& params, const TaskSpec& task, double eta);
PolicyParams po_population_step(const PolicyParams& params, const TaskSpec& task,
                                const FinetuneConfig& config);

// raw expected REINFORCE gradient on the logits (for oracle tests)
std::vector<double> reinforce_population_gradient(const PolicyParams& params,
                                                  const TaskSpec& task);

// Batch filter of the rejection antidote: drops every element whose trajectory is
// correct for its instance and confident (every step probability above (1-eps)/M).
struct BatchElement {
    Instance instance;
    Trajectory trajectory;
};
std::vector<BatchElement> rl_rej_filter(const PolicyParams& params, const TaskSpec& task,
                                        const std::vector<BatchElement>& batch, double epsilon,
                                        size_t M);

// full training loop; emits one metrics row every config.log_interval iterations
PolicyParams run_finetune(const PolicyParams& start, const TaskSpec& task,
                          const FinetuneConfig& config, Rng& rng,
                          const MetricsSink& sink = nullptr);

// A policy whose next-state distribution depends on the whole prefix.
struct StepwisePolicy {
    const PolicyParams* base = nullptr;
    std::function<std::vector<double>(const Trajectory& prefix)> next_dist;

    Trajectory sample(StateId root, Rng& rng) const;
    double trajectory_probability(const Trajectory& t) const;
};

// Closed-form KL-tilted optimum: p*(next|prefix) ∝ p̂_base(next|tail) · exp(r_hat·A(prefix,next)/beta).
using AdvantageSource = std::function<double(const Trajectory& prefix, StateId next)>;
StepwisePolicy tilted_policy(const PolicyParams& params_star, const TaskSpec& task, double beta,
                             const AdvantageSource& advantage_source, double r_hat = 1.0);

// beta floor that keeps every nonzero-kernel path above eps_prime
double tilted_policy_beta_bound(const PolicyParams& params_star, double eps_prime,
                                double r_hat = 1.0);

} // namespace tmclab
