#pragma once

#include <map>

#include "tmclab/finetune.hpp"

namespace tmclab {

enum class RewardKind { OrmPopulation, PrmLikelihood, PrmPotential, Dprm };

struct RewardModel {
    RewardKind kind = RewardKind::OrmPopulation;
    double lambda = 0.5;                       // DPRM temperature
    EstimateMode mode = EstimateMode::Exact;   // exact is deterministic
    size_t mc_samples = 200;
    double noise_std = 0.0;                    // optional zero-mean scorer noise

    // score a full trajectory (ORM) or a prefix (PRM kinds)
    double score(const PolicyParams& params_star, const TaskSpec& task, const Trajectory& prefix,
                 Rng* rng = nullptr) const;
};

// population outcome reward: p_acc(t) for valid trajectories, else 0
double orm_population(const TaskSpec& task, const Trajectory& t);

// expected final correctness of the prefix under the base model (== estimate_value)
double prm_likelihood(const PolicyParams& params_star, const TaskSpec& task,
                      const Trajectory& prefix, EstimateMode mode = EstimateMode::Exact,
                      size_t mc_samples = 200, Rng* rng = nullptr);

// 1 iff some valid continuation of prefix reaches the answer over nonzero edges
int prm_potential(const TaskSpec& task, const Trajectory& prefix);

// Doob harmonic function h(prefix) = E[exp(lambda*R_out(o)) | prefix]
double dprm_h(const PolicyParams& params_star, const TaskSpec& task, double lambda,
              const Trajectory& prefix, EstimateMode mode = EstimateMode::Exact,
              size_t mc_samples = 200, Rng* rng = nullptr);

// R_DPRM(prefix) = (1/lambda) * log h(prefix)
double dprm_reward(const PolicyParams& params_star, const TaskSpec& task, double lambda,
                   const Trajectory& prefix);

// step-wise policy p̂·h(prefix+next)/h(prefix); induced trajectory law equals the Gibbs target
StepwisePolicy dprm_adjusted_policy(const PolicyParams& params_star, const TaskSpec& task,
                                    double lambda);

struct GibbsTarget {
    double lambda = 0.0;
    std::vector<Trajectory> trajectories; // all full trajectories from the task root
    std::vector<double> probability;      // sums to 1

    double prob_of(const Trajectory& t) const;
};

GibbsTarget gibbs_enumerate(const PolicyParams& params_star, const TaskSpec& task, double lambda,
                            size_t cap = 1u << 20);

// samplers; ties in every argmax break by sampling order
Trajectory bon_orm(const PolicyParams& params, const TaskSpec& task, size_t n,
                   const RewardModel& reward, Rng& rng);
Trajectory bon_prm_stepwise(const PolicyParams& params, const TaskSpec& task, size_t n,
                            const RewardModel& reward, Rng& rng);
Trajectory beam_search(const PolicyParams& params, const TaskSpec& task, size_t n, size_t b,
                       const RewardModel& reward, Rng& rng);
Trajectory soft_bon(const PolicyParams& params, const TaskSpec& task, size_t n, double lambda,
                    Rng& rng);

// DPRM adjusted sampling realized by step-wise soft selection over the successor
// candidates: next ~ softmax(lambda * R_DPRM(prefix + .))
Trajectory dprm_adjusted_sample(const PolicyParams& params_star, const TaskSpec& task,
                                double lambda, Rng& rng);

} // namespace tmclab
