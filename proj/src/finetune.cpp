#include "tmclab/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tmclab {

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "reinforce") return Algorithm::Reinforce;
    if (s == "raft") return Algorithm::Raft;
    if (s == "ppo") return Algorithm::Ppo;
    if (s == "grpo") return Algorithm::Grpo;
    if (s == "rl_rej") return Algorithm::RlRej;
    throw TmcError(ErrorCode::ConfigError, "unknown algorithm '" + s + "'");
}

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Reinforce: return "reinforce";
        case Algorithm::Raft: return "raft";
        case Algorithm::Ppo: return "ppo";
        case Algorithm::Grpo: return "grpo";
        case Algorithm::RlRej: return "rl_rej";
    }
    return "?";
}

void FinetuneConfig::validate() const {
    if (eta <= 0.0) throw TmcError(ErrorCode::ConfigError, "eta must be positive");
    if (rollouts == 0) throw TmcError(ErrorCode::ConfigError, "rollouts must be positive");
    if (algorithm == Algorithm::Grpo && group_size < 2)
        throw TmcError(ErrorCode::ConfigError, "GRPO needs group_size >= 2 (group std undefined)");
    if (clip_epsilon < 0.0) throw TmcError(ErrorCode::ConfigError, "clip_epsilon must be >= 0");
    if (kl_beta < 0.0) throw TmcError(ErrorCode::ConfigError, "kl_beta must be >= 0");
    if (rejection_epsilon < 0.0 || rejection_epsilon >= 1.0)
        throw TmcError(ErrorCode::ConfigError, "rejection_epsilon must lie in [0,1)");
    if (rejection_g == 0) throw TmcError(ErrorCode::ConfigError, "rejection_g must be >= 1");
}

namespace {

struct GradAccum {
    std::vector<double> g;
    size_t n = 0;
    explicit GradAccum(size_t states) : g(states * states, 0.0) {}
    void add_logprob_grad(const PolicyParams& p, const Trajectory& o, double weight,
                          size_t only_layer = size_t(-1)) {
        for (size_t l = 0; l + 1 < o.size(); ++l) {
            if (only_layer != size_t(-1) && l != only_layer) continue;
            StateId cur = o[l];
            const auto& nxt = p.next_layer(cur);
            auto dist = p.next_state_distribution(cur);
            for (size_t i = 0; i < nxt.size(); ++i) {
                if (p.masked(nxt[i], cur)) continue;
                double e = (nxt[i] == o[l + 1]) ? 1.0 : 0.0;
                g[nxt[i] * p.num_states() + cur] += weight * (e - dist[i]);
            }
        }
    }
    void apply(PolicyParams& p, double eta, size_t batch) const {
        double scale = eta / double(batch);
        for (size_t next = 0; next < p.num_states(); ++next)
            for (size_t cur = 0; cur < p.num_states(); ++cur)
                if (!p.masked(StateId(next), StateId(cur)))
                    p.add_logit(StateId(next), StateId(cur),
                                scale * g[next * p.num_states() + cur]);
    }
};

double step_log_prob(const PolicyParams& p, StateId cur, StateId next) {
    auto dist = p.next_state_distribution(cur);
    const auto& nxt = p.next_layer(cur);
    for (size_t i = 0; i < nxt.size(); ++i)
        if (nxt[i] == next) return std::log(dist[i]);
    return -HUGE_VAL;
}

double po_clip_weight(double adv, double clip_eps, bool forced) {
    if (!forced) return adv; // on-policy refresh: ratio 1, clip inactive
    return (1.0 + (adv >= 0.0 ? clip_eps : -clip_eps)) * adv;
}

// analytic KL(p_theta || p_ref) gradient contribution at one state column
void add_kl_gradient(GradAccum& acc, const PolicyParams& p, const PolicyParams& ref, StateId cur,
                     double beta) {
    auto dist = p.next_state_distribution(cur);
    auto rdist = ref.next_state_distribution(cur);
    const auto& nxt = p.next_layer(cur);
    double kl = 0.0;
    std::vector<double> ratio(nxt.size(), 0.0);
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        ratio[i] = std::log(dist[i] / rdist[i]);
        kl += dist[i] * ratio[i];
    }
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (p.masked(nxt[i], cur)) continue;
        acc.g[nxt[i] * p.num_states() + cur] += -beta * dist[i] * (ratio[i] - kl);
    }
}

} // namespace

PolicyParams reinforce_step(const PolicyParams& params, const TaskSpec& task,
                            const FinetuneConfig& config, Rng& rng) {
    GradAccum acc(params.num_states());
    for (size_t b = 0; b < config.rollouts; ++b) {
        Instance inst = sample_instance(task, rng);
        Trajectory o = params.sample_trajectory(task.question, rng);
        if (outcome_reward(task, inst, o)) acc.add_logprob_grad(params, o, 1.0);
    }
    PolicyParams out = params;
    acc.apply(out, config.eta, config.rollouts);
    return out;
}

PolicyParams raft_step(const PolicyParams& params, const TaskSpec& task,
                       const FinetuneConfig& config, Rng& rng) {
    GradAccum acc(params.num_states());
    for (size_t b = 0; b < config.rollouts; ++b) {
        Instance inst = sample_instance(task, rng);
        Trajectory o = params.sample_trajectory(task.question, rng);
        if (!outcome_reward(task, inst, o)) continue;
        for (size_t l = 0; l + 1 < o.size(); ++l) {
            double w = 1.0 + step_log_prob(params, o[l], o[l + 1]);
            acc.add_logprob_grad(params, o, w, l);
        }
    }
    PolicyParams out = params;
    acc.apply(out, config.eta, config.rollouts);
    return out;
}

PolicyParams ppo_clip_step(const PolicyParams& params, const TaskSpec& task,
                           const FinetuneConfig& config, Rng& rng) {
    GradAccum acc(params.num_states());
    EstimateOptions opts{config.advantage_mode, config.mc_value_samples};
    for (size_t b = 0; b < config.rollouts; ++b) {
        Trajectory o = params.sample_trajectory(task.question, rng);
        for (size_t l = 0; l + 1 < o.size(); ++l) {
            Trajectory prefix(o.begin(), o.begin() + long(l) + 1);
            double adv = estimate_advantage(params, task, prefix, o[l + 1], opts, &rng);
            acc.add_logprob_grad(params, o, po_clip_weight(adv, config.clip_epsilon,
                                                           config.forced_clip),
                                 l);
        }
    }
    PolicyParams out = params;
    acc.apply(out, config.eta, config.rollouts);
    return out;
}

PolicyParams grpo_step(const PolicyParams& params, const PolicyParams& params_ref,
                       const TaskSpec& task, const FinetuneConfig& config, Rng& rng) {
    if (config.group_size < 2)
        throw TmcError(ErrorCode::DegenerateGroup, "GRPO needs group_size >= 2");
    GradAccum acc(params.num_states());
    Instance inst = sample_instance(task, rng);
    std::vector<Trajectory> group;
    std::vector<double> rewards;
    for (size_t i = 0; i < config.group_size; ++i) {
        group.push_back(params.sample_trajectory(task.question, rng));
        rewards.push_back(outcome_reward(task, inst, group.back()));
    }
    double mu = std::accumulate(rewards.begin(), rewards.end(), 0.0) / double(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mu) * (r - mu);
    double sigma = std::sqrt(var / double(rewards.size()));
    for (size_t i = 0; i < group.size(); ++i) {
        double a_hat = sigma > 0.0 ? (rewards[i] - mu) / sigma : 0.0; // sigma=0 => no signal
        if (a_hat != 0.0)
            acc.add_logprob_grad(params, group[i],
                                 po_clip_weight(a_hat, config.clip_epsilon, config.forced_clip) /
                                     double(group.size()));
    }
    if (config.kl_beta > 0.0) {
        std::vector<char> visited(params.num_states(), 0);
        for (const auto& o : group)
            for (size_t l = 0; l + 1 < o.size(); ++l) visited[o[l]] = 1;
        for (StateId s = 0; s < params.num_states(); ++s)
            if (visited[s]) add_kl_gradient(acc, params, params_ref, s, config.kl_beta);
    }
    PolicyParams out = params;
    acc.apply(out, config.eta, 1);
    return out;
}

std::vector<BatchElement> rl_rej_filter(const PolicyParams& params, const TaskSpec& task,
                                        const std::vector<BatchElement>& batch, double epsilon,
                                        size_t M) {
    double thr = (1.0 - epsilon) / double(M);
    std::vector<BatchElement> kept;
    for (const auto& el : batch) {
        bool correct = outcome_reward(task, el.instance, el.trajectory) == 1;
        if (correct) {
            bool confident = true;
            for (size_t l = 0; l + 1 < el.trajectory.size(); ++l) {
                auto dist = params.next_state_distribution(el.trajectory[l]);
                const auto& nxt = params.next_layer(el.trajectory[l]);
                size_t idx = size_t(std::find(nxt.begin(), nxt.end(), el.trajectory[l + 1]) -
                                    nxt.begin());
                if (dist[idx] <= thr) {
                    confident = false;
                    break;
                }
            }
            if (confident) continue;
        }
        kept.push_back(el);
    }
    return kept;
}

namespace {

// instance rejected when the model's chance of sampling a correct CoT, raised to the
// G parallel attempts, clears ((1-eps)/M)^G
bool confident_on_instance(const PolicyParams& params, const TaskSpec& task, const Instance& inst,
                           double epsilon, size_t g, size_t M) {
    double mass = 0.0;
    for (size_t i = 0; i < task.valid_cots.size(); ++i)
        if (inst.correct[i]) mass += params.trajectory_probability(task.valid_cots[i]);
    double thr = (1.0 - epsilon) / double(M);
    return std::pow(mass, double(g)) > std::pow(thr, double(g));
}

PolicyParams rl_rej_step(const PolicyParams& params, const TaskSpec& task,
                         const FinetuneConfig& config, Rng& rng, size_t M) {
    GradAccum acc(params.num_states());
    for (size_t b = 0; b < config.rollouts; ++b) {
        Instance inst = sample_instance(task, rng);
        if (config.rejection_criterion == RejectionCriterion::Confidence) {
            if (confident_on_instance(params, task, inst, config.rejection_epsilon,
                                      config.rejection_g, M))
                continue;
            Trajectory o = params.sample_trajectory(task.question, rng);
            if (outcome_reward(task, inst, o)) acc.add_logprob_grad(params, o, 1.0);
        } else {
            Trajectory o = params.sample_trajectory(task.question, rng);
            auto kept = rl_rej_filter(params, task, {{inst, o}}, config.rejection_epsilon, M);
            for (const auto& el : kept)
                if (outcome_reward(task, el.instance, el.trajectory))
                    acc.add_logprob_grad(params, el.trajectory, 1.0);
        }
    }
    PolicyParams out = params;
    acc.apply(out, config.eta, config.rollouts);
    return out;
}

template <typename PerPathWeight>
PolicyParams weighted_population_step(const PolicyParams& params, const TaskSpec& task, double eta,
                                      PerPathWeight&& weight_at) {
    GradAccum acc(params.num_states());
    for (size_t i = 0; i < task.valid_cots.size(); ++i) {
        const Trajectory& o = task.valid_cots[i];
        double p = params.trajectory_probability(o);
        if (p == 0.0) continue;
        for (size_t l = 0; l + 1 < o.size(); ++l)
            acc.add_logprob_grad(params, o, p * weight_at(i, o, l), l);
    }
    PolicyParams out = params;
    acc.apply(out, eta, 1);
    return out;
}

} // namespace

PolicyParams reinforce_population_step(const PolicyParams& params, const TaskSpec& task,
                                       double eta) {
    return weighted_population_step(params, task, eta,
                                    [&](size_t i, const Trajectory&, size_t) {
                                        return task.p_acc[i];
                                    });
}

PolicyParams raft_population_step(const PolicyParams& params, const TaskSpec& task, double eta) {
    return weighted_population_step(
        params, task, eta, [&](size_t i, const Trajectory& o, size_t l) {
            return task.p_acc[i] * (1.0 + step_log_prob(params, o[l], o[l + 1]));
        });
}

PolicyParams po_population_step(const PolicyParams& params, const TaskSpec& task,
                                const FinetuneConfig& config) {
    AdvantageTable table = build_advantage_table(params, task);
    GradAccum acc(params.num_states());
    // expectation over the policy's own trajectories from the question state
    Trajectory prefix{task.question};
    auto rec = [&](auto&& self, Trajectory& pre, double reach) -> void {
        StateId tail = pre.back();
        if (params.is_terminal(tail)) return;
        auto dist = params.next_state_distribution(tail);
        const auto& nxt = params.next_layer(tail);
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (dist[i] == 0.0) continue;
            double adv = table.advantage(pre, nxt[i]);
            double w = po_clip_weight(adv, config.clip_epsilon, config.forced_clip);
            // grad of log p(next|tail) weighted by reach probability
            for (size_t j = 0; j < nxt.size(); ++j) {
                if (params.masked(nxt[j], tail)) continue;
                double e = (j == i) ? 1.0 : 0.0;
                acc.g[nxt[j] * params.num_states() + tail] += reach * dist[i] * w * (e - dist[j]);
            }
            pre.push_back(nxt[i]);
            self(self, pre, reach * dist[i]);
            pre.pop_back();
        }
    };
    rec(rec, prefix, 1.0);
    PolicyParams out = params;
    acc.apply(out, config.eta, 1);
    return out;
}

std::vector<double> reinforce_population_gradient(const PolicyParams& params,
                                                  const TaskSpec& task) {
    GradAccum acc(params.num_states());
    for (size_t i = 0; i < task.valid_cots.size(); ++i) {
        const Trajectory& o = task.valid_cots[i];
        double p = params.trajectory_probability(o);
        if (p > 0.0) acc.add_logprob_grad(params, o, p * task.p_acc[i]);
    }
    return acc.g;
}

namespace {

void exact_shares(const PolicyParams& params, const TaskSpec& task, MetricsRow& row) {
    double e = 0.0, h = 0.0;
    auto rec = [&](auto&& self, Trajectory& pre, double pr) -> void {
        StateId tail = pre.back();
        if (params.is_terminal(tail)) {
            size_t i = task.find_cot(pre);
            if (i != TaskSpec::npos) (task.easy[i] ? e : h) += pr;
            if (pr > 0.0) row.entropy -= pr * std::log(pr);
            return;
        }
        auto dist = params.next_state_distribution(tail);
        const auto& nxt = params.next_layer(tail);
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (dist[i] == 0.0) continue;
            pre.push_back(nxt[i]);
            self(self, pre, pr * dist[i]);
            pre.pop_back();
        }
    };
    Trajectory pre{task.question};
    row.entropy = 0.0;
    rec(rec, pre, 1.0);
    row.easy_share = e;
    row.hard_share = h;
    row.invalid_share = 1.0 - e - h;
}

} // namespace

PolicyParams run_finetune(const PolicyParams& start, const TaskSpec& task,
                          const FinetuneConfig& config, Rng& rng, const MetricsSink& sink) {
    config.validate();
    PolicyParams params = start;
    PolicyParams reference = start; // KL anchor is the starting (base) model
    size_t M = config.capability_m;
    if (M == 0)
        for (size_t l = 0; l + 1 < params.num_layers(); ++l)
            M = std::max(M, params.layers()[l + 1].size());
    for (size_t t = 0; t < config.iterations; ++t) {
        switch (config.algorithm) {
            case Algorithm::Reinforce:
                params = config.gradient_mode == GradientMode::Population
                             ? reinforce_population_step(params, task, config.eta)
                             : reinforce_step(params, task, config, rng);
                break;
            case Algorithm::Raft:
                params = config.gradient_mode == GradientMode::Population
                             ? raft_population_step(params, task, config.eta)
                             : raft_step(params, task, config, rng);
                break;
            case Algorithm::Ppo:
                params = config.gradient_mode == GradientMode::Population
                             ? po_population_step(params, task, config)
                             : ppo_clip_step(params, task, config, rng);
                break;
            case Algorithm::Grpo:
                params = grpo_step(params, reference, task, config, rng);
                break;
            case Algorithm::RlRej:
                params = rl_rej_step(params, task, config, rng, M);
                break;
        }
        if (sink && config.log_interval && (t % config.log_interval == 0 ||
                                            t + 1 == config.iterations)) {
            MetricsRow row;
            row.iteration = t;
            exact_shares(params, task, row);
            row.mean_reward = estimate_value(params, task, {task.question},
                                             {EstimateMode::Exact, 0});
            sink(row);
        }
    }
    return params;
}

Trajectory StepwisePolicy::sample(StateId root, Rng& rng) const {
    Trajectory t{root};
    while (!base->is_terminal(t.back())) {
        auto dist = next_dist(t);
        t.push_back(base->next_layer(t.back())[rng.categorical(dist)]);
    }
    return t;
}

double StepwisePolicy::trajectory_probability(const Trajectory& t) const {
    double p = 1.0;
    Trajectory prefix{t.front()};
    for (size_t l = 0; l + 1 < t.size(); ++l) {
        auto dist = next_dist(prefix);
        const auto& nxt = base->next_layer(t[l]);
        size_t idx = size_t(std::find(nxt.begin(), nxt.end(), t[l + 1]) - nxt.begin());
        p *= dist[idx];
        prefix.push_back(t[l + 1]);
    }
    return p;
}

StepwisePolicy tilted_policy(const PolicyParams& params_star, const TaskSpec& task, double beta,
                             const AdvantageSource& advantage_source, double r_hat) {
    if (beta <= 0.0) throw TmcError(ErrorCode::ConfigError, "beta must be positive");
    (void)task;
    StepwisePolicy pol;
    pol.base = &params_star;
    pol.next_dist = [&params_star, advantage_source, beta, r_hat](const Trajectory& prefix) {
        StateId tail = prefix.back();
        auto dist = params_star.next_state_distribution(tail);
        const auto& nxt = params_star.next_layer(tail);
        std::vector<double> out(nxt.size(), 0.0);
        double z = 0.0;
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (dist[i] == 0.0) continue;
            out[i] = dist[i] * std::exp(r_hat * advantage_source(prefix, nxt[i]) / beta);
            z += out[i];
        }
        for (double& v : out) v /= z;
        return out;
    };
    return pol;
}

double tilted_policy_beta_bound(const PolicyParams& params_star, double eps_prime, double r_hat) {
    // beta > 2·r_hat·(L-1) / ln(1/(eps'·prod_l |D_l|)) keeps every nonzero path above eps'
    double prod = 1.0;
    size_t L = params_star.num_layers();
    // |D_l| realized as the max unmasked out-degree per layer
    for (size_t l = 0; l + 1 < L; ++l) {
        size_t d = 0;
        for (StateId cur : params_star.layers()[l]) {
            size_t k = 0;
            for (StateId nx : params_star.layers()[l + 1])
                if (!params_star.masked(nx, cur)) ++k;
            d = std::max(d, k);
        }
        prod *= double(d);
    }
    double denom = std::log(1.0 / (eps_prime * prod));
    if (denom <= 0.0)
        throw TmcError(ErrorCode::ConfigError, "eps_prime too large for this topology");
    return 2.0 * r_hat * double(L - 1) / denom;
}

} // namespace tmclab
