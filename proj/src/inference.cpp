#include "tmclab/inference.hpp"

#include <algorithm>
#include <cmath>

namespace tmclab {

double orm_population(const TaskSpec& task, const Trajectory& t) {
    size_t i = task.find_cot(t);
    return i == TaskSpec::npos ? 0.0 : task.p_acc[i];
}

double prm_likelihood(const PolicyParams& params_star, const TaskSpec& task,
                      const Trajectory& prefix, EstimateMode mode, size_t mc_samples, Rng* rng) {
    if (prefix.front() != task.question) return 0.0; // off-question prefixes cannot succeed
    return estimate_value(params_star, task, prefix, {mode, mc_samples}, rng);
}

int prm_potential(const TaskSpec& task, const Trajectory& prefix) {
    for (const auto& cot : task.valid_cots)
        if (prefix.size() <= cot.size() &&
            std::equal(prefix.begin(), prefix.end(), cot.begin()))
            return 1;
    return 0;
}

double dprm_h(const PolicyParams& params_star, const TaskSpec& task, double lambda,
              const Trajectory& prefix, EstimateMode mode, size_t mc_samples, Rng* rng) {
    if (params_star.is_terminal(prefix.back()))
        return std::exp(lambda * orm_population(task, prefix));
    if (mode == EstimateMode::MonteCarlo) {
        if (!rng) throw TmcError(ErrorCode::ConfigError, "Monte Carlo h needs an rng");
        double sum = 0.0;
        for (size_t i = 0; i < mc_samples; ++i) {
            Trajectory o = prefix;
            StateId cur = o.back();
            while (!params_star.is_terminal(cur)) {
                auto dist = params_star.next_state_distribution(cur);
                cur = params_star.next_layer(cur)[rng->categorical(dist)];
                o.push_back(cur);
            }
            sum += std::exp(lambda * orm_population(task, o));
        }
        return sum / double(mc_samples);
    }
    auto dist = params_star.next_state_distribution(prefix.back());
    const auto& nxt = params_star.next_layer(prefix.back());
    double h = 0.0;
    Trajectory ext = prefix;
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (dist[i] == 0.0) continue;
        ext.push_back(nxt[i]);
        h += dist[i] * dprm_h(params_star, task, lambda, ext, EstimateMode::Exact);
        ext.pop_back();
    }
    return h;
}

double dprm_reward(const PolicyParams& params_star, const TaskSpec& task, double lambda,
                   const Trajectory& prefix) {
    if (lambda <= 0.0) throw TmcError(ErrorCode::ConfigError, "DPRM needs lambda > 0");
    return std::log(dprm_h(params_star, task, lambda, prefix)) / lambda;
}

StepwisePolicy dprm_adjusted_policy(const PolicyParams& params_star, const TaskSpec& task,
                                    double lambda) {
    StepwisePolicy pol;
    pol.base = &params_star;
    pol.next_dist = [&params_star, &task, lambda](const Trajectory& prefix) {
        auto dist = params_star.next_state_distribution(prefix.back());
        const auto& nxt = params_star.next_layer(prefix.back());
        std::vector<double> out(nxt.size(), 0.0);
        double z = 0.0;
        Trajectory ext = prefix;
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (dist[i] == 0.0) continue;
            ext.push_back(nxt[i]);
            out[i] = dist[i] * dprm_h(params_star, task, lambda, ext);
            ext.pop_back();
            z += out[i];
        }
        for (double& v : out) v /= z;
        return out;
    };
    return pol;
}

double GibbsTarget::prob_of(const Trajectory& t) const {
    for (size_t i = 0; i < trajectories.size(); ++i)
        if (trajectories[i] == t) return probability[i];
    return 0.0;
}

GibbsTarget gibbs_enumerate(const PolicyParams& params_star, const TaskSpec& task, double lambda,
                            size_t cap) {
    GibbsTarget g;
    g.lambda = lambda;
    Trajectory cur{task.question};
    auto rec = [&](auto&& self, double pr) -> void {
        if (params_star.is_terminal(cur.back())) {
            if (g.trajectories.size() >= cap)
                throw TmcError(ErrorCode::TreeTooLarge, "trajectory count exceeds the cap");
            g.trajectories.push_back(cur);
            g.probability.push_back(pr * std::exp(lambda * orm_population(task, cur)));
            return;
        }
        auto dist = params_star.next_state_distribution(cur.back());
        const auto& nxt = params_star.next_layer(cur.back());
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (dist[i] == 0.0) continue;
            cur.push_back(nxt[i]);
            self(self, pr * dist[i]);
            cur.pop_back();
        }
    };
    rec(rec, 1.0);
    double z = 0.0;
    for (double p : g.probability) z += p;
    for (double& p : g.probability) p /= z;
    return g;
}

double RewardModel::score(const PolicyParams& params_star, const TaskSpec& task,
                          const Trajectory& prefix, Rng* rng) const {
    double s = 0.0;
    switch (kind) {
        case RewardKind::OrmPopulation:
            if (mode == EstimateMode::MonteCarlo) {
                if (!rng) throw TmcError(ErrorCode::ConfigError, "MC ORM needs an rng");
                double sum = 0.0;
                for (size_t i = 0; i < mc_samples; ++i)
                    sum += outcome_reward(task, sample_instance(task, *rng), prefix);
                s = sum / double(mc_samples);
            } else {
                s = orm_population(task, prefix);
            }
            break;
        case RewardKind::PrmLikelihood:
            s = prm_likelihood(params_star, task, prefix, mode, mc_samples, rng);
            break;
        case RewardKind::PrmPotential:
            s = prm_potential(task, prefix);
            break;
        case RewardKind::Dprm:
            s = dprm_reward(params_star, task, lambda, prefix);
            break;
    }
    if (noise_std > 0.0) {
        if (!rng) throw TmcError(ErrorCode::ConfigError, "noisy scorer needs an rng");
        s += noise_std * rng->normal();
    }
    return s;
}

Trajectory bon_orm(const PolicyParams& params, const TaskSpec& task, size_t n,
                   const RewardModel& reward, Rng& rng) {
    if (n == 0) throw TmcError(ErrorCode::ConfigError, "N must be >= 1");
    Trajectory best;
    double best_score = -HUGE_VAL;
    for (size_t i = 0; i < n; ++i) {
        Trajectory o = params.sample_trajectory(task.question, rng);
        double s = reward.score(params, task, o, &rng);
        if (s > best_score) {
            best_score = s;
            best = std::move(o);
        }
    }
    return best;
}

Trajectory bon_prm_stepwise(const PolicyParams& params, const TaskSpec& task, size_t n,
                            const RewardModel& reward, Rng& rng) {
    if (n == 0) throw TmcError(ErrorCode::ConfigError, "N must be >= 1");
    Trajectory prefix{task.question};
    while (!params.is_terminal(prefix.back())) {
        auto dist = params.next_state_distribution(prefix.back());
        const auto& nxt = params.next_layer(prefix.back());
        size_t best_idx = size_t(-1);
        double best_score = -HUGE_VAL;
        for (size_t i = 0; i < n; ++i) {
            size_t idx = rng.categorical(dist);
            prefix.push_back(nxt[idx]);
            double s = reward.score(params, task, prefix, &rng);
            prefix.pop_back();
            if (s > best_score) {
                best_score = s;
                best_idx = idx;
            }
        }
        prefix.push_back(nxt[best_idx]);
    }
    return prefix;
}

Trajectory beam_search(const PolicyParams& params, const TaskSpec& task, size_t n, size_t b,
                       const RewardModel& reward, Rng& rng) {
    if (b == 0 || n < b) throw TmcError(ErrorCode::ConfigError, "need N >= B >= 1");
    struct Beam {
        Trajectory prefix;
        double score;
    };
    std::vector<Beam> beams{{Trajectory{task.question}, 0.0}};
    while (!params.is_terminal(beams.front().prefix.back())) {
        // N proposals per layer, spread round-robin across the current beams
        std::vector<Beam> cand;
        for (size_t i = 0; i < n; ++i) {
            const Beam& src = beams[i % beams.size()];
            auto dist = params.next_state_distribution(src.prefix.back());
            const auto& nxt = params.next_layer(src.prefix.back());
            Trajectory ext = src.prefix;
            ext.push_back(nxt[rng.categorical(dist)]);
            double s = reward.score(params, task, ext, &rng);
            cand.push_back({std::move(ext), s});
        }
        std::stable_sort(cand.begin(), cand.end(),
                         [](const Beam& x, const Beam& y) { return x.score > y.score; });
        cand.resize(std::min(b, cand.size()));
        beams = std::move(cand);
    }
    return beams.front().prefix; // stable sort keeps sampling-order tie-break
}

Trajectory soft_bon(const PolicyParams& params, const TaskSpec& task, size_t n, double lambda,
                    Rng& rng) {
    if (n == 0) throw TmcError(ErrorCode::ConfigError, "N must be >= 1");
    std::vector<Trajectory> samples;
    std::vector<double> logw(n);
    samples.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        samples.push_back(params.sample_trajectory(task.question, rng));
        logw[i] = lambda * orm_population(task, samples[i]);
    }
    double mx = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(n);
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) {
        w[i] = std::exp(logw[i] - mx);
        z += w[i];
    }
    for (double& v : w) v /= z;
    return samples[rng.categorical(w)];
}

Trajectory dprm_adjusted_sample(const PolicyParams& params_star, const TaskSpec& task,
                                double lambda, Rng& rng) {
    Trajectory prefix{task.question};
    while (!params_star.is_terminal(prefix.back())) {
        const auto& nxt = params_star.next_layer(prefix.back());
        auto base = params_star.next_state_distribution(prefix.back());
        std::vector<double> w(nxt.size(), 0.0);
        double z = 0.0;
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (base[i] == 0.0) continue; // candidates are the reachable successors
            prefix.push_back(nxt[i]);
            w[i] = dprm_h(params_star, task, lambda, prefix);
            prefix.pop_back();
            z += w[i];
        }
        for (double& v : w) v /= z;
        prefix.push_back(nxt[rng.categorical(w)]);
    }
    return prefix;
}

} // namespace tmclab
