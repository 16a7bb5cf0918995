#include "tmclab/eval.hpp"

#include <cmath>

#include "tmclab/parallel.hpp"

namespace tmclab {

CoverageStats coverage_stats(const Generator& gen, const Topology& topo, const TaskSpec& task,
                             size_t samples, uint64_t seed, size_t threads) {
    if (samples == 0) throw TmcError(ErrorCode::ConfigError, "samples must be >= 1");
    struct Counts {
        size_t e = 0, h = 0, x = 0;
    };
    // chunk the draws so thread fan-out cannot reorder stream consumption
    const size_t chunk = 256;
    size_t nchunks = (samples + chunk - 1) / chunk;
    std::vector<Counts> slots(nchunks);
    parallel_for_indexed(nchunks, threads, [&](size_t c) {
        Rng rng(derive_seed(seed, "coverage", c));
        size_t lo = c * chunk, hi = std::min(samples, lo + chunk);
        for (size_t i = lo; i < hi; ++i) {
            Trajectory t = gen(rng);
            switch (classify_cot(topo, task, t)) {
                case CotClass::ValidEasy: ++slots[c].e; break;
                case CotClass::ValidHard: ++slots[c].h; break;
                case CotClass::Invalid: ++slots[c].x; break;
            }
        }
    });
    size_t e = 0, h = 0, x = 0;
    for (const auto& s : slots) {
        e += s.e;
        h += s.h;
        x += s.x;
    }
    CoverageStats out;
    out.sample_count = samples;
    out.easy_share = double(e) / double(samples);
    out.hard_share = double(h) / double(samples);
    out.invalid_share = double(x) / double(samples);
    return out;
}

std::vector<PassAtKResult> pass_at_k_profile(const Generator& gen, const TaskSpec& task,
                                             const std::vector<size_t>& ks, size_t trials,
                                             uint64_t instance_seed, uint64_t draw_seed,
                                             size_t threads) {
    size_t kmax = 0;
    for (size_t k : ks) {
        if (k == 0) throw TmcError(ErrorCode::ConfigError, "K must be >= 1");
        kmax = std::max(kmax, k);
    }
    // per trial: first success index among kmax draws (or kmax if none)
    std::vector<size_t> first_success(trials, 0);
    parallel_for_indexed(trials, threads, [&](size_t t) {
        Rng inst_rng(derive_seed(instance_seed, "instance", t));
        Rng draw_rng(derive_seed(draw_seed, "draws", t));
        Instance inst = sample_instance(task, inst_rng);
        size_t hit = kmax;
        for (size_t k = 0; k < kmax; ++k) {
            Trajectory o = gen(draw_rng);
            if (outcome_reward(task, inst, o)) {
                hit = k;
                break;
            }
        }
        first_success[t] = hit;
    });
    std::vector<PassAtKResult> out;
    for (size_t k : ks) {
        size_t succ = 0;
        for (size_t t = 0; t < trials; ++t)
            if (first_success[t] < k) ++succ;
        PassAtKResult r;
        r.k = k;
        r.trials = trials;
        r.success_rate = double(succ) / double(trials);
        r.standard_error = std::sqrt(r.success_rate * (1.0 - r.success_rate) / double(trials));
        out.push_back(r);
    }
    return out;
}

PassAtKResult pass_at_k(const Generator& gen, const TaskSpec& task, size_t k, size_t trials,
                        uint64_t instance_seed, uint64_t draw_seed, size_t threads) {
    return pass_at_k_profile(gen, task, {k}, trials, instance_seed, draw_seed, threads).front();
}

double expected_correctness(const PolicyParams& policy, const TaskSpec& task, EstimateMode mode,
                            size_t mc_samples, Rng* rng) {
    if (mode == EstimateMode::Exact) {
        double v = 0.0;
        for (size_t i = 0; i < task.valid_cots.size(); ++i)
            v += policy.trajectory_probability(task.valid_cots[i]) * task.p_acc[i];
        return v;
    }
    if (!rng) throw TmcError(ErrorCode::ConfigError, "Monte Carlo mode needs an rng");
    double sum = 0.0;
    for (size_t i = 0; i < mc_samples; ++i) {
        Instance inst = sample_instance(task, *rng);
        Trajectory o = policy.sample_trajectory(task.question, *rng);
        sum += outcome_reward(task, inst, o);
    }
    return sum / double(mc_samples);
}

} // namespace tmclab
