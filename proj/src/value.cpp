#include "tmclab/value.hpp"

#include <algorithm>

namespace tmclab {

namespace {

double exact_value(const PolicyParams& policy, const TaskSpec& task, Trajectory& prefix) {
    StateId tail = prefix.back();
    if (policy.is_terminal(tail)) {
        size_t i = task.find_cot(prefix);
        return i == TaskSpec::npos ? 0.0 : task.p_acc[i];
    }
    auto dist = policy.next_state_distribution(tail);
    const auto& nxt = policy.next_layer(tail);
    double v = 0.0;
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (dist[i] == 0.0) continue;
        prefix.push_back(nxt[i]);
        v += dist[i] * exact_value(policy, task, prefix);
        prefix.pop_back();
    }
    return v;
}

Trajectory complete_rollout(const PolicyParams& policy, Trajectory prefix, Rng& rng) {
    StateId cur = prefix.back();
    while (!policy.is_terminal(cur)) {
        auto dist = policy.next_state_distribution(cur);
        cur = policy.next_layer(cur)[rng.categorical(dist)];
        prefix.push_back(cur);
    }
    return prefix;
}

} // namespace

double estimate_value(const PolicyParams& policy, const TaskSpec& task, const Trajectory& prefix,
                      const EstimateOptions& opts, Rng* rng) {
    if (prefix.empty() || prefix.front() != task.question)
        throw TmcError(ErrorCode::NotValidForTask, "prefix must start at the task question");
    if (opts.mode == EstimateMode::Exact) {
        Trajectory scratch = prefix;
        return exact_value(policy, task, scratch);
    }
    if (!rng) throw TmcError(ErrorCode::ConfigError, "Monte Carlo estimation needs an rng");
    double sum = 0.0;
    for (size_t i = 0; i < opts.mc_samples; ++i) {
        Instance inst = sample_instance(task, *rng);
        Trajectory o = complete_rollout(policy, prefix, *rng);
        sum += outcome_reward(task, inst, o);
    }
    return sum / double(opts.mc_samples);
}

double estimate_advantage(const PolicyParams& policy, const TaskSpec& task,
                          const Trajectory& prefix, StateId next, const EstimateOptions& opts,
                          Rng* rng) {
    Trajectory ext = prefix;
    ext.push_back(next);
    double q = estimate_value(policy, task, ext, opts, rng);
    double v = estimate_value(policy, task, prefix, opts, rng);
    return q - v;
}

AdvantageTable build_advantage_table(const PolicyParams& policy, const TaskSpec& task) {
    AdvantageTable table;
    EstimateOptions exact;
    Trajectory prefix{task.question};
    auto rec = [&](auto&& self, Trajectory& pre) -> void {
        double v = estimate_value(policy, task, pre, exact);
        table.value_fn[pre] = v;
        StateId tail = pre.back();
        if (policy.is_terminal(tail)) return;
        const auto& nxt = policy.next_layer(tail);
        auto dist = policy.next_state_distribution(tail);
        for (size_t i = 0; i < nxt.size(); ++i) {
            if (policy.masked(nxt[i], tail)) continue;
            pre.push_back(nxt[i]);
            double q = estimate_value(policy, task, pre, exact);
            table.values[{Trajectory(pre.begin(), pre.end() - 1), nxt[i]}] = q - v;
            if (dist[i] > 0.0) self(self, pre);
            pre.pop_back();
        }
    };
    rec(rec, prefix);
    return table;
}

} // namespace tmclab
