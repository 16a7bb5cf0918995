#include "tmclab/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tmclab/csv.hpp"
#include "tmclab/parallel.hpp"

namespace tmclab {

std::vector<Table1Row> run_table1(const ExperimentConfig& cfg) {
    Topology topo = build_topology(cfg);
    std::vector<Table1Row> rows;
    for (const auto& task : build_tasks(cfg, topo)) {
        for (size_t i = 0; i < task.valid_cots.size(); ++i) {
            Table1Row r;
            r.task = task.task_id;
            r.path_index = i;
            r.transition = trajectory_to_string(topo, task.valid_cots[i]);
            r.type = task.easy[i] ? "easy" : "hard";
            r.probability = task.path_prob[i];
            r.expected_correctness = task.p_acc[i];
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

const std::vector<std::string>& table2_strategies() {
    static const std::vector<std::string> s = {"base",    "reinforce", "raft",     "ppo",
                                               "rl_rej",  "grpo_kl",   "soft_bon", "orm_bon",
                                               "prm_bon", "dprm_bon",  "dprm_as"};
    return s;
}

PolicyParams train_strategy(const std::string& strategy, const PolicyParams& start,
                            const TaskSpec& task, const Topology& topo,
                            const ExperimentConfig& cfg, uint64_t seed, const MetricsSink& sink) {
    FinetuneConfig fc = cfg.finetune;
    fc.capability_m = topo.branching_m();
    if (strategy == "reinforce")
        fc.algorithm = Algorithm::Reinforce;
    else if (strategy == "raft")
        fc.algorithm = Algorithm::Raft;
    else if (strategy == "ppo")
        fc.algorithm = Algorithm::Ppo;
    else if (strategy == "rl_rej")
        fc.algorithm = Algorithm::RlRej;
    else if (strategy == "grpo_kl")
        fc.algorithm = Algorithm::Grpo;
    else
        throw TmcError(ErrorCode::ConfigError, "strategy '" + strategy + "' is not trainable");
    Rng rng(derive_seed(seed, "train/" + strategy));
    return run_finetune(start, task, fc, rng, sink);
}

namespace {

bool is_trained_strategy(const std::string& s) {
    return s == "reinforce" || s == "raft" || s == "ppo" || s == "rl_rej" || s == "grpo_kl";
}

} // namespace

Generator strategy_generator(const std::string& strategy, const PolicyParams& policy,
                             const PolicyParams& params_star, const TaskSpec& eval_task,
                             const ExperimentConfig& cfg) {
    size_t n = cfg.inference.n;
    double lambda = cfg.inference.lambda;
    if (strategy == "base") {
        // unconditioned generation from the policy's own root distribution
        return [&policy](Rng& rng) { return policy.sample_trajectory(rng); };
    }
    if (is_trained_strategy(strategy)) {
        StateId q = eval_task.question;
        return [&policy, q](Rng& rng) { return policy.sample_trajectory(q, rng); };
    }
    if (strategy == "soft_bon") {
        return [&params_star, &eval_task, n, lambda](Rng& rng) {
            return soft_bon(params_star, eval_task, n, lambda, rng);
        };
    }
    if (strategy == "orm_bon") {
        RewardModel rm{RewardKind::OrmPopulation, lambda, cfg.inference.reward_mode,
                       cfg.inference.mc_reward_samples, cfg.inference.reward_noise_std};
        return [&params_star, &eval_task, n, rm](Rng& rng) {
            return bon_orm(params_star, eval_task, n, rm, rng);
        };
    }
    if (strategy == "prm_bon") {
        RewardModel rm{RewardKind::PrmLikelihood, lambda, cfg.inference.reward_mode,
                       cfg.inference.mc_reward_samples, cfg.inference.reward_noise_std};
        return [&params_star, &eval_task, n, rm](Rng& rng) {
            return bon_prm_stepwise(params_star, eval_task, n, rm, rng);
        };
    }
    if (strategy == "dprm_bon") {
        RewardModel rm{RewardKind::Dprm, lambda, cfg.inference.reward_mode,
                       cfg.inference.mc_reward_samples, cfg.inference.reward_noise_std};
        return [&params_star, &eval_task, n, rm](Rng& rng) {
            return bon_prm_stepwise(params_star, eval_task, n, rm, rng);
        };
    }
    if (strategy == "dprm_as") {
        return [&params_star, &eval_task, lambda](Rng& rng) {
            return dprm_adjusted_sample(params_star, eval_task, lambda, rng);
        };
    }
    if (strategy == "beam") {
        RewardModel rm{RewardKind::PrmLikelihood, lambda, cfg.inference.reward_mode,
                       cfg.inference.mc_reward_samples, cfg.inference.reward_noise_std};
        size_t b = cfg.inference.beam;
        return [&params_star, &eval_task, n, b, rm](Rng& rng) {
            return beam_search(params_star, eval_task, n, b, rm, rng);
        };
    }
    throw TmcError(ErrorCode::ConfigError, "unknown strategy '" + strategy + "'");
}

std::vector<StrategyCell> run_table2(const ExperimentConfig& cfg, uint64_t seed, size_t threads) {
    Topology topo = build_topology(cfg);
    std::vector<TaskSpec> tasks = build_tasks(cfg, topo);
    PolicyParams star = exact_base_model(topo);

    const TaskSpec* target = nullptr;
    for (const auto& t : tasks)
        if (t.task_id == cfg.target_task) target = &t;
    if (!target) throw TmcError(ErrorCode::ConfigError,
                                "target_task '" + cfg.target_task + "' not in task list");

    const auto& strategies = table2_strategies();
    // phase 1: train the finetuned strategies (parallel, per-strategy seeds)
    std::map<std::string, PolicyParams> trained;
    std::vector<std::string> to_train;
    for (const auto& s : strategies)
        if (is_trained_strategy(s)) to_train.push_back(s);
    std::vector<PolicyParams> slots(to_train.size());
    parallel_for_indexed(to_train.size(), threads, [&](size_t i) {
        slots[i] = train_strategy(to_train[i], star, *target, topo, cfg, seed);
    });
    for (size_t i = 0; i < to_train.size(); ++i) trained[to_train[i]] = std::move(slots[i]);

    // phase 2: evaluate every (strategy, task) cell; instance streams are shared
    // across strategies, each strategy draws from its own stream
    struct CellSpec {
        std::string strategy;
        const TaskSpec* task;
    };
    std::vector<CellSpec> specs;
    for (const auto& s : strategies)
        for (const auto& t : tasks) specs.push_back({s, &t});
    std::vector<StrategyCell> cells(specs.size());
    parallel_for_indexed(specs.size(), threads, [&](size_t i) {
        const auto& sp = specs[i];
        const PolicyParams& pol = is_trained_strategy(sp.strategy) ? trained.at(sp.strategy)
                                                                   : star;
        Generator gen = strategy_generator(sp.strategy, pol, star, *sp.task, cfg);
        StrategyCell cell;
        cell.strategy = sp.strategy;
        cell.task = sp.task->task_id;
        // PRM-BoN and DPRM-BoN share a draw stream: same candidates, same argmax
        std::string draw_label = (sp.strategy == "prm_bon" || sp.strategy == "dprm_bon")
                                     ? "prm_bon_family"
                                     : sp.strategy;
        cell.coverage = coverage_stats(gen, topo, *sp.task, cfg.eval.coverage_samples,
                                       derive_seed(seed, "coverage/" + draw_label + "/" +
                                                             sp.task->task_id));
        cell.pass = pass_at_k(gen, *sp.task, cfg.eval.pass_k, cfg.eval.trials,
                              derive_seed(seed, "instances/" + sp.task->task_id),
                              derive_seed(seed, "pass/" + draw_label + "/" + sp.task->task_id));
        cells[i] = std::move(cell);
    });
    return cells;
}

void write_table1_csv(const std::vector<Table1Row>& rows, const std::string& path, uint64_t seed,
                      uint64_t config_hash) {
    CsvWriter w(path, {"task", "path_index", "transition", "type", "metric", "value", "stderr",
                       "seed", "config_hash"});
    for (const auto& r : rows) {
        w.write_row({r.task, std::to_string(r.path_index), r.transition, r.type, "probability",
                     fmt_double(r.probability), "0.000000", std::to_string(seed),
                     hash_hex(config_hash)});
        w.write_row({r.task, std::to_string(r.path_index), r.transition, r.type,
                     "expected_correctness", fmt_double(r.expected_correctness), "0.000000",
                     std::to_string(seed), hash_hex(config_hash)});
    }
}

namespace {

void write_cells(const std::vector<StrategyCell>& cells, const std::string& path, uint64_t seed,
                 uint64_t config_hash, bool coverage, bool pass) {
    CsvWriter w(path, {"strategy", "task", "metric", "value", "stderr", "seed", "config_hash"});
    auto se = [](double p, size_t n) {
        return std::sqrt(p * (1.0 - p) / double(n));
    };
    for (const auto& c : cells) {
        if (coverage) {
            size_t n = c.coverage.sample_count;
            w.write_row({c.strategy, c.task, "easy_share", fmt_double(c.coverage.easy_share),
                         fmt_double(se(c.coverage.easy_share, n)), std::to_string(seed),
                         hash_hex(config_hash)});
            w.write_row({c.strategy, c.task, "hard_share", fmt_double(c.coverage.hard_share),
                         fmt_double(se(c.coverage.hard_share, n)), std::to_string(seed),
                         hash_hex(config_hash)});
            w.write_row({c.strategy, c.task, "invalid_share",
                         fmt_double(c.coverage.invalid_share),
                         fmt_double(se(c.coverage.invalid_share, n)), std::to_string(seed),
                         hash_hex(config_hash)});
        }
        if (pass) {
            w.write_row({c.strategy, c.task, "pass_at_" + std::to_string(c.pass.k),
                         fmt_double(c.pass.success_rate), fmt_double(c.pass.standard_error),
                         std::to_string(seed), hash_hex(config_hash)});
        }
    }
}

} // namespace

void write_table2_csv(const std::vector<StrategyCell>& cells, const std::string& path,
                      uint64_t seed, uint64_t config_hash) {
    write_cells(cells, path, seed, config_hash, true, true);
}

void write_pass30_csv(const std::vector<StrategyCell>& cells, const std::string& path,
                      uint64_t seed, uint64_t config_hash) {
    write_cells(cells, path, seed, config_hash, false, true);
}

} // namespace tmclab
