#pragma once

#include "tmclab/config.hpp"

namespace tmclab {

struct Table1Row {
    std::string task;
    size_t path_index = 0;
    std::string transition;
    std::string type; // easy | hard
    double probability = 0.0;
    double expected_correctness = 0.0;
};

std::vector<Table1Row> run_table1(const ExperimentConfig& cfg);

struct StrategyCell {
    std::string strategy;
    std::string task;
    CoverageStats coverage;
    PassAtKResult pass;
};

// every Table 2 strategy on every task: coverage shares plus the pass@K column
std::vector<StrategyCell> run_table2(const ExperimentConfig& cfg, uint64_t seed, size_t threads);

// the canonical strategy order of the report
const std::vector<std::string>& table2_strategies();

void write_table1_csv(const std::vector<Table1Row>& rows, const std::string& path, uint64_t seed,
                      uint64_t config_hash);
void write_table2_csv(const std::vector<StrategyCell>& cells, const std::string& path,
                      uint64_t seed, uint64_t config_hash);
void write_pass30_csv(const std::vector<StrategyCell>& cells, const std::string& path,
                      uint64_t seed, uint64_t config_hash);

// trains the configured finetune algorithm from `start` for the config's target task
PolicyParams train_strategy(const std::string& strategy, const PolicyParams& start,
                            const TaskSpec& task, const Topology& topo,
                            const ExperimentConfig& cfg, uint64_t seed,
                            const MetricsSink& sink = nullptr);

// a rooted generator for one strategy evaluated against one task
Generator strategy_generator(const std::string& strategy, const PolicyParams& base_or_trained,
                             const PolicyParams& params_star, const TaskSpec& eval_task,
                             const ExperimentConfig& cfg);

} // namespace tmclab
