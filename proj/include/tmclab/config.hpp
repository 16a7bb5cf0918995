#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tmclab/eval.hpp"
#include "tmclab/pretrain.hpp"

namespace tmclab {

struct TaskConfig {
    std::string id;
    std::string question;
    std::string answer;
    std::optional<std::vector<std::vector<std::string>>> explicit_valid;
};

struct InferenceConfig {
    std::string sampler = "soft_bon"; // soft_bon | bon_orm | bon_prm | beam | dprm_bon | dprm_as
    size_t n = 15;
    size_t beam = 2;
    double lambda = 0.5;
    std::string reward = "prm_likelihood";
    EstimateMode reward_mode = EstimateMode::Exact;
    size_t mc_reward_samples = 200;
    double reward_noise_std = 0.0;
};

struct EvalConfig {
    size_t trials = 200;
    size_t pass_k = 30;
    size_t coverage_samples = 20000;
};

struct ExperimentConfig {
    uint64_t master_seed = 7;
    RawTopology topology;
    std::vector<TaskConfig> tasks;
    std::string target_task; // the finetuning / inference target
    PretrainOptions pretrain;
    double pretrain_target_error = 0.001;
    FinetuneConfig finetune;
    InferenceConfig inference;
    EvalConfig eval;

    uint64_t config_hash = 0; // stable hash of the loaded document
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig builtin_fixture_config(); // the bundled §5 setup

Topology build_topology(const ExperimentConfig& cfg);
std::vector<TaskSpec> build_tasks(const ExperimentConfig& cfg, const Topology& topo);

std::string hash_hex(uint64_t h);

} // namespace tmclab
