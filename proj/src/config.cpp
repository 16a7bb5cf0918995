#include "tmclab/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace tmclab {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw TmcError(ErrorCode::ConfigError,
                           where + ": unknown key '" + it.key() + "'");
}

double parse_probability(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        // fraction strings like "10/11" keep the fixture exact
        std::string s = v.get<std::string>();
        auto slash = s.find('/');
        if (slash == std::string::npos) return std::stod(s);
        return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    }
    throw TmcError(ErrorCode::ConfigError, where + ": probability must be a number or 'a/b'");
}

RawTopology parse_topology(const json& j, const std::string& where) {
    require_keys(j, where, {"layers", "edges", "sparse_threshold"});
    RawTopology raw;
    for (const auto& layer : j.at("layers"))
        raw.layers.push_back(layer.get<std::vector<std::string>>());
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 3)
            throw TmcError(ErrorCode::ConfigError, where + ": edges are [from, to, probability]");
        raw.edges.push_back({e[0].get<std::string>(), e[1].get<std::string>(),
                             parse_probability(e[2], where + ".edges")});
    }
    if (j.contains("sparse_threshold"))
        raw.sparse_threshold = j.at("sparse_threshold").get<double>();
    return raw;
}

EstimateMode parse_mode(const std::string& s, const std::string& where) {
    if (s == "exact") return EstimateMode::Exact;
    if (s == "mc") return EstimateMode::MonteCarlo;
    throw TmcError(ErrorCode::ConfigError, where + ": mode must be 'exact' or 'mc'");
}

void parse_pretrain(const json& j, ExperimentConfig& cfg) {
    require_keys(j, "pretrain",
                 {"eta", "t1", "t2", "c_thres", "mode", "target_max_abs_error",
                  "error_log_every"});
    if (j.contains("eta")) cfg.pretrain.eta = j.at("eta").get<double>();
    if (j.contains("t1")) cfg.pretrain.t1 = j.at("t1").get<size_t>();
    if (j.contains("t2")) cfg.pretrain.t2 = j.at("t2").get<size_t>();
    if (j.contains("c_thres")) cfg.pretrain.c_thres = j.at("c_thres").get<double>();
    if (j.contains("error_log_every"))
        cfg.pretrain.error_log_every = j.at("error_log_every").get<size_t>();
    if (j.contains("mode")) {
        std::string m = j.at("mode").get<std::string>();
        if (m == "population")
            cfg.pretrain.mode = PretrainMode::Population;
        else if (m == "sampled")
            cfg.pretrain.mode = PretrainMode::SampledPairs;
        else
            throw TmcError(ErrorCode::ConfigError, "pretrain.mode must be population|sampled");
    }
    if (j.contains("target_max_abs_error"))
        cfg.pretrain_target_error = j.at("target_max_abs_error").get<double>();
    if (cfg.pretrain.c_thres <= 0.0 || cfg.pretrain.c_thres >= 1.0)
        throw TmcError(ErrorCode::ConfigError, "pretrain.c_thres must lie in (0,1)");
}

void parse_finetune(const json& j, ExperimentConfig& cfg) {
    require_keys(j, "finetune",
                 {"algorithm", "eta", "iterations", "rollouts", "group_size", "clip_epsilon",
                  "forced_clip", "kl_beta", "rejection_epsilon", "rejection_criterion",
                  "rejection_g", "gradient_mode", "advantage_mode", "mc_value_samples",
                  "log_interval"});
    auto& f = cfg.finetune;
    if (j.contains("algorithm")) f.algorithm = algorithm_from_string(j.at("algorithm"));
    if (j.contains("eta")) f.eta = j.at("eta").get<double>();
    if (j.contains("iterations")) f.iterations = j.at("iterations").get<size_t>();
    if (j.contains("rollouts")) f.rollouts = j.at("rollouts").get<size_t>();
    if (j.contains("group_size")) f.group_size = j.at("group_size").get<size_t>();
    if (j.contains("clip_epsilon")) f.clip_epsilon = j.at("clip_epsilon").get<double>();
    if (j.contains("forced_clip")) f.forced_clip = j.at("forced_clip").get<bool>();
    if (j.contains("kl_beta")) f.kl_beta = j.at("kl_beta").get<double>();
    if (j.contains("rejection_epsilon"))
        f.rejection_epsilon = j.at("rejection_epsilon").get<double>();
    if (j.contains("rejection_criterion")) {
        std::string c = j.at("rejection_criterion").get<std::string>();
        if (c == "confidence")
            f.rejection_criterion = RejectionCriterion::Confidence;
        else if (c == "step_threshold")
            f.rejection_criterion = RejectionCriterion::StepThreshold;
        else
            throw TmcError(ErrorCode::ConfigError,
                           "finetune.rejection_criterion must be confidence|step_threshold");
    }
    if (j.contains("rejection_g")) f.rejection_g = j.at("rejection_g").get<size_t>();
    if (j.contains("gradient_mode")) {
        std::string m = j.at("gradient_mode").get<std::string>();
        if (m == "sampled")
            f.gradient_mode = GradientMode::Sampled;
        else if (m == "population")
            f.gradient_mode = GradientMode::Population;
        else
            throw TmcError(ErrorCode::ConfigError,
                           "finetune.gradient_mode must be sampled|population");
    }
    if (j.contains("advantage_mode"))
        f.advantage_mode = parse_mode(j.at("advantage_mode"), "finetune.advantage_mode");
    if (j.contains("mc_value_samples"))
        f.mc_value_samples = j.at("mc_value_samples").get<size_t>();
    if (j.contains("log_interval")) f.log_interval = j.at("log_interval").get<size_t>();
    f.validate();
}

void parse_inference(const json& j, ExperimentConfig& cfg) {
    require_keys(j, "inference",
                 {"sampler", "n", "beam", "lambda", "reward", "reward_mode",
                  "mc_reward_samples", "reward_noise_std"});
    auto& inf = cfg.inference;
    if (j.contains("sampler")) inf.sampler = j.at("sampler").get<std::string>();
    if (j.contains("n")) inf.n = j.at("n").get<size_t>();
    if (j.contains("beam")) inf.beam = j.at("beam").get<size_t>();
    if (j.contains("lambda")) inf.lambda = j.at("lambda").get<double>();
    if (j.contains("reward")) inf.reward = j.at("reward").get<std::string>();
    if (j.contains("reward_mode"))
        inf.reward_mode = parse_mode(j.at("reward_mode"), "inference.reward_mode");
    if (j.contains("mc_reward_samples"))
        inf.mc_reward_samples = j.at("mc_reward_samples").get<size_t>();
    if (j.contains("reward_noise_std"))
        inf.reward_noise_std = j.at("reward_noise_std").get<double>();
    static const std::set<std::string> samplers = {"soft_bon", "bon_orm",  "bon_prm",
                                                   "beam",     "dprm_bon", "dprm_as"};
    if (!samplers.count(inf.sampler))
        throw TmcError(ErrorCode::ConfigError, "inference.sampler '" + inf.sampler + "' unknown");
    static const std::set<std::string> rewards = {"orm_population", "prm_likelihood",
                                                  "prm_potential", "dprm"};
    if (!rewards.count(inf.reward))
        throw TmcError(ErrorCode::ConfigError, "inference.reward '" + inf.reward + "' unknown");
}

void parse_eval(const json& j, ExperimentConfig& cfg) {
    require_keys(j, "eval", {"trials", "pass_k", "coverage_samples"});
    if (j.contains("trials")) cfg.eval.trials = j.at("trials").get<size_t>();
    if (j.contains("pass_k")) cfg.eval.pass_k = j.at("pass_k").get<size_t>();
    if (j.contains("coverage_samples"))
        cfg.eval.coverage_samples = j.at("coverage_samples").get<size_t>();
}

ExperimentConfig parse_document(const json& doc, const std::string& path) {
    require_keys(doc, path,
                 {"schema_version", "master_seed", "topology", "topology_file", "tasks",
                  "target_task", "pretrain", "finetune", "inference", "eval"});
    if (!doc.contains("schema_version"))
        throw TmcError(ErrorCode::ConfigError, path + ": missing schema_version");
    if (doc.at("schema_version").get<int>() != 1)
        throw TmcError(ErrorCode::ConfigError, path + ": unsupported schema_version");

    ExperimentConfig cfg = builtin_fixture_config();
    cfg.config_hash = fnv1a64(doc.dump());
    if (doc.contains("master_seed")) cfg.master_seed = doc.at("master_seed").get<uint64_t>();

    if (doc.contains("topology_file")) {
        std::string tpath = doc.at("topology_file").get<std::string>();
        std::ifstream in(tpath);
        if (!in) throw TmcError(ErrorCode::IoError, path + ": cannot read '" + tpath + "'");
        json tdoc = json::parse(in);
        cfg.topology = parse_topology(tdoc, tpath);
    } else if (doc.contains("topology")) {
        cfg.topology = parse_topology(doc.at("topology"), path + ".topology");
    }

    if (doc.contains("tasks")) {
        cfg.tasks.clear();
        for (const auto& t : doc.at("tasks")) {
            require_keys(t, path + ".tasks[]", {"id", "question", "answer", "valid_cots"});
            TaskConfig tc;
            tc.id = t.at("id").get<std::string>();
            tc.question = t.at("question").get<std::string>();
            tc.answer = t.at("answer").get<std::string>();
            if (t.contains("valid_cots"))
                tc.explicit_valid =
                    t.at("valid_cots").get<std::vector<std::vector<std::string>>>();
            cfg.tasks.push_back(std::move(tc));
        }
    }
    if (doc.contains("target_task")) cfg.target_task = doc.at("target_task").get<std::string>();
    if (doc.contains("pretrain")) parse_pretrain(doc.at("pretrain"), cfg);
    if (doc.contains("finetune")) parse_finetune(doc.at("finetune"), cfg);
    if (doc.contains("inference")) parse_inference(doc.at("inference"), cfg);
    if (doc.contains("eval")) parse_eval(doc.at("eval"), cfg);
    return cfg;
}

} // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TmcError(ErrorCode::IoError, "cannot read config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw TmcError(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return parse_document(doc, path);
}

ExperimentConfig builtin_fixture_config() {
    ExperimentConfig cfg;
    cfg.master_seed = 7;
    cfg.topology = fixture_raw_topology();
    cfg.tasks = {{"TASK1", "s1_0", "s4_0", std::nullopt}, {"TASK2", "s1_1", "s4_1", std::nullopt}};
    cfg.target_task = "TASK1";
    cfg.pretrain = PretrainOptions{0.05, 2000, 500, 0.5, PretrainMode::Population, 50};
    cfg.pretrain_target_error = 0.001;
    cfg.finetune.eta = 0.05;
    cfg.finetune.iterations = 1000;
    cfg.finetune.rollouts = 1;
    cfg.finetune.group_size = 8;
    cfg.finetune.clip_epsilon = 0.2;
    cfg.finetune.forced_clip = true; // the simplified always-active-clip objective
    cfg.finetune.kl_beta = 3.0;
    cfg.finetune.rejection_epsilon = 0.1;
    cfg.finetune.rejection_criterion = RejectionCriterion::Confidence;
    cfg.finetune.rejection_g = 1;
    cfg.finetune.mc_value_samples = 1000;
    cfg.inference.n = 15;
    cfg.inference.beam = 2;
    cfg.inference.lambda = 0.5;
    cfg.inference.mc_reward_samples = 200;
    cfg.eval.trials = 200;
    cfg.eval.pass_k = 30;
    cfg.eval.coverage_samples = 20000;
    cfg.config_hash = fnv1a64("builtin-fixture-v1");
    return cfg;
}

Topology build_topology(const ExperimentConfig& cfg) { return validate_topology(cfg.topology); }

std::vector<TaskSpec> build_tasks(const ExperimentConfig& cfg, const Topology& topo) {
    std::vector<TaskSpec> tasks;
    for (const auto& tc : cfg.tasks) {
        if (tc.explicit_valid) {
            std::vector<Trajectory> valid;
            for (const auto& names : *tc.explicit_valid) {
                Trajectory t;
                for (const auto& n : names) t.push_back(topo.state(n));
                valid.push_back(std::move(t));
            }
            tasks.push_back(make_task(topo, tc.id, tc.question, tc.answer, &valid));
        } else {
            tasks.push_back(make_task(topo, tc.id, tc.question, tc.answer));
        }
    }
    return tasks;
}

std::string hash_hex(uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace tmclab
