#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmclab/csv.hpp"
#include "tmclab/report.hpp"

namespace fs = std::filesystem;
using namespace tmclab;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool seed_set = false;
    size_t threads = 1;
    std::string mode = "exact";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = false) {
    auto* c = cmd->add_option("--config", o.config_path, "experiment config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "master seed override")->each([&](const std::string&) {
        o.seed_set = true;
    });
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--mode", o.mode, "exact|mc estimation mode")
        ->check(CLI::IsMember({"exact", "mc"}));
}

ExperimentConfig load_or_builtin(const CommonOpts& o) {
    ExperimentConfig cfg =
        o.config_path.empty() ? builtin_fixture_config() : load_experiment_config(o.config_path);
    if (o.seed_set) cfg.master_seed = o.seed;
    if (o.mode == "mc") {
        cfg.finetune.advantage_mode = EstimateMode::MonteCarlo;
        cfg.inference.reward_mode = EstimateMode::MonteCarlo;
    }
    return cfg;
}

void ensure_dir(const std::string& d) {
    std::error_code ec;
    fs::create_directories(d, ec);
}

std::string path_join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

PolicyParams load_checkpoint(const std::string& path, const Topology& topo) {
    std::ifstream in(path);
    if (!in) throw TmcError(ErrorCode::IoError, "cannot read checkpoint '" + path + "'");
    PolicyParams p = PolicyParams::load(in);
    if (p.topology_hash != topo.hash())
        throw TmcError(ErrorCode::ShapeMismatch,
                       "checkpoint topology hash does not match the configured topology");
    if (p.num_states() != topo.num_states())
        throw TmcError(ErrorCode::ShapeMismatch, "checkpoint state count mismatch");
    return p;
}

void save_checkpoint(const PolicyParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw TmcError(ErrorCode::IoError, "cannot write checkpoint '" + path + "'");
    p.save(out);
}

int cmd_validate(const CommonOpts& o) {
    ExperimentConfig cfg = load_or_builtin(o);
    Topology topo = build_topology(cfg);
    auto tasks = build_tasks(cfg, topo);
    size_t sparse = 0;
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l)
        for (StateId cur : topo.layer_states(l))
            for (StateId nx : topo.layer_states(l + 1))
                if (topo.edge_class(cur, nx) == EdgeClass::Sparse) ++sparse;
    std::cout << "topology: " << topo.num_states() << " states in " << topo.num_layers()
              << " layers, " << sparse << " sparse edges, M=" << topo.branching_m() << "\n";
    for (const auto& t : tasks) {
        size_t easy = 0;
        for (bool e : t.easy) easy += e;
        std::cout << "task " << t.task_id << ": " << t.valid_cots.size() << " valid CoTs ("
                  << easy << " easy)\n";
    }
    std::cout << "config_hash: " << hash_hex(cfg.config_hash) << "\n";
    return 0;
}

int cmd_pretrain(const CommonOpts& o) {
    ExperimentConfig cfg = load_or_builtin(o);
    ensure_dir(o.out_dir);
    Topology topo = build_topology(cfg);
    Rng rng(derive_seed(cfg.master_seed, "pretrain"));
    auto [params, report] = pretrain(topo, cfg.pretrain, rng);
    save_checkpoint(params, path_join(o.out_dir, "pretrained.ckpt"));
    CsvWriter w(path_join(o.out_dir, "pretrain_report.csv"),
                {"metric", "value", "seed", "config_hash"});
    w.write_row({"iterations_phase1", std::to_string(report.iterations_phase1),
                 std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    w.write_row({"iterations_phase2", std::to_string(report.iterations_phase2),
                 std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    w.write_row({"max_abs_error", fmt_double(report.max_abs_error, 9),
                 std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    w.write_row({"thresholded_edges", std::to_string(report.thresholded_edges),
                 std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    std::cout << "max_abs_error " << fmt_double(report.max_abs_error, 9) << " (target "
              << fmt_double(cfg.pretrain_target_error, 9) << ")\n";
    return report.max_abs_error < cfg.pretrain_target_error ? 0 : 3;
}

int cmd_finetune(const CommonOpts& o, const std::string& checkpoint) {
    ExperimentConfig cfg = load_or_builtin(o);
    ensure_dir(o.out_dir);
    Topology topo = build_topology(cfg);
    auto tasks = build_tasks(cfg, topo);
    const TaskSpec* target = nullptr;
    for (const auto& t : tasks)
        if (t.task_id == cfg.target_task) target = &t;
    if (!target)
        throw TmcError(ErrorCode::ConfigError, "target_task '" + cfg.target_task + "' unknown");
    PolicyParams start = checkpoint.empty() ? exact_base_model(topo)
                                            : load_checkpoint(checkpoint, topo);
    FinetuneConfig fc = cfg.finetune;
    fc.capability_m = topo.branching_m();
    CsvWriter w(path_join(o.out_dir, "finetune_metrics.csv"),
                {"iteration", "mean_reward", "easy_share", "hard_share", "invalid_share",
                 "entropy", "seed", "config_hash"});
    Rng rng(derive_seed(cfg.master_seed, "finetune"));
    PolicyParams out = run_finetune(start, *target, fc, rng, [&](const MetricsRow& r) {
        w.write_row({std::to_string(r.iteration), fmt_double(r.mean_reward),
                     fmt_double(r.easy_share), fmt_double(r.hard_share),
                     fmt_double(r.invalid_share), fmt_double(r.entropy),
                     std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    });
    save_checkpoint(out, path_join(o.out_dir, "finetuned.ckpt"));
    return 0;
}

int cmd_infer(const CommonOpts& o, const std::string& checkpoint) {
    ExperimentConfig cfg = load_or_builtin(o);
    ensure_dir(o.out_dir);
    Topology topo = build_topology(cfg);
    auto tasks = build_tasks(cfg, topo);
    PolicyParams star = checkpoint.empty() ? exact_base_model(topo)
                                           : load_checkpoint(checkpoint, topo);
    CsvWriter w(path_join(o.out_dir, "inference_trials.csv"),
                {"trial", "task", "sampler", "selected_path", "classification",
                 "instance_correct", "seed", "config_hash"});
    for (const auto& task : tasks) {
        std::string sampler = cfg.inference.sampler == "bon_prm" ? "prm_bon"
                                                                 : cfg.inference.sampler;
        if (sampler == "soft_bon" || sampler == "dprm_as" || sampler == "orm_bon" ||
            sampler == "prm_bon" || sampler == "dprm_bon" || sampler == "beam") {
            Generator gen = strategy_generator(sampler, star, star, task, cfg);
            for (size_t trial = 0; trial < cfg.eval.trials; ++trial) {
                Rng inst_rng(derive_seed(cfg.master_seed, "infer/instances/" + task.task_id,
                                         trial));
                Rng draw_rng(derive_seed(cfg.master_seed, "infer/draws/" + task.task_id, trial));
                Instance inst = sample_instance(task, inst_rng);
                Trajectory sel = gen(draw_rng);
                w.write_row({std::to_string(trial), task.task_id, sampler,
                             trajectory_to_string(topo, sel),
                             cot_class_name(classify_cot(topo, task, sel)),
                             std::to_string(outcome_reward(task, inst, sel)),
                             std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
            }
        }
    }
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& checkpoint) {
    ExperimentConfig cfg = load_or_builtin(o);
    ensure_dir(o.out_dir);
    Topology topo = build_topology(cfg);
    auto tasks = build_tasks(cfg, topo);
    PolicyParams policy = checkpoint.empty() ? exact_base_model(topo)
                                             : load_checkpoint(checkpoint, topo);
    CsvWriter w(path_join(o.out_dir, "eval.csv"),
                {"strategy", "task", "metric", "value", "stderr", "seed", "config_hash"});
    for (const auto& task : tasks) {
        StateId q = task.question;
        Generator gen = [&policy, q](Rng& rng) { return policy.sample_trajectory(q, rng); };
        CoverageStats cov = coverage_stats(gen, topo, task, cfg.eval.coverage_samples,
                                           derive_seed(cfg.master_seed,
                                                       "eval/coverage/" + task.task_id),
                                           o.threads);
        PassAtKResult pk = pass_at_k(gen, task, cfg.eval.pass_k, cfg.eval.trials,
                                     derive_seed(cfg.master_seed, "instances/" + task.task_id),
                                     derive_seed(cfg.master_seed, "eval/pass/" + task.task_id),
                                     o.threads);
        auto se = [&](double p) {
            return std::sqrt(p * (1 - p) / double(cfg.eval.coverage_samples));
        };
        w.write_row({"checkpoint", task.task_id, "easy_share", fmt_double(cov.easy_share),
                     fmt_double(se(cov.easy_share)), std::to_string(cfg.master_seed),
                     hash_hex(cfg.config_hash)});
        w.write_row({"checkpoint", task.task_id, "hard_share", fmt_double(cov.hard_share),
                     fmt_double(se(cov.hard_share)), std::to_string(cfg.master_seed),
                     hash_hex(cfg.config_hash)});
        w.write_row({"checkpoint", task.task_id, "invalid_share", fmt_double(cov.invalid_share),
                     fmt_double(se(cov.invalid_share)), std::to_string(cfg.master_seed),
                     hash_hex(cfg.config_hash)});
        w.write_row({"checkpoint", task.task_id, "pass_at_" + std::to_string(pk.k),
                     fmt_double(pk.success_rate), fmt_double(pk.standard_error),
                     std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
        double ec = expected_correctness(policy, task, EstimateMode::Exact);
        w.write_row({"checkpoint", task.task_id, "expected_correctness", fmt_double(ec),
                     "0.000000", std::to_string(cfg.master_seed), hash_hex(cfg.config_hash)});
    }
    return 0;
}

int cmd_reproduce(const CommonOpts& o, const std::string& target) {
    ExperimentConfig cfg = load_or_builtin(o);
    ensure_dir(o.out_dir);
    if (target == "table1") {
        write_table1_csv(run_table1(cfg), path_join(o.out_dir, "table1.csv"), cfg.master_seed,
                         cfg.config_hash);
    } else if (target == "table2") {
        auto cells = run_table2(cfg, cfg.master_seed, o.threads);
        write_table2_csv(cells, path_join(o.out_dir, "table2.csv"), cfg.master_seed,
                         cfg.config_hash);
    } else if (target == "pass_at_30") {
        auto cells = run_table2(cfg, cfg.master_seed, o.threads);
        write_pass30_csv(cells, path_join(o.out_dir, "pass_at_30.csv"), cfg.master_seed,
                         cfg.config_hash);
    } else {
        throw TmcError(ErrorCode::ConfigError,
                       "reproduce target must be table1|table2|pass_at_30");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tmclab: tree-structured Markov chain reasoning laboratory"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string checkpoint;
    std::string target;

    auto* validate = app.add_subcommand("validate", "validate a topology/task config");
    add_common(validate, o);

    auto* pre = app.add_subcommand("pretrain", "pretrain the base model");
    add_common(pre, o);

    auto* fin = app.add_subcommand("finetune", "finetune a checkpoint on the target task");
    add_common(fin, o);
    fin->add_option("--checkpoint", checkpoint, "starting checkpoint (defaults to exact base)");

    auto* inf = app.add_subcommand("infer", "run the configured inference sampler");
    add_common(inf, o);
    inf->add_option("--checkpoint", checkpoint, "base checkpoint (defaults to exact base)");

    auto* ev = app.add_subcommand("eval", "coverage and pass@K for a checkpoint");
    add_common(ev, o);
    ev->add_option("--checkpoint", checkpoint, "checkpoint (defaults to exact base)");

    auto* rep = app.add_subcommand("reproduce", "emit a reproduction CSV bundle");
    add_common(rep, o);
    rep->add_option("target", target, "table1|table2|pass_at_30")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(o);
        if (pre->parsed()) return cmd_pretrain(o);
        if (fin->parsed()) return cmd_finetune(o, checkpoint);
        if (inf->parsed()) return cmd_infer(o, checkpoint);
        if (ev->parsed()) return cmd_eval(o, checkpoint);
        if (rep->parsed()) return cmd_reproduce(o, target);
    } catch (const TmcError& e) {
        nlohmann::json err{{"error", error_code_name(e.code())}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", "Unhandled"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 1;
}
