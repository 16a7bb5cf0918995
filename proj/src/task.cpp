#include "tmclab/task.hpp"

#include <algorithm>

namespace tmclab {

double path_probability(const Topology& topo, const Trajectory& t) {
    if (t.size() != topo.num_layers())
        throw TmcError(ErrorCode::LayerMismatch,
                       "trajectory has " + std::to_string(t.size()) + " states, expected " +
                           std::to_string(topo.num_layers()));
    double p = 1.0;
    for (size_t l = 0; l + 1 < t.size(); ++l) {
        if (topo.layer_of(t[l]) != l)
            throw TmcError(ErrorCode::LayerMismatch,
                           "state '" + topo.name(t[l]) + "' is not in layer " + std::to_string(l));
        p *= topo.prob(t[l], t[l + 1]);
        if (p == 0.0) return 0.0;
    }
    if (topo.layer_of(t.back()) + 1 != topo.num_layers())
        throw TmcError(ErrorCode::LayerMismatch, "trajectory does not end in the last layer");
    return p;
}

bool all_high_edges(const Topology& topo, const Trajectory& t) {
    for (size_t l = 0; l + 1 < t.size(); ++l)
        if (topo.edge_class(t[l], t[l + 1]) != EdgeClass::High) return false;
    return true;
}

size_t TaskSpec::find_cot(const Trajectory& t) const {
    for (size_t i = 0; i < valid_cots.size(); ++i)
        if (valid_cots[i] == t) return i;
    return npos;
}

std::vector<Trajectory> enumerate_trajectories(const Topology& topo, StateId root, size_t cap) {
    std::vector<Trajectory> out;
    Trajectory cur{root};
    // depth-first; layer order gives a stable enumeration
    auto rec = [&](auto&& self, StateId s) -> void {
        if (topo.is_terminal(s)) {
            if (out.size() >= cap)
                throw TmcError(ErrorCode::TreeTooLarge,
                               "more than " + std::to_string(cap) + " trajectories");
            out.push_back(cur);
            return;
        }
        for (StateId nx : topo.successors(s)) {
            cur.push_back(nx);
            self(self, nx);
            cur.pop_back();
        }
    };
    rec(rec, root);
    return out;
}

TaskSpec make_task(const Topology& topo, const std::string& id, const std::string& question,
                   const std::string& answer, const std::vector<Trajectory>* explicit_valid) {
    TaskSpec task;
    task.task_id = id;
    task.question = topo.state(question);
    task.answer = topo.state(answer);
    if (topo.layer_of(task.question) != 0)
        throw TmcError(ErrorCode::LayerMismatch, "question state must lie in the first layer");
    if (!topo.is_terminal(task.answer))
        throw TmcError(ErrorCode::LayerMismatch, "answer state must lie in the last layer");

    if (explicit_valid) {
        task.valid_cots = *explicit_valid;
        for (const auto& t : task.valid_cots) {
            if (t.front() != task.question || t.back() != task.answer)
                throw TmcError(ErrorCode::NotValidForTask,
                               "explicit valid CoT does not connect question to answer");
            if (path_probability(topo, t) == 0.0)
                throw TmcError(ErrorCode::NotValidForTask, "explicit valid CoT uses an absent edge");
        }
        // Def. 2.2(i): every all-high trajectory from q to a must be in the set
        for (const auto& t : enumerate_trajectories(topo, task.question)) {
            if (t.back() == task.answer && all_high_edges(topo, t) &&
                std::find(task.valid_cots.begin(), task.valid_cots.end(), t) ==
                    task.valid_cots.end())
                throw TmcError(ErrorCode::NotValidForTask,
                               "explicit valid set omits the easy CoT " +
                                   trajectory_to_string(topo, t));
        }
    } else {
        for (const auto& t : enumerate_trajectories(topo, task.question))
            if (t.back() == task.answer) task.valid_cots.push_back(t);
    }
    if (task.valid_cots.empty())
        throw TmcError(ErrorCode::NotValidForTask, "task '" + id + "' has no valid CoT");

    double total = 0.0;
    for (const auto& t : task.valid_cots) {
        double p = path_probability(topo, t);
        task.path_prob.push_back(p);
        task.easy.push_back(all_high_edges(topo, t));
        total += p;
    }
    for (double p : task.path_prob) task.p_acc.push_back(p / total);
    return task;
}

CotClass classify_cot(const Topology& topo, const TaskSpec& task, const Trajectory& t) {
    (void)topo;
    size_t i = task.find_cot(t);
    if (i == TaskSpec::npos) return CotClass::Invalid;
    return task.easy[i] ? CotClass::ValidEasy : CotClass::ValidHard;
}

double p_acc(const TaskSpec& task, const Trajectory& t) {
    size_t i = task.find_cot(t);
    if (i == TaskSpec::npos)
        throw TmcError(ErrorCode::NotValidForTask, "trajectory is not a valid CoT of the task");
    return task.p_acc[i];
}

Instance sample_instance(const TaskSpec& task, Rng& rng) {
    Instance inst;
    inst.task_id = task.task_id;
    inst.correct.resize(task.valid_cots.size());
    for (size_t i = 0; i < task.valid_cots.size(); ++i)
        inst.correct[i] = rng.bernoulli(task.p_acc[i]);
    return inst;
}

std::string trajectory_to_string(const Topology& topo, const Trajectory& t) {
    std::string s;
    for (size_t i = 0; i < t.size(); ++i) {
        if (i) s += "->";
        s += topo.name(t[i]);
    }
    return s;
}

} // namespace tmclab
