#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmclab/rng.hpp"
#include "tmclab/topology.hpp"

namespace tmclab {

// one state per layer, root to leaf
using Trajectory = std::vector<StateId>;

enum class CotClass { ValidEasy, ValidHard, Invalid };

inline const char* cot_class_name(CotClass c) {
    switch (c) {
        case CotClass::ValidEasy: return "valid_easy";
        case CotClass::ValidHard: return "valid_hard";
        case CotClass::Invalid: return "invalid";
    }
    return "?";
}

// product of kernel probabilities along t; 0 if any edge absent
double path_probability(const Topology& topo, const Trajectory& t);

// true iff every edge of t is classified High
bool all_high_edges(const Topology& topo, const Trajectory& t);

struct TaskSpec {
    std::string task_id;
    StateId question = 0;
    StateId answer = 0;
    std::vector<Trajectory> valid_cots;
    std::vector<bool> easy; // parallel to valid_cots
    std::vector<double> p_acc; // parallel to valid_cots, sums to 1
    std::vector<double> path_prob; // kernel probability of each valid CoT

    size_t find_cot(const Trajectory& t) const; // index or npos
    static constexpr size_t npos = static_cast<size_t>(-1);
};

// Builds a task; valid_cots defaults to all nonzero-probability trajectories from
// question to answer, an explicit set overrides.
TaskSpec make_task(const Topology& topo, const std::string& id, const std::string& question,
                   const std::string& answer,
                   const std::vector<Trajectory>* explicit_valid = nullptr);

CotClass classify_cot(const Topology& topo, const TaskSpec& task, const Trajectory& t);

// p_acc of a trajectory that must be in the task's valid set
double p_acc(const TaskSpec& task, const Trajectory& t);

// One sampled question-answer realization: the subset of valid CoTs correct for it.
struct Instance {
    std::string task_id;
    std::vector<bool> correct; // parallel to task.valid_cots

    bool contains(const TaskSpec& task, const Trajectory& t) const {
        size_t i = task.find_cot(t);
        return i != TaskSpec::npos && correct[i];
    }
    bool empty() const {
        for (bool b : correct)
            if (b) return false;
        return true;
    }
};

// each valid CoT enters independently with probability p_acc (Remark D.1 semantics)
Instance sample_instance(const TaskSpec& task, Rng& rng);

inline int outcome_reward(const TaskSpec& task, const Instance& inst, const Trajectory& t) {
    return inst.contains(task, t) ? 1 : 0;
}

// all full trajectories from a root (throws TreeTooLarge above cap)
std::vector<Trajectory> enumerate_trajectories(const Topology& topo, StateId root,
                                               size_t cap = 1u << 20);

std::string trajectory_to_string(const Topology& topo, const Trajectory& t);

} // namespace tmclab
