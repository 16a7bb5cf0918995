#pragma once

#include <iosfwd>
#include <vector>

#include "tmclab/task.hpp"
#include "tmclab/topology.hpp"

namespace tmclab {

// Linear-softmax policy over the layered graph. Logits are indexed
// (next-state, current-state); masked edges contribute exactly zero probability.
// Value-semantics: finetuning mutates a locally owned copy.
class PolicyParams {
public:
    PolicyParams() = default;
    PolicyParams(const Topology& topo, double init_logit = 0.0);

    size_t num_states() const { return n_; }
    size_t num_layers() const { return layers_.size(); }
    const std::vector<std::vector<StateId>>& layers() const { return layers_; }
    size_t layer_of(StateId s) const { return layer_of_[s]; }
    bool is_terminal(StateId s) const { return layer_of_[s] + 1 == layers_.size(); }

    double logit(StateId next, StateId cur) const { return logits_[next * n_ + cur]; }
    void set_logit(StateId next, StateId cur, double v) { logits_[next * n_ + cur] = v; }
    void add_logit(StateId next, StateId cur, double dv) { logits_[next * n_ + cur] += dv; }
    bool masked(StateId next, StateId cur) const { return mask_[next * n_ + cur]; }
    void set_mask(StateId next, StateId cur, bool m) { mask_[next * n_ + cur] = m; }

    // softmax over the unmasked successors in the next layer
    std::vector<double> next_state_distribution(StateId state) const;
    const std::vector<StateId>& next_layer(StateId state) const;

    double trajectory_probability(const Trajectory& t) const;
    Trajectory sample_trajectory(StateId root, Rng& rng) const;
    Trajectory sample_trajectory(Rng& rng) const; // draws the root from root_distribution

    // d log p(next|cur) / d logits, nonzero only on column cur; returned as the
    // per-successor coefficients aligned with next_layer(cur)
    std::vector<double> log_prob_gradient(StateId cur, StateId next) const;

    const std::vector<StateId>& root_states() const { return root_states_; }
    const std::vector<double>& root_probs() const { return root_probs_; }
    void pin_root(StateId root);
    void reset_root_uniform();

    uint64_t topology_hash = 0;

    void save(std::ostream& os) const;
    static PolicyParams load(std::istream& is);

private:
    size_t n_ = 0;
    std::vector<double> logits_;
    std::vector<char> mask_;
    std::vector<std::vector<StateId>> layers_;
    std::vector<size_t> layer_of_;
    std::vector<StateId> root_states_;
    std::vector<double> root_probs_;
};

// logits = log true kernel; reproduces the kernel within 1e-12
PolicyParams exact_base_model(const Topology& topo);

} // namespace tmclab
