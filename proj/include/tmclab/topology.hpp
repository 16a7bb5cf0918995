#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmclab/common.hpp"

namespace tmclab {

enum class EdgeClass { Absent, Sparse, High };

struct RawEdge {
    std::string from;
    std::string to;
    double probability = 0.0;
};

struct RawTopology {
    std::vector<std::vector<std::string>> layers;
    std::vector<RawEdge> edges;
    double sparse_threshold = 0.2;
};

// Validated layered state graph with classified edges. Immutable after construction.
class Topology {
public:
    size_t num_states() const { return names_.size(); }
    size_t num_layers() const { return layers_.size(); }
    const std::vector<std::vector<StateId>>& layers() const { return layers_; }
    const std::vector<StateId>& layer_states(size_t l) const { return layers_.at(l); }
    size_t layer_of(StateId s) const { return layer_of_.at(s); }
    const std::string& name(StateId s) const { return names_.at(s); }
    StateId state(const std::string& name) const;
    double sparse_threshold() const { return sparse_threshold_; }

    double prob(StateId from, StateId to) const { return kernel_[from * num_states() + to]; }
    EdgeClass edge_class(StateId from, StateId to) const;
    bool is_terminal(StateId s) const { return layer_of(s) + 1 == num_layers(); }

    // successors with nonzero probability
    const std::vector<StateId>& successors(StateId s) const { return succ_.at(s); }

    // max high-probability out-degree (the model-size parameter M)
    size_t branching_m() const { return branching_m_; }
    // min nonzero transition probability (the constant c in the pretraining analysis)
    double min_nonzero_prob() const { return min_nonzero_; }
    size_t absent_edge_count() const { return absent_edges_; }

    uint64_t hash() const { return hash_; }

    friend Topology validate_topology(const RawTopology& raw);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, StateId> ids_;
    std::vector<std::vector<StateId>> layers_;
    std::vector<size_t> layer_of_;
    std::vector<double> kernel_; // dense [from][to], zero where absent
    std::vector<std::vector<StateId>> succ_;
    double sparse_threshold_ = 0.2;
    size_t branching_m_ = 0;
    double min_nonzero_ = 1.0;
    size_t absent_edges_ = 0;
    uint64_t hash_ = 0;
};

Topology validate_topology(const RawTopology& raw);

// the §5 two-task fixture (two states per layer, L=4)
RawTopology fixture_raw_topology();

} // namespace tmclab
