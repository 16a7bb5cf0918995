#include "tmclab/topology.hpp"

#include <cmath>
#include <cstdio>

#include "tmclab/rng.hpp"

namespace tmclab {

StateId Topology::state(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw TmcError(ErrorCode::UnknownState, "no state named '" + name + "'");
    return it->second;
}

EdgeClass Topology::edge_class(StateId from, StateId to) const {
    double p = prob(from, to);
    if (p == 0.0) return EdgeClass::Absent;
    return p < sparse_threshold_ ? EdgeClass::Sparse : EdgeClass::High;
}

Topology validate_topology(const RawTopology& raw) {
    Topology t;
    t.sparse_threshold_ = raw.sparse_threshold;
    if (raw.sparse_threshold <= 0.0 || raw.sparse_threshold >= 1.0)
        throw TmcError(ErrorCode::ConfigError, "sparse_threshold must lie in (0,1)");
    if (raw.layers.size() < 2)
        throw TmcError(ErrorCode::ConfigError, "topology needs at least two layers");

    for (size_t l = 0; l < raw.layers.size(); ++l) {
        t.layers_.emplace_back();
        for (const auto& name : raw.layers[l]) {
            if (t.ids_.count(name))
                throw TmcError(ErrorCode::ConfigError, "state '" + name + "' appears in two layers");
            StateId id = static_cast<StateId>(t.names_.size());
            t.ids_[name] = id;
            t.names_.push_back(name);
            t.layer_of_.push_back(l);
            t.layers_[l].push_back(id);
        }
        if (t.layers_[l].empty())
            throw TmcError(ErrorCode::ConfigError, "layer " + std::to_string(l) + " is empty");
    }

    size_t n = t.names_.size();
    t.kernel_.assign(n * n, 0.0);
    for (const auto& e : raw.edges) {
        StateId from = t.state(e.from);
        StateId to = t.state(e.to);
        if (e.probability < 0.0)
            throw TmcError(ErrorCode::NegativeProbability,
                           "edge " + e.from + " -> " + e.to + " has probability " +
                               std::to_string(e.probability));
        if (t.layer_of_[to] != t.layer_of_[from] + 1)
            throw TmcError(ErrorCode::NonLayeredEdge,
                           "edge " + e.from + " -> " + e.to + " skips or reverses layers");
        t.kernel_[from * n + to] = e.probability;
    }

    t.succ_.resize(n);
    for (size_t l = 0; l + 1 < t.layers_.size(); ++l) {
        for (StateId s : t.layers_[l]) {
            double sum = 0.0;
            for (StateId nx : t.layers_[l + 1]) sum += t.kernel_[s * n + nx];
            if (std::abs(sum - 1.0) > 1e-9)
                throw TmcError(ErrorCode::RowNotNormalized,
                               "outgoing probabilities of '" + t.names_[s] + "' sum to " +
                                   std::to_string(sum));
            // scrub 1-ulp drift so downstream row sums hold to 1e-12
            for (StateId nx : t.layers_[l + 1]) t.kernel_[s * n + nx] /= sum;
            for (StateId nx : t.layers_[l + 1]) {
                double p = t.kernel_[s * n + nx];
                if (p > 0.0) {
                    t.succ_[s].push_back(nx);
                    t.min_nonzero_ = std::min(t.min_nonzero_, p);
                } else {
                    ++t.absent_edges_;
                }
            }
            size_t high = 0;
            for (StateId nx : t.layers_[l + 1])
                if (t.edge_class(s, nx) == EdgeClass::High) ++high;
            t.branching_m_ = std::max(t.branching_m_, high);
        }
    }

    uint64_t h = fnv1a64("tmclab-topology-v1");
    char buf[64];
    for (size_t l = 0; l < t.layers_.size(); ++l)
        for (StateId s : t.layers_[l]) h = splitmix64(h ^ fnv1a64(t.names_[s]));
    for (size_t i = 0; i < n * n; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t.kernel_[i]);
        h = splitmix64(h ^ fnv1a64(buf));
    }
    t.hash_ = h;
    return t;
}

RawTopology fixture_raw_topology() {
    RawTopology raw;
    raw.sparse_threshold = 0.2;
    raw.layers = {{"s1_0", "s1_1"}, {"s2_0", "s2_1"}, {"s3_0", "s3_1"}, {"s4_0", "s4_1"}};
    const double hi = 10.0 / 11.0, lo = 1.0 / 11.0;
    raw.edges = {
        {"s1_0", "s2_0", hi}, {"s1_0", "s2_1", lo},
        {"s1_1", "s2_0", hi}, {"s1_1", "s2_1", lo},
        {"s2_0", "s3_0", hi}, {"s2_0", "s3_1", lo},
        {"s2_1", "s3_0", lo}, {"s2_1", "s3_1", hi},
        {"s3_0", "s4_0", 0.5}, {"s3_0", "s4_1", 0.5},
        {"s3_1", "s4_0", hi}, {"s3_1", "s4_1", lo},
    };
    return raw;
}

} // namespace tmclab
