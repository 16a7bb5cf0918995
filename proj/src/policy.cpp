#include "tmclab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace tmclab {

PolicyParams::PolicyParams(const Topology& topo, double init_logit) {
    n_ = topo.num_states();
    logits_.assign(n_ * n_, init_logit);
    mask_.assign(n_ * n_, 1);
    layers_ = topo.layers();
    layer_of_.resize(n_);
    for (size_t l = 0; l < layers_.size(); ++l)
        for (StateId s : layers_[l]) layer_of_[s] = l;
    // only consecutive-layer pairs are modeled; everything else stays masked
    for (size_t l = 0; l + 1 < layers_.size(); ++l)
        for (StateId cur : layers_[l])
            for (StateId next : layers_[l + 1]) mask_[next * n_ + cur] = 0;
    root_states_ = layers_.front();
    root_probs_.assign(root_states_.size(), 1.0 / double(root_states_.size()));
    topology_hash = topo.hash();
}

const std::vector<StateId>& PolicyParams::next_layer(StateId state) const {
    if (is_terminal(state))
        throw TmcError(ErrorCode::TerminalState, "state in the last layer has no successors");
    return layers_[layer_of_[state] + 1];
}

std::vector<double> PolicyParams::next_state_distribution(StateId state) const {
    const auto& nxt = next_layer(state);
    std::vector<double> out(nxt.size(), 0.0);
    double mx = -HUGE_VAL;
    bool any = false;
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (!masked(nxt[i], state)) {
            mx = std::max(mx, logit(nxt[i], state));
            any = true;
        }
    }
    if (!any) throw TmcError(ErrorCode::DeadEnd, "all successors masked");
    double z = 0.0;
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (masked(nxt[i], state)) continue;
        out[i] = std::exp(logit(nxt[i], state) - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

double PolicyParams::trajectory_probability(const Trajectory& t) const {
    if (t.size() != layers_.size())
        throw TmcError(ErrorCode::LayerMismatch, "trajectory length mismatch");
    double p = 1.0;
    for (size_t l = 0; l + 1 < t.size(); ++l) {
        if (layer_of_[t[l]] != l)
            throw TmcError(ErrorCode::LayerMismatch, "state not in expected layer");
        if (masked(t[l + 1], t[l])) return 0.0;
        auto dist = next_state_distribution(t[l]);
        const auto& nxt = layers_[l + 1];
        size_t idx = std::find(nxt.begin(), nxt.end(), t[l + 1]) - nxt.begin();
        p *= dist[idx];
    }
    return p;
}

Trajectory PolicyParams::sample_trajectory(StateId root, Rng& rng) const {
    Trajectory t{root};
    StateId cur = root;
    while (!is_terminal(cur)) {
        auto dist = next_state_distribution(cur);
        size_t idx = rng.categorical(dist);
        cur = layers_[layer_of_[cur] + 1][idx];
        t.push_back(cur);
    }
    return t;
}

Trajectory PolicyParams::sample_trajectory(Rng& rng) const {
    size_t idx = rng.categorical(root_probs_);
    return sample_trajectory(root_states_[idx], rng);
}

std::vector<double> PolicyParams::log_prob_gradient(StateId cur, StateId next) const {
    if (masked(next, cur))
        throw TmcError(ErrorCode::MaskedEdge,
                       "gradient requested for masked edge " + std::to_string(cur) + " -> " +
                           std::to_string(next));
    auto dist = next_state_distribution(cur);
    const auto& nxt = next_layer(cur);
    std::vector<double> g(nxt.size());
    for (size_t i = 0; i < nxt.size(); ++i) g[i] = (nxt[i] == next ? 1.0 : 0.0) - dist[i];
    return g;
}

void PolicyParams::pin_root(StateId root) {
    if (layer_of_[root] != 0)
        throw TmcError(ErrorCode::LayerMismatch, "root must lie in the first layer");
    root_states_ = {root};
    root_probs_ = {1.0};
}

void PolicyParams::reset_root_uniform() {
    root_states_ = layers_.front();
    root_probs_.assign(root_states_.size(), 1.0 / double(root_states_.size()));
}

PolicyParams exact_base_model(const Topology& topo) {
    PolicyParams p(topo);
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l) {
        for (StateId cur : topo.layer_states(l)) {
            for (StateId next : topo.layer_states(l + 1)) {
                double pr = topo.prob(cur, next);
                if (pr == 0.0)
                    p.set_mask(next, cur, true);
                else
                    p.set_logit(next, cur, std::log(pr));
            }
        }
    }
    return p;
}

void PolicyParams::save(std::ostream& os) const {
    os << "# tmclab-checkpoint v1\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(topology_hash));
    os << "# topology_hash " << buf << "\n";
    os << "layers";
    for (const auto& layer : layers_) os << " " << layer.size();
    os << "\n";
    for (size_t i = 0; i < root_states_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", root_probs_[i]);
        os << "root " << root_states_[i] << " " << buf << "\n";
    }
    for (size_t l = 0; l + 1 < layers_.size(); ++l) {
        for (StateId cur : layers_[l]) {
            for (StateId next : layers_[l + 1]) {
                std::snprintf(buf, sizeof buf, "%.17g", logit(next, cur));
                os << cur << " " << next << " " << buf << " " << (masked(next, cur) ? 1 : 0)
                   << "\n";
            }
        }
    }
}

PolicyParams PolicyParams::load(std::istream& is) {
    PolicyParams p;
    std::string line;
    std::vector<size_t> sizes;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "topology_hash") {
                std::string hex;
                ls >> hex;
                p.topology_hash = std::stoull(hex, nullptr, 16);
            }
            continue;
        }
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "layers") {
            size_t sz;
            while (ls >> sz) sizes.push_back(sz);
            StateId id = 0;
            for (size_t l = 0; l < sizes.size(); ++l) {
                p.layers_.emplace_back();
                for (size_t i = 0; i < sizes[l]; ++i) p.layers_[l].push_back(id++);
            }
            p.n_ = id;
            p.layer_of_.resize(p.n_);
            for (size_t l = 0; l < p.layers_.size(); ++l)
                for (StateId s : p.layers_[l]) p.layer_of_[s] = l;
            p.logits_.assign(p.n_ * p.n_, 0.0);
            p.mask_.assign(p.n_ * p.n_, 1);
        } else if (head == "root") {
            StateId s;
            double pr;
            std::istringstream ls2(line.substr(4));
            ls2 >> s >> pr;
            p.root_states_.push_back(s);
            p.root_probs_.push_back(pr);
        } else {
            if (p.n_ == 0)
                throw TmcError(ErrorCode::IoError, "checkpoint lacks a layers header line");
            StateId cur = static_cast<StateId>(std::stoul(head));
            StateId next;
            double lg;
            int m;
            ls >> next >> lg >> m;
            p.logits_[next * p.n_ + cur] = lg;
            p.mask_[next * p.n_ + cur] = static_cast<char>(m);
        }
    }
    if (p.n_ == 0) throw TmcError(ErrorCode::IoError, "empty or malformed checkpoint");
    return p;
}

} // namespace tmclab
