#include "tmclab/pretrain.hpp"

#include <algorithm>
#include <cmath>

namespace tmclab {

namespace {

double max_abs_error(const Topology& topo, const PolicyParams& p) {
    double err = 0.0;
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l) {
        for (StateId cur : topo.layer_states(l)) {
            auto dist = p.next_state_distribution(cur);
            const auto& nxt = topo.layer_states(l + 1);
            for (size_t i = 0; i < nxt.size(); ++i) {
                if (p.masked(nxt[i], cur)) continue;
                err = std::max(err, std::abs(dist[i] - topo.prob(cur, nxt[i])));
            }
        }
    }
    return err;
}

// one ascent step on E[log p̂(X1|X0)]; per-edge population gradient is P - p̂
void population_step(const Topology& topo, PolicyParams& p, double eta) {
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l) {
        for (StateId cur : topo.layer_states(l)) {
            auto dist = p.next_state_distribution(cur);
            const auto& nxt = topo.layer_states(l + 1);
            for (size_t i = 0; i < nxt.size(); ++i) {
                if (p.masked(nxt[i], cur)) continue;
                p.add_logit(nxt[i], cur, eta * (topo.prob(cur, nxt[i]) - dist[i]));
            }
        }
    }
}

// SGD on one (X0, X1) pair, X0 ~ Unif(S \ S_L), X1 ~ P(.|X0)
void sampled_pair_step(const Topology& topo, PolicyParams& p, double eta, Rng& rng) {
    std::vector<StateId> nonterminal;
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l)
        for (StateId s : topo.layer_states(l)) nonterminal.push_back(s);
    StateId x0 = nonterminal[static_cast<size_t>(rng.uniform() * double(nonterminal.size())) %
                             nonterminal.size()];
    const auto& nxt = topo.layer_states(topo.layer_of(x0) + 1);
    std::vector<double> kern(nxt.size());
    for (size_t i = 0; i < nxt.size(); ++i) kern[i] = topo.prob(x0, nxt[i]);
    StateId x1 = nxt[rng.categorical(kern)];
    auto dist = p.next_state_distribution(x0);
    for (size_t i = 0; i < nxt.size(); ++i) {
        if (p.masked(nxt[i], x0)) continue;
        p.add_logit(nxt[i], x0, eta * ((nxt[i] == x1 ? 1.0 : 0.0) - dist[i]));
    }
}

} // namespace

std::pair<PolicyParams, PretrainReport> pretrain(const Topology& topo, const PretrainOptions& opts,
                                                 Rng& rng, const PolicyParams* init) {
    PolicyParams p = init ? *init : PolicyParams(topo);
    PretrainReport report;
    double eta = opts.eta > 0.0 ? opts.eta : double(topo.branching_m());

    for (size_t t = 0; t < opts.t1; ++t) {
        if (opts.mode == PretrainMode::Population)
            population_step(topo, p, eta);
        else
            sampled_pair_step(topo, p, eta, rng);
        ++report.iterations_phase1;
    }

    // thresholding: mask every edge whose predicted probability fell below c_thres*c
    double cut = opts.c_thres * topo.min_nonzero_prob();
    for (size_t l = 0; l + 1 < topo.num_layers(); ++l) {
        for (StateId cur : topo.layer_states(l)) {
            auto dist = p.next_state_distribution(cur);
            const auto& nxt = topo.layer_states(l + 1);
            for (size_t i = 0; i < nxt.size(); ++i) {
                if (p.masked(nxt[i], cur)) continue;
                if (dist[i] < cut) {
                    if (topo.prob(cur, nxt[i]) > 0.0)
                        throw TmcError(ErrorCode::ThresholdKilledTrueEdge,
                                       "thresholding masked the true edge " + topo.name(cur) +
                                           " -> " + topo.name(nxt[i]) +
                                           "; lower c_thres or raise t1");
                    p.set_mask(nxt[i], cur, true);
                    ++report.thresholded_edges;
                }
            }
        }
    }

    for (size_t t = 0; t < opts.t2; ++t) {
        if (opts.mode == PretrainMode::Population)
            population_step(topo, p, eta);
        else
            sampled_pair_step(topo, p, eta, rng);
        ++report.iterations_phase2;
        if (opts.error_log_every && t % opts.error_log_every == 0)
            report.phase2_error_trace.push_back(max_abs_error(topo, p));
    }

    report.max_abs_error = max_abs_error(topo, p);
    return {std::move(p), report};
}

} // namespace tmclab
