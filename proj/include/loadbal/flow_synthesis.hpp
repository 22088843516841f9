#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "loadbal/errors.hpp"
#include "loadbal/network.hpp"

namespace loadbal {

/// Builds an explicit transfer matrix realizing a partition: each source's
/// surplus phi_i - beta_i is matched to sinks' deficits beta_j - phi_j in
/// node-index order. With one delay function shared by every pair, any
/// source-to-sink matching has the same objective.
inline FlowMatrix synthesize_flows(const Network& net, const NodePartition& partition, std::span<const double> beta) {
    const std::size_t n = net.size();
    if (partition.roles.size() != n || beta.size() != n) throw InputError("partition/beta size mismatch");

    std::vector<std::pair<std::size_t, double>> surplus;
    std::vector<std::pair<std::size_t, double>> deficit;
    double total_surplus = 0.0;
    double total_deficit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = net.arrival(i);
        if (partition.is_source(i)) {
            const double s = phi - beta[i];
            if (s > 0.0) {
                surplus.emplace_back(i, s);
                total_surplus += s;
            }
        } else if (partition.roles[i] == NodeRole::Sink) {
            const double d = beta[i] - phi;
            if (d > 0.0) {
                deficit.emplace_back(i, d);
                total_deficit += d;
            }
        } else if (partition.roles[i] == NodeRole::Relay) {
            throw InputError("cannot synthesize flows for a relay node");
        }
    }
    const double tol = 1e-8 * std::max(net.total_arrival(), 1e-300);
    if (std::abs(total_surplus - total_deficit) > tol) {
        throw InputError("source surplus " + std::to_string(total_surplus) + " does not match sink deficit " +
                         std::to_string(total_deficit));
    }

    FlowMatrix flow(n);
    std::size_t s = 0;
    std::size_t d = 0;
    while (s < surplus.size() && d < deficit.size()) {
        auto& [src, have] = surplus[s];
        auto& [dst, need] = deficit[d];
        const double amount = std::min(have, need);
        flow(src, dst) += amount;
        have -= amount;
        need -= amount;
        if (have <= 0.0) ++s;
        if (need <= 0.0) ++d;
    }
    // Rounding residue: every surplus is shipped, to the last sink.
    if (!deficit.empty()) {
        for (; s < surplus.size(); ++s) flow(surplus[s].first, deficit.back().first) += surplus[s].second;
    }
    return flow;
}

/// A relay k together with one inbound edge l->k and one outbound edge k->m.
struct RelayTriple {
    std::size_t l;
    std::size_t k;
    std::size_t m;
};

/// Lowest-index relay, then lowest-index (l, m) pair.
inline std::optional<RelayTriple> find_relay_triple(const FlowMatrix& flow) {
    const std::size_t n = flow.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::optional<std::size_t> in;
        std::optional<std::size_t> out;
        for (std::size_t l = 0; l < n && !in; ++l)
            if (flow(l, k) > 0.0) in = l;
        for (std::size_t m = 0; m < n && !out; ++m)
            if (flow(k, m) > 0.0) out = m;
        if (in && out) return RelayTriple{*in, k, *out};
    }
    return std::nullopt;
}

/// Shortcuts delta = min(x_lk, x_km) of the path l -> k -> m onto l -> m.
/// When l == m the round trip is cancelled instead (no self-transfer is
/// created). Returns delta. Net flow at every node is unchanged.
inline double apply_relay_rewrite(FlowMatrix& flow, const RelayTriple& t) {
    const double delta = std::min(flow(t.l, t.k), flow(t.k, t.m));
    if (flow(t.l, t.k) == delta) flow(t.l, t.k) = 0.0;
    else flow(t.l, t.k) -= delta;
    if (flow(t.k, t.m) == delta) flow(t.k, t.m) = 0.0;
    else flow(t.k, t.m) -= delta;
    if (t.l != t.m) flow(t.l, t.m) += delta;
    return delta;
}

/// Repeats the rewrite until no node both sends and receives. Once a node
/// stops being a relay no later rewrite can make it one again, so this
/// terminates after at most sum of in/out degrees rewrites.
inline FlowMatrix eliminate_relays(FlowMatrix flow) {
    while (auto triple = find_relay_triple(flow)) apply_relay_rewrite(flow, *triple);
    return flow;
}

}  // namespace loadbal
