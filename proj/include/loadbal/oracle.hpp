#pragma once

// Brute-force reference minimizer for small instances.
//
// Searches directly over per-node net transfers d_i = (sent - received), with
// sum d_i = 0 and beta_i = phi_i - d_i in [0, mu_i). Relay-free flows are
// enough to reach the optimum, so the objective depends on the flow only
// through beta and lambda = sum_i max(d_i, 0). The first n-1 coordinates are
// gridded; the last is implied. Each refinement round re-grids a window
// shrunk around the incumbent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/kkt_solver.hpp"
#include "loadbal/network.hpp"

namespace loadbal {

struct OracleConfig {
    std::size_t grid = 201;
    std::size_t refine_rounds = 6;
    /// Window half-width multiplier per refinement round.
    double shrink = 0.25;
    std::size_t max_nodes = 5;
};

struct OracleResult {
    Allocation allocation;
    /// d_i = phi_i - beta_i; positive for senders.
    std::vector<double> net_transfer;
    double objective = kInfinity;
    std::size_t evaluations = 0;
};

/// Aggregate objective at net transfers d: sum beta F(beta) + Phi G(lambda),
/// with no communication term when lambda == 0. kInfinity when infeasible.
inline double oracle_objective(const Network& net, std::span<const double> d) {
    double node_term = 0.0;
    double lambda = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double beta = net.arrival(i) - d[i];
        if (beta < 0.0 || beta >= net.delay(i).service_rate) return kInfinity;
        node_term += beta * node_delay(net.delay(i), beta);
        if (d[i] > 0.0) lambda += d[i];
    }
    if (lambda == 0.0) return node_term;
    if (!admits_traffic(net.comm(), lambda)) return kInfinity;
    return node_term + net.total_arrival() * comm_delay(net.comm(), lambda);
}

inline OracleResult brute_force_optimum(const Network& net, const OracleConfig& cfg = {}) {
    const std::size_t n = net.size();
    if (n > cfg.max_nodes) {
        throw InputError("oracle supports at most " + std::to_string(cfg.max_nodes) + " nodes, got " +
                         std::to_string(n));
    }
    if (cfg.grid < 2) throw InputError("oracle grid needs at least 2 points per axis");

    OracleResult best;
    best.net_transfer.assign(n, 0.0);
    std::vector<double> d(n, 0.0);
    best.objective = oracle_objective(net, d);
    ++best.evaluations;

    const std::size_t dims = n - 1;
    if (dims > 0) {
        const double phi_total = net.total_arrival();
        std::vector<double> box_lo(dims), box_hi(dims), lo(dims), hi(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            box_lo[i] = net.arrival(i) - std::min(net.delay(i).service_rate, phi_total);
            box_hi[i] = net.arrival(i);
            lo[i] = box_lo[i];
            hi[i] = box_hi[i];
        }
        std::vector<std::size_t> idx(dims);
        const double last = static_cast<double>(cfg.grid - 1);
        for (std::size_t round = 0; round <= cfg.refine_rounds; ++round) {
            std::fill(idx.begin(), idx.end(), 0);
            bool done = false;
            while (!done) {
                double sum = 0.0;
                for (std::size_t i = 0; i < dims; ++i) {
                    d[i] = lo[i] + (hi[i] - lo[i]) * (static_cast<double>(idx[i]) / last);
                    sum += d[i];
                }
                d[dims] = -sum;
                const double value = oracle_objective(net, d);
                ++best.evaluations;
                if (value < best.objective) {
                    best.objective = value;
                    best.net_transfer = d;
                }
                // Odometer, last axis fastest so visiting order is lexicographic.
                std::size_t axis = dims;
                while (axis > 0) {
                    --axis;
                    if (++idx[axis] < cfg.grid) break;
                    idx[axis] = 0;
                    if (axis == 0) done = true;
                }
            }
            for (std::size_t i = 0; i < dims; ++i) {
                const double half = 0.5 * (hi[i] - lo[i]) * cfg.shrink;
                const double c = best.net_transfer[i];
                lo[i] = std::max(box_lo[i], c - half);
                hi[i] = std::min(box_hi[i], c + half);
            }
        }
    }

    best.allocation.beta.resize(n);
    best.allocation.lambda = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        best.allocation.beta[i] = net.arrival(i) - best.net_transfer[i];
        if (best.net_transfer[i] > 0.0) best.allocation.lambda += best.net_transfer[i];
    }
    return best;
}

struct ComparisonReport {
    /// solver objective - oracle objective (aggregate units).
    double objective_gap = 0.0;
    double max_beta_deviation = 0.0;
    NodePartition oracle_roles;
    bool roles_agree = true;
    /// False when the oracle found an allocation better than the solver's by
    /// more than the objective tolerance.
    bool pass = true;
};

/// `role_tol` is the absolute rate tolerance for reading roles off the
/// oracle's grid allocation.
inline ComparisonReport compare_solutions(const OptimalSolution& solver, const OracleResult& oracle,
                                          const Network& net, double objective_tol = 1e-5,
                                          double role_tol = 1e-4) {
    ComparisonReport r;
    r.objective_gap = solver.objective - oracle.objective;
    for (std::size_t i = 0; i < net.size(); ++i) {
        r.max_beta_deviation =
            std::max(r.max_beta_deviation, std::abs(solver.allocation.beta[i] - oracle.allocation.beta[i]));
    }
    r.oracle_roles = roles_from_allocation(net, oracle.allocation.beta, role_tol);
    r.roles_agree = r.oracle_roles == solver.partition;
    r.pass = std::isfinite(solver.objective) && r.objective_gap <= objective_tol;
    return r;
}

}  // namespace loadbal
