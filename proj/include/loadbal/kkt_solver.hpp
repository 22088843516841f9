#pragma once

// Optimal static allocation via the price characterization of the optimum.
//
// At the optimum every receiving node (sink) runs at a common marginal node
// delay alpha, every partially-offloading node (active source) runs at
// alpha + Phi G'(lambda), nodes whose own marginal delay at their arrival
// rate lies between those two prices keep exactly their own load (neutral),
// and nodes whose zero-load marginal delay already exceeds the upper price
// offload everything (idle source). For fixed prices each node's rate is a
// non-decreasing function of alpha, so alpha is the root of a monotone
// scalar residual; lambda is then a fixed point of a decreasing map.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/network.hpp"

namespace loadbal {

struct SolverConfig {
    /// Relative width at which the alpha bisection may stop.
    double alpha_tol = 1e-10;
    /// Fixed-point tolerance on lambda, relative to Phi.
    double lambda_tol = 1e-9;
    int max_outer = 200;
    /// Tolerance the returned solution must meet in verify_optimality.
    double verify_tol = 1e-8;

    void validate() const {
        if (!(alpha_tol > 0.0) || !(lambda_tol > 0.0) || !(verify_tol > 0.0)) {
            throw InputError("solver tolerances must be positive");
        }
        if (max_outer < 1) throw InputError("max_outer must be at least 1");
    }
};

struct PricedAllocation {
    NodePartition partition;
    std::vector<double> beta;
};

/// Smallest zero-load marginal delay over all nodes.
inline double min_zero_load_price(const Network& net) {
    double lo = kInfinity;
    for (const auto& node : net.nodes()) lo = std::min(lo, marginal_node_delay(node.delay, 0.0));
    return lo;
}

/// Roles and rates induced by a sink price `alpha` and a communication price
/// `comm_price`. Ties at either interval end classify as Neutral.
inline PricedAllocation partition_for_prices(const Network& net, double alpha, double comm_price) {
    if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
    if (!(comm_price >= 0.0)) throw std::domain_error("communication price must be non-negative");
    const double upper = alpha + comm_price;
    if (net.total_arrival() > 0.0 && upper < min_zero_load_price(net)) {
        throw NoPriceSolution("alpha + comm_price is below every node's zero-load marginal delay");
    }
    PricedAllocation out;
    out.partition.roles.resize(net.size());
    out.beta.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto& model = net.delay(i);
        const double phi = net.arrival(i);
        const double at_phi = marginal_node_delay(model, phi);
        NodeRole role;
        double beta;
        if (at_phi < alpha) {
            role = NodeRole::Sink;
            beta = std::max(inverse_marginal_delay(model, alpha).rate, phi);
        } else if (phi == 0.0 || at_phi <= upper) {
            // A node without arrivals cannot send, so it stays neutral as
            // long as it is not cheap enough to receive.
            role = NodeRole::Neutral;
            beta = phi;
        } else if (marginal_node_delay(model, 0.0) < upper) {
            role = NodeRole::ActiveSource;
            beta = std::min(inverse_marginal_delay(model, upper).rate, phi);
        } else {
            role = NodeRole::IdleSource;
            beta = 0.0;
        }
        out.partition.roles[i] = role;
        out.beta[i] = beta;
    }
    return out;
}

/// sum_i beta_i(alpha, comm_price) - Phi. Non-decreasing in alpha.
inline double flow_residual(const Network& net, double alpha, double comm_price) {
    const auto priced = partition_for_prices(net, alpha, comm_price);
    double sum = 0.0;
    for (double b : priced.beta) sum += b;
    return sum - net.total_arrival();
}

namespace detail {

/// Sink price that balances total load for a fixed communication price.
/// Bisection on the monotone residual, bracketed from the cheapest
/// zero-load price upward by doubling.
inline double solve_alpha(const Network& net, double comm_price, const SolverConfig& cfg) {
    double lo = min_zero_load_price(net);
    double r_lo = flow_residual(net, lo, comm_price);
    if (r_lo >= 0.0) return lo;
    double hi = 2.0 * lo;
    double r_hi = flow_residual(net, hi, comm_price);
    for (int grow = 0; r_hi < 0.0; ++grow) {
        if (grow > 2000) throw NoPriceSolution("failed to bracket alpha");
        lo = hi;
        r_lo = r_hi;
        hi *= 2.0;
        r_hi = flow_residual(net, hi, comm_price);
    }
    if (r_hi == 0.0) return hi;
    const double scale = 1e-12 * std::max(net.total_arrival(), 1e-300);
    for (int it = 0; it < 2000; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        const double r = flow_residual(net, mid, comm_price);
        if (r == 0.0) return mid;
        if (r < 0.0) {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
            r_hi = r;
        }
        if (hi - lo <= cfg.alpha_tol * hi && std::min(-r_lo, r_hi) <= scale) break;
    }
    double best = (-r_lo <= r_hi) ? lo : hi;
    double best_r = std::min(-r_lo, r_hi);
    // A role boundary inside the final bracket may be an exact root that the
    // bisection only approaches (e.g. every node neutral with zero price gap).
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double at_phi = marginal_node_delay(net.delay(i), net.arrival(i));
        for (double c : {at_phi, at_phi - comm_price}) {
            if (!(c >= lo && c <= hi)) continue;
            const double r = std::abs(flow_residual(net, c, comm_price));
            if (r <= best_r) {
                best = c;
                best_r = r;
            }
        }
    }
    return best;
}

struct PriceIterate {
    double lambda_in = 0.0;
    double comm_price = 0.0;
    double alpha = 0.0;
    PricedAllocation priced;
    /// sum over sinks of (beta_i - phi_i).
    double lambda_out = 0.0;
};

inline PriceIterate evaluate_prices(const Network& net, double lambda, const SolverConfig& cfg) {
    PriceIterate it;
    it.lambda_in = lambda;
    it.comm_price = net.total_arrival() * comm_delay_derivative(net.comm(), lambda);
    it.alpha = solve_alpha(net, it.comm_price, cfg);
    it.priced = partition_for_prices(net, it.alpha, it.comm_price);
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (it.priced.partition.roles[i] == NodeRole::Sink) it.lambda_out += it.priced.beta[i] - net.arrival(i);
    }
    return it;
}

}  // namespace detail

struct OptimalSolution {
    Allocation allocation;
    NodePartition partition;
    /// Common marginal node delay of the sinks.
    double alpha = 0.0;
    /// Phi * G'(lambda) at the converged traffic.
    double comm_price = 0.0;
    /// Aggregate objective sum beta F + Phi G(lambda) of the returned allocation.
    double objective = 0.0;
    /// Aggregate objective of the best allocation with lambda > 0 (equal to
    /// `objective` unless the no-transfer candidate won).
    double interior_objective = 0.0;
    /// The no-transfer allocation beat every allocation that transfers,
    /// which the price conditions cannot see because the objective jumps
    /// at lambda = 0.
    bool no_transfer_chosen = false;
    int outer_iterations = 0;
    /// |lambda_out - lambda_in| at the accepted fixed-point iterate.
    double lambda_gap = 0.0;

    [[nodiscard]] double mean_response_time(const Network& net) const {
        return net.total_arrival() > 0.0 ? objective / net.total_arrival() : 0.0;
    }
};

inline OptimalSolution no_transfer_solution(const Network& net) {
    OptimalSolution sol;
    const std::size_t n = net.size();
    sol.allocation.beta.resize(n);
    sol.partition.roles.assign(n, NodeRole::Neutral);
    double alpha = kInfinity;
    for (std::size_t i = 0; i < n; ++i) {
        sol.allocation.beta[i] = net.arrival(i);
        alpha = std::min(alpha, marginal_node_delay(net.delay(i), net.arrival(i)));
    }
    sol.alpha = alpha;
    sol.comm_price = net.total_arrival() * comm_delay_derivative(net.comm(), 0.0);
    sol.objective = aggregate_objective(net, sol.allocation);
    sol.interior_objective = sol.objective;
    return sol;
}

namespace detail {
inline OptimalSolution solve_unverified(const Network& net, const SolverConfig& cfg) {
    const double phi = net.total_arrival();
    if (phi == 0.0) return no_transfer_solution(net);

    const double tol = cfg.lambda_tol * phi;
    detail::PriceIterate accepted;
    int iterations = 0;

    if (has_constant_derivative(net.comm())) {
        accepted = detail::evaluate_prices(net, 0.0, cfg);
        iterations = 1;
    } else {
        // Safeguarded fixed-point iteration on lambda. The map lambda ->
        // lambda_out is non-increasing, so [lo, hi] always brackets the fixed
        // point; a step that leaves the bracket or reverses direction falls
        // back to the bracket midpoint.
        double lo = 0.0;
        double hi = std::min(phi, max_traffic(net.comm()) * (1.0 - 1e-12));
        double lambda = 0.0;
        double prev_gap = 0.0;
        detail::PriceIterate best;
        double best_gap = kInfinity;
        bool converged = false;
        for (iterations = 1; iterations <= cfg.max_outer; ++iterations) {
            auto it = detail::evaluate_prices(net, lambda, cfg);
            const double gap = it.lambda_out - lambda;
            if (std::abs(gap) < best_gap) {
                best_gap = std::abs(gap);
                best = it;
            }
            if (std::abs(gap) <= tol) {
                accepted = std::move(it);
                converged = true;
                break;
            }
            if (gap > 0.0) lo = lambda;
            else hi = lambda;
            double next = it.lambda_out;
            const bool flipped = iterations > 1 && (gap > 0.0) != (prev_gap > 0.0);
            if (flipped || !(next > lo && next < hi)) next = lo + 0.5 * (hi - lo);
            prev_gap = gap;
            if (hi - lo <= 0.25 * tol) {
                // Bracket collapsed below the tolerance: the map is discontinuous
                // only through role changes, so take the best iterate.
                accepted = best;
                converged = std::abs(best.lambda_out - best.lambda_in) <= tol;
                if (converged) break;
            }
            lambda = next;
        }
        if (!converged) {
            throw NonConvergence("traffic fixed point did not converge within " + std::to_string(cfg.max_outer) +
                                     " iterations",
                                 best.priced.beta, best.lambda_out, best.alpha, best_gap);
        }
        iterations = std::min(iterations, cfg.max_outer);
    }

    OptimalSolution sol;
    sol.allocation.beta = accepted.priced.beta;
    sol.allocation.lambda = accepted.lambda_out;
    sol.partition = accepted.priced.partition;
    sol.alpha = accepted.alpha;
    sol.comm_price = accepted.comm_price;
    sol.outer_iterations = iterations;
    sol.lambda_gap = std::abs(accepted.lambda_out - accepted.lambda_in);
    sol.objective = aggregate_objective(net, sol.allocation);
    sol.interior_objective = sol.objective;

    // All-neutral: any alpha in [max f(phi) - cp, min f(phi)] works; report the top.
    if (sol.partition.members(NodeRole::Neutral).size() == net.size()) {
        double alpha = kInfinity;
        for (std::size_t i = 0; i < net.size(); ++i)
            alpha = std::min(alpha, marginal_node_delay(net.delay(i), net.arrival(i)));
        sol.alpha = alpha;
    }

    if (sol.allocation.lambda > 0.0) {
        auto fallback = no_transfer_solution(net);
        if (fallback.objective <= sol.objective * (1.0 + 1e-12)) {
            fallback.interior_objective = sol.objective;
            fallback.no_transfer_chosen = true;
            fallback.outer_iterations = sol.outer_iterations;
            return fallback;
        }
    }
    return sol;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Verification

/// Worst residual of each optimality condition, relative to the price scale.
struct KktReport {
    double sink = 0.0;
    double active_source = 0.0;
    double neutral = 0.0;
    double idle_source = 0.0;
    /// |sum beta - Phi| / Phi.
    double balance = 0.0;
    /// |lambda - sum_S (beta - phi)| / Phi.
    double lambda_sinks = 0.0;
    /// |lambda - sum_sources (phi - beta)| / Phi.
    double lambda_sources = 0.0;
    /// Nodes whose rate contradicts their role (e.g. a sink with beta <= phi).
    std::vector<std::string> role_violations;
    bool guard_applied = false;
    /// (interior objective - returned objective) / |returned objective|; must
    /// be >= -tol when the no-transfer candidate was chosen.
    double guard_margin = 0.0;
    double tol = 0.0;

    [[nodiscard]] double worst() const {
        double w = std::max({sink, active_source, idle_source, balance, lambda_sinks, lambda_sources});
        if (!guard_applied) w = std::max(w, neutral);
        return w;
    }
    [[nodiscard]] bool ok() const {
        return worst() <= tol && role_violations.empty() && (!guard_applied || guard_margin >= -tol);
    }
};

inline KktReport verify_optimality(const Network& net, const OptimalSolution& sol, double tol = 1e-8) {
    KktReport r;
    r.tol = tol;
    r.guard_applied = sol.no_transfer_chosen;
    const double alpha = sol.alpha;
    const double upper = sol.alpha + sol.comm_price;
    const double phi_total = net.total_arrival();
    const double slack = 1e-12 * std::max(1.0, phi_total);
    const auto& beta = sol.allocation.beta;
    double sum = 0.0;
    double sink_surplus = 0.0;
    double source_deficit = 0.0;
    auto violate = [&](std::size_t i, const std::string& what) {
        r.role_violations.push_back("node " + std::to_string(i) + ": " + what);
    };
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto& model = net.delay(i);
        const double phi = net.arrival(i);
        const double b = beta[i];
        sum += b;
        switch (sol.partition.roles[i]) {
            case NodeRole::Sink:
                r.sink = std::max(r.sink, std::abs(marginal_node_delay(model, b) - alpha) / alpha);
                if (!(b > phi)) violate(i, "sink with beta <= phi");
                sink_surplus += b - phi;
                break;
            case NodeRole::ActiveSource:
                r.active_source =
                    std::max(r.active_source, std::abs(marginal_node_delay(model, b) - upper) / upper);
                if (!(b > 0.0 && b < phi)) violate(i, "active source outside 0 < beta < phi");
                source_deficit += phi - b;
                break;
            case NodeRole::Neutral: {
                const double f = marginal_node_delay(model, phi);
                double miss = std::max(0.0, alpha - f);
                if (phi > 0.0) miss = std::max(miss, f - upper);
                r.neutral = std::max(r.neutral, miss / alpha);
                if (std::abs(b - phi) > slack) violate(i, "neutral with beta != phi");
                break;
            }
            case NodeRole::IdleSource:
                r.idle_source =
                    std::max(r.idle_source, std::max(0.0, upper - marginal_node_delay(model, 0.0)) / upper);
                if (b != 0.0) violate(i, "idle source with beta != 0");
                source_deficit += phi - b;
                break;
            case NodeRole::Relay: violate(i, "relay in an optimal partition"); break;
        }
    }
    const double denom = std::max(phi_total, 1e-300);
    r.balance = std::abs(sum - phi_total) / denom;
    r.lambda_sinks = std::abs(sol.allocation.lambda - sink_surplus) / denom;
    r.lambda_sources = std::abs(sol.allocation.lambda - source_deficit) / denom;
    if (sol.no_transfer_chosen) {
        r.guard_margin = (sol.interior_objective - sol.objective) / std::max(std::abs(sol.objective), 1e-300);
    }
    return r;
}

/// Computes the optimal allocation. Throws NonConvergence when the traffic
/// fixed point does not settle within cfg.max_outer iterations or the result
/// fails verify_optimality at cfg.verify_tol.
inline OptimalSolution solve(const Network& net, const SolverConfig& cfg = {}) {
    cfg.validate();
    OptimalSolution sol = detail::solve_unverified(net, cfg);
    const KktReport report = verify_optimality(net, sol, cfg.verify_tol);
    if (!report.ok()) {
        throw NonConvergence("solution failed optimality verification (worst residual " +
                                 std::to_string(report.worst()) + ")",
                             sol.allocation.beta, sol.allocation.lambda, sol.alpha, report.worst());
    }
    return sol;
}

}  // namespace loadbal
