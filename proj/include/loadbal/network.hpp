#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"

namespace loadbal {

struct Node {
    std::string id;
    double arrival_rate = 0.0;
    NodeDelayModel delay;

    friend bool operator==(const Node&, const Node&) = default;
};

/// An immutable problem instance. Construction rejects invalid parameters and
/// unstable instances (total arrival rate not below total service rate).
class Network {
public:
    Network(std::vector<Node> nodes, CommDelayModel comm) : nodes_(std::move(nodes)), comm_(std::move(comm)) {
        if (nodes_.empty()) throw InputError("network needs at least one node");
        validate_comm_model(comm_);
        double capacity = 0.0;
        for (const auto& node : nodes_) {
            if (!(node.arrival_rate >= 0.0) || !std::isfinite(node.arrival_rate)) {
                throw InputError("node '" + node.id + "': arrival rate must be a non-negative finite number");
            }
            if (!(node.delay.service_rate > 0.0) || !std::isfinite(node.delay.service_rate)) {
                throw InputError("node '" + node.id + "': service rate must be a positive finite number");
            }
            total_arrival_ += node.arrival_rate;
            capacity += node.delay.service_rate;
        }
        if (!(total_arrival_ < capacity)) throw UnstableNetwork(total_arrival_, capacity);
        total_capacity_ = capacity;
    }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const Node& node(std::size_t i) const { return nodes_.at(i); }
    [[nodiscard]] double arrival(std::size_t i) const { return nodes_[i].arrival_rate; }
    [[nodiscard]] const NodeDelayModel& delay(std::size_t i) const { return nodes_[i].delay; }
    [[nodiscard]] const CommDelayModel& comm() const noexcept { return comm_; }
    /// Phi, the total external arrival rate.
    [[nodiscard]] double total_arrival() const noexcept { return total_arrival_; }
    [[nodiscard]] double total_capacity() const noexcept { return total_capacity_; }

    friend bool operator==(const Network& a, const Network& b) {
        return a.nodes_ == b.nodes_ && a.comm_ == b.comm_;
    }

private:
    std::vector<Node> nodes_;
    CommDelayModel comm_;
    double total_arrival_ = 0.0;
    double total_capacity_ = 0.0;
};

/// Square matrix of job transfer rates x(i, j) from node i to node j.
/// Holds whatever it is given; check_feasibility validates it.
class FlowMatrix {
public:
    FlowMatrix() = default;
    explicit FlowMatrix(std::size_t n) : n_(n), x_(n * n, 0.0) {}

    static FlowMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        FlowMatrix m(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) throw InputError("flow matrix must be square");
            for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return x_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return x_[i * n_ + j]; }

    /// lambda = sum of all entries.
    [[nodiscard]] double total() const { return std::accumulate(x_.begin(), x_.end(), 0.0); }

    [[nodiscard]] double outflow(std::size_t i) const {
        double s = 0.0;
        for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j);
        return s;
    }
    [[nodiscard]] double inflow(std::size_t j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, j);
        return s;
    }
    [[nodiscard]] bool has_inflow(std::size_t j) const {
        for (std::size_t i = 0; i < n_; ++i)
            if ((*this)(i, j) > 0.0) return true;
        return false;
    }
    [[nodiscard]] bool has_outflow(std::size_t i) const {
        for (std::size_t j = 0; j < n_; ++j)
            if ((*this)(i, j) > 0.0) return true;
        return false;
    }

    [[nodiscard]] std::vector<std::vector<double>> rows() const {
        std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
        return out;
    }

    friend bool operator==(const FlowMatrix&, const FlowMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> x_;
};

/// Processing rates per node plus the total transfer traffic.
struct Allocation {
    std::vector<double> beta;
    double lambda = 0.0;
};

enum class NodeRole {
    IdleSource,
    ActiveSource,
    Neutral,
    Sink,
    /// Both sends and receives. Never part of an optimal partition; reported
    /// for diagnostics only.
    Relay,
};

inline std::string_view role_name(NodeRole role) {
    switch (role) {
        case NodeRole::IdleSource: return "idle_source";
        case NodeRole::ActiveSource: return "active_source";
        case NodeRole::Neutral: return "neutral";
        case NodeRole::Sink: return "sink";
        case NodeRole::Relay: return "relay";
    }
    return "?";
}

/// One-letter code used in compact role strings ("A,S,N").
inline char role_code(NodeRole role) {
    switch (role) {
        case NodeRole::IdleSource: return 'I';
        case NodeRole::ActiveSource: return 'A';
        case NodeRole::Neutral: return 'N';
        case NodeRole::Sink: return 'S';
        case NodeRole::Relay: return 'R';
    }
    return '?';
}

struct NodePartition {
    std::vector<NodeRole> roles;

    [[nodiscard]] std::vector<std::size_t> members(NodeRole role) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < roles.size(); ++i)
            if (roles[i] == role) out.push_back(i);
        return out;
    }
    [[nodiscard]] bool is_source(std::size_t i) const {
        return roles[i] == NodeRole::IdleSource || roles[i] == NodeRole::ActiveSource;
    }
    [[nodiscard]] std::string compact() const {
        std::string s;
        for (std::size_t i = 0; i < roles.size(); ++i) {
            if (i) s += ',';
            s += role_code(roles[i]);
        }
        return s;
    }

    friend bool operator==(const NodePartition&, const NodePartition&) = default;
};

// ---------------------------------------------------------------------------
// Feasibility

/// Relative tolerance on sum(beta) == Phi.
inline constexpr double kBalanceTolerance = 1e-9;

namespace detail {
/// Absolute slack for sign tests on rates derived from flows.
inline double rate_slack(const Network& net) { return 1e-12 * std::max(1.0, net.total_arrival()); }
}  // namespace detail

struct FlowViolation {
    enum class Kind {
        DimensionMismatch,
        NegativeFlow,
        NonzeroDiagonal,
        NegativeProcessing,
        BalanceMismatch,
        Saturated,
        CommSaturated,
    };
    Kind kind;
    std::size_t i = 0;
    std::size_t j = 0;
    double value = 0.0;
    std::string message;
};

struct FeasibilityReport {
    std::vector<FlowViolation> violations;
    /// beta_i = phi_i + inflow_i - outflow_i (empty on dimension mismatch).
    std::vector<double> beta;
    double lambda = 0.0;

    [[nodiscard]] bool feasible() const noexcept { return violations.empty(); }
    [[nodiscard]] bool has(FlowViolation::Kind kind) const {
        return std::any_of(violations.begin(), violations.end(), [kind](const auto& v) { return v.kind == kind; });
    }
    /// True when every violation is a saturation (stable-flow but overloaded).
    [[nodiscard]] bool only_saturation() const {
        return std::all_of(violations.begin(), violations.end(), [](const auto& v) {
            return v.kind == FlowViolation::Kind::Saturated || v.kind == FlowViolation::Kind::CommSaturated;
        });
    }
};

/// beta_i = phi_i + sum_j x_ji - sum_j x_ij.
inline std::vector<double> implied_processing(const Network& net, const FlowMatrix& flow) {
    std::vector<double> beta(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) beta[i] = net.arrival(i) + flow.inflow(i) - flow.outflow(i);
    return beta;
}

inline FeasibilityReport check_feasibility(const Network& net, const FlowMatrix& flow) {
    using K = FlowViolation::Kind;
    FeasibilityReport report;
    const std::size_t n = net.size();
    if (flow.size() != n) {
        report.violations.push_back({K::DimensionMismatch, flow.size(), n, 0.0,
                                     "flow matrix is " + std::to_string(flow.size()) + "x" +
                                         std::to_string(flow.size()) + " for a network of " + std::to_string(n) +
                                         " nodes"});
        return report;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double x = flow(i, j);
            if (i == j && x != 0.0) {
                report.violations.push_back(
                    {K::NonzeroDiagonal, i, j, x, "x(" + std::to_string(i) + "," + std::to_string(j) + ") != 0"});
            } else if (!(x >= 0.0)) {
                report.violations.push_back(
                    {K::NegativeFlow, i, j, x, "x(" + std::to_string(i) + "," + std::to_string(j) + ") < 0"});
            }
        }
    }
    report.beta = implied_processing(net, flow);
    report.lambda = flow.total();
    const double slack = detail::rate_slack(net);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double b = report.beta[i];
        sum += b;
        if (b < -slack) {
            report.violations.push_back(
                {K::NegativeProcessing, i, i, b, "beta_" + std::to_string(i) + " = " + std::to_string(b) + " < 0"});
        } else if (b >= net.delay(i).service_rate) {
            report.violations.push_back({K::Saturated, i, i, b,
                                         "beta_" + std::to_string(i) + " = " + std::to_string(b) +
                                             " >= service rate " + std::to_string(net.delay(i).service_rate)});
        }
    }
    const double phi = net.total_arrival();
    if (std::abs(sum - phi) > kBalanceTolerance * std::max(phi, 1e-300)) {
        report.violations.push_back({K::BalanceMismatch, 0, 0, sum - phi, "sum(beta) != Phi"});
    }
    if (!admits_traffic(net.comm(), report.lambda)) {
        report.violations.push_back({K::CommSaturated, 0, 0, report.lambda,
                                     "traffic " + std::to_string(report.lambda) +
                                         " outside the communication model's range"});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Objectives

/// Sum_i beta_i F_i(beta_i) + Phi G(lambda), with the communication term
/// defined as zero when lambda == 0. Returns kInfinity for saturated
/// allocations.
inline double aggregate_objective(const Network& net, const Allocation& alloc) {
    if (alloc.beta.size() != net.size()) throw InputError("allocation size does not match network");
    const double phi = net.total_arrival();
    double sum = 0.0;
    double node_term = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double b = alloc.beta[i];
        if (b < -detail::rate_slack(net)) throw InfeasibleFlow("negative processing rate at node " + std::to_string(i));
        const double bc = std::max(b, 0.0);
        sum += bc;
        if (bc >= net.delay(i).service_rate) return kInfinity;
        if (bc > 0.0) node_term += bc * node_delay(net.delay(i), bc);
    }
    if (std::abs(sum - phi) > kBalanceTolerance * std::max(phi, 1e-300)) {
        throw InfeasibleFlow("allocation does not conserve load: sum(beta) = " + std::to_string(sum) +
                             ", Phi = " + std::to_string(phi));
    }
    if (alloc.lambda < 0.0) throw InfeasibleFlow("negative traffic");
    if (alloc.lambda == 0.0) return node_term;
    if (!admits_traffic(net.comm(), alloc.lambda)) return kInfinity;
    return node_term + phi * comm_delay(net.comm(), alloc.lambda);
}

/// Mean response time: sum_i (beta_i / Phi) F_i(beta_i) + G(lambda), where
/// the communication term is the mean delay over transferred jobs and is
/// zero when nothing is transferred.
inline double mean_response_time(const Network& net, const FlowMatrix& flow) {
    const auto report = check_feasibility(net, flow);
    if (!report.feasible()) {
        if (report.only_saturation()) return kInfinity;
        throw InfeasibleFlow("infeasible flow: " + report.violations.front().message);
    }
    const double phi = net.total_arrival();
    if (phi == 0.0) return 0.0;
    double node_term = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double b = std::max(report.beta[i], 0.0);
        if (b > 0.0) node_term += (b / phi) * node_delay(net.delay(i), b);
    }
    const double lambda = report.lambda;
    return node_term + (lambda > 0.0 ? comm_delay(net.comm(), lambda) : 0.0);
}

// ---------------------------------------------------------------------------
// Roles

/// Classifies each node from the sign pattern of its transfers. Nodes that
/// both send and receive are reported as Relay.
inline NodePartition classify_roles(const Network& net, const FlowMatrix& flow) {
    const auto report = check_feasibility(net, flow);
    if (!report.feasible() && !report.only_saturation()) {
        throw InfeasibleFlow("cannot classify an infeasible flow: " + report.violations.front().message);
    }
    const double slack = detail::rate_slack(net);
    NodePartition p;
    p.roles.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        const bool in = flow.has_inflow(i);
        const bool out = flow.has_outflow(i);
        if (in && out) p.roles[i] = NodeRole::Relay;
        else if (out) p.roles[i] = report.beta[i] <= slack ? NodeRole::IdleSource : NodeRole::ActiveSource;
        else if (in) p.roles[i] = NodeRole::Sink;
        else p.roles[i] = NodeRole::Neutral;
    }
    return p;
}

/// Number of nodes with both positive inflow and positive outflow.
inline std::size_t relay_count(const FlowMatrix& flow) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < flow.size(); ++k)
        if (flow.has_inflow(k) && flow.has_outflow(k)) ++count;
    return count;
}

/// Roles implied by an allocation alone, comparing beta to phi with an
/// absolute tolerance. Used to compare allocations produced on a grid.
inline NodePartition roles_from_allocation(const Network& net, std::span<const double> beta, double tol) {
    NodePartition p;
    p.roles.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double phi = net.arrival(i);
        if (beta[i] > phi + tol) p.roles[i] = NodeRole::Sink;
        else if (beta[i] < phi - tol) p.roles[i] = beta[i] <= tol ? NodeRole::IdleSource : NodeRole::ActiveSource;
        else p.roles[i] = NodeRole::Neutral;
    }
    return p;
}

}  // namespace loadbal
