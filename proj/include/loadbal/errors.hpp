#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace loadbal {

/// Raised for malformed or out-of-range problem instances (bad parameters,
/// mismatched dimensions, instances too large for the oracle).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The total arrival rate is not below the total service capacity.
class UnstableNetwork : public InputError {
public:
    UnstableNetwork(double total_arrival, double total_capacity)
        : InputError("unstable network: total arrival rate " + std::to_string(total_arrival) +
                     " >= total service rate " + std::to_string(total_capacity))
        , total_arrival_(total_arrival)
        , total_capacity_(total_capacity) {}

    [[nodiscard]] double total_arrival() const noexcept { return total_arrival_; }
    [[nodiscard]] double total_capacity() const noexcept { return total_capacity_; }

private:
    double total_arrival_;
    double total_capacity_;
};

/// Network traffic outside the admissible range of a communication model.
class SaturationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A flow matrix that violates the balance or sign constraints.
class InfeasibleFlow : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// No price vector can satisfy the total-flow constraint at the requested
/// prices (the combined price is below every node's zero-load marginal delay).
class NoPriceSolution : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The outer traffic fixed point did not settle within the iteration cap.
/// Carries the best iterate seen so callers can still report it.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(std::string what, std::vector<double> best_beta, double best_lambda,
                   double best_alpha, double best_gap)
        : std::runtime_error(std::move(what))
        , best_beta_(std::move(best_beta))
        , best_lambda_(best_lambda)
        , best_alpha_(best_alpha)
        , best_gap_(best_gap) {}

    [[nodiscard]] const std::vector<double>& best_beta() const noexcept { return best_beta_; }
    [[nodiscard]] double best_lambda() const noexcept { return best_lambda_; }
    [[nodiscard]] double best_alpha() const noexcept { return best_alpha_; }
    [[nodiscard]] double best_gap() const noexcept { return best_gap_; }

private:
    std::vector<double> best_beta_;
    double best_lambda_;
    double best_alpha_;
    double best_gap_;
};

}  // namespace loadbal
