#pragma once

// Node and communication delay models.
//
// A node delay model gives the mean sojourn F(beta) of a job at a host that
// processes jobs at rate beta. The marginal node delay
//
//     f(beta) = d/dbeta [ beta * F(beta) ] = F(beta) + beta * F'(beta)
//
// is the price that the optimal allocation equalizes across receiving nodes.
// A communication model gives the mean transfer delay G(lambda) of one job as
// a function of the total transfer traffic lambda on the network.

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "loadbal/errors.hpp"

namespace loadbal {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class NodeModelKind { MM1 };

/// Single-server exponential queue with service rate `service_rate` (jobs/s).
/// F(beta) = 1 / (mu - beta) on [0, mu), +inf beyond.
struct NodeDelayModel {
    NodeModelKind kind = NodeModelKind::MM1;
    double service_rate = 1.0;

    static NodeDelayModel mm1(double service_rate) {
        if (!(service_rate > 0.0) || !std::isfinite(service_rate)) {
            throw InputError("service rate must be a positive finite number, got " +
                             std::to_string(service_rate));
        }
        return NodeDelayModel{NodeModelKind::MM1, service_rate};
    }

    friend bool operator==(const NodeDelayModel&, const NodeDelayModel&) = default;
};

namespace detail {
inline void require_nonnegative_rate(double beta) {
    if (!(beta >= 0.0)) {
        throw std::domain_error("processing rate must be non-negative, got " + std::to_string(beta));
    }
}
}  // namespace detail

/// F(beta). Returns kInfinity at and beyond saturation.
inline double node_delay(const NodeDelayModel& model, double beta) {
    detail::require_nonnegative_rate(beta);
    const double mu = model.service_rate;
    if (beta >= mu) return kInfinity;
    return 1.0 / (mu - beta);
}

/// F'(beta).
inline double node_delay_derivative(const NodeDelayModel& model, double beta) {
    detail::require_nonnegative_rate(beta);
    const double mu = model.service_rate;
    if (beta >= mu) return kInfinity;
    const double slack = mu - beta;
    return 1.0 / (slack * slack);
}

/// f(beta) = F(beta) + beta F'(beta); for M/M/1 this is mu / (mu - beta)^2.
inline double marginal_node_delay(const NodeDelayModel& model, double beta) {
    detail::require_nonnegative_rate(beta);
    const double mu = model.service_rate;
    if (beta >= mu) return kInfinity;
    const double slack = mu - beta;
    return mu / (slack * slack);
}

struct InverseMarginal {
    double rate = 0.0;
    /// Set when the requested price is below f(0): no non-negative rate
    /// reaches it, and `rate` is clamped to zero.
    bool at_lower_bound = false;
};

/// f^{-1}(y). Closed form mu - sqrt(mu / y) for M/M/1.
inline InverseMarginal inverse_marginal_delay(const NodeDelayModel& model, double y) {
    const double mu = model.service_rate;
    if (std::isnan(y)) throw std::domain_error("inverse marginal delay of NaN");
    if (y < 1.0 / mu) return {0.0, true};
    if (y == kInfinity) return {mu, false};
    const double rate = mu - std::sqrt(mu / y);
    return {rate > 0.0 ? rate : 0.0, false};
}

// ---------------------------------------------------------------------------
// Communication delay

/// G(lambda) = t for every lambda.
struct ConstantDelay {
    double t = 0.0;
    friend bool operator==(const ConstantDelay&, const ConstantDelay&) = default;
};

/// Shared M/M/1-like channel: G(lambda) = t / (1 - lambda / capacity) for
/// lambda < capacity.
struct ChannelDelay {
    double t = 0.0;
    double capacity = 1.0;
    friend bool operator==(const ChannelDelay&, const ChannelDelay&) = default;
};

/// G(lambda) = sum_k a_k lambda^k with a_k >= 0.
struct PolynomialDelay {
    std::vector<double> coefficients;
    friend bool operator==(const PolynomialDelay&, const PolynomialDelay&) = default;
};

using CommDelayModel = std::variant<ConstantDelay, ChannelDelay, PolynomialDelay>;

inline std::string_view comm_model_name(const CommDelayModel& model) {
    return std::visit(
        [](const auto& m) -> std::string_view {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ConstantDelay>) return "constant";
            else if constexpr (std::is_same_v<M, ChannelDelay>) return "mm1_channel";
            else return "polynomial";
        },
        model);
}

/// Throws InputError on negative or non-finite parameters.
inline void validate_comm_model(const CommDelayModel& model) {
    std::visit(
        [](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ConstantDelay>) {
                if (!(m.t >= 0.0) || !std::isfinite(m.t)) throw InputError("constant delay t must be >= 0");
            } else if constexpr (std::is_same_v<M, ChannelDelay>) {
                if (!(m.t >= 0.0) || !std::isfinite(m.t)) throw InputError("channel delay t must be >= 0");
                if (!(m.capacity > 0.0) || !std::isfinite(m.capacity)) {
                    throw InputError("channel capacity must be > 0");
                }
            } else {
                for (double a : m.coefficients) {
                    if (!(a >= 0.0) || !std::isfinite(a)) {
                        throw InputError("polynomial delay coefficients must be >= 0");
                    }
                }
            }
        },
        model);
}

/// Supremum of admissible traffic (exclusive for the channel model).
inline double max_traffic(const CommDelayModel& model) {
    if (const auto* ch = std::get_if<ChannelDelay>(&model)) return ch->capacity;
    return kInfinity;
}

inline bool admits_traffic(const CommDelayModel& model, double lambda) {
    return lambda >= 0.0 && lambda < max_traffic(model);
}

namespace detail {
inline void require_admissible(const CommDelayModel& model, double lambda) {
    if (!admits_traffic(model, lambda)) {
        throw SaturationError("traffic " + std::to_string(lambda) + " outside the admissible range of the " +
                              std::string(comm_model_name(model)) + " communication model");
    }
}
}  // namespace detail

/// G(lambda). Throws SaturationError outside the admissible range.
inline double comm_delay(const CommDelayModel& model, double lambda) {
    detail::require_admissible(model, lambda);
    return std::visit(
        [lambda](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ConstantDelay>) {
                return m.t;
            } else if constexpr (std::is_same_v<M, ChannelDelay>) {
                return m.t / (1.0 - lambda / m.capacity);
            } else {
                double acc = 0.0;
                for (auto it = m.coefficients.rbegin(); it != m.coefficients.rend(); ++it) acc = acc * lambda + *it;
                return acc;
            }
        },
        model);
}

/// G'(lambda). Throws SaturationError outside the admissible range.
inline double comm_delay_derivative(const CommDelayModel& model, double lambda) {
    detail::require_admissible(model, lambda);
    return std::visit(
        [lambda](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ConstantDelay>) {
                return 0.0;
            } else if constexpr (std::is_same_v<M, ChannelDelay>) {
                const double slack = 1.0 - lambda / m.capacity;
                return m.t / (m.capacity * slack * slack);
            } else {
                double acc = 0.0;
                const auto& a = m.coefficients;
                for (std::size_t k = a.size(); k-- > 1;) acc = acc * lambda + static_cast<double>(k) * a[k];
                return acc;
            }
        },
        model);
}

/// True when G' does not depend on lambda (constant or affine G), so the
/// communication price is fixed and no traffic fixed point is needed.
inline bool has_constant_derivative(const CommDelayModel& model) {
    if (std::holds_alternative<ConstantDelay>(model)) return true;
    if (const auto* p = std::get_if<PolynomialDelay>(&model)) {
        for (std::size_t k = 2; k < p->coefficients.size(); ++k) {
            if (p->coefficients[k] != 0.0) return false;
        }
        return true;
    }
    return false;
}

}  // namespace loadbal
