#pragma once

// Sampled checks of the structural assumptions behind the optimality
// conditions: increasing convex node delays and a non-decreasing
// G(lambda)/lambda. Models are opaque functions, so the checks are numeric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loadbal/delay_models.hpp"
#include "loadbal/network.hpp"

namespace loadbal {

struct AdmissibilityReport {
    bool ratio_nondecreasing = true;
    /// Largest relative drop of G(lambda)/lambda between consecutive samples.
    double worst_ratio_drop = 0.0;
    bool node_delays_increasing_convex = true;
    std::vector<std::size_t> offending_nodes;
    /// With one delay function shared by every pair, G <= G + G always holds.
    bool triangle_inequality = true;
    double lambda_max_used = 0.0;
    /// Set when lambda_max was clipped to the communication model's range.
    bool lambda_range_truncated = false;

    [[nodiscard]] bool admissible() const noexcept {
        return ratio_nondecreasing && node_delays_increasing_convex && triangle_inequality;
    }
};

/// G(lambda)/lambda sampled on lambda_k = lambda_max * k / samples, k = 1..samples.
inline AdmissibilityReport check_comm_admissibility(const CommDelayModel& comm, double lambda_max,
                                                    std::size_t samples) {
    if (!(lambda_max > 0.0)) throw InputError("lambda_max must be positive");
    if (samples < 2) throw InputError("need at least two samples");
    AdmissibilityReport report;
    double top = lambda_max;
    const double cap = max_traffic(comm);
    if (top >= cap) {
        top = cap * (1.0 - 1e-9);
        report.lambda_range_truncated = true;
    }
    report.lambda_max_used = top;
    double prev = 0.0;
    for (std::size_t k = 1; k <= samples; ++k) {
        const double lambda = top * static_cast<double>(k) / static_cast<double>(samples);
        const double ratio = comm_delay(comm, lambda) / lambda;
        if (k > 1) {
            const double drop = (prev - ratio) / std::max(std::abs(prev), 1e-300);
            if (drop > 1e-12) {
                report.ratio_nondecreasing = false;
                report.worst_ratio_drop = std::max(report.worst_ratio_drop, drop);
            }
        }
        prev = ratio;
    }
    return report;
}

/// Full report: the communication ratio check plus increasing/convex node
/// delays sampled on [0, 0.95 mu_i] via first and second differences.
inline AdmissibilityReport check_model_admissibility(const Network& net, double lambda_max, std::size_t samples) {
    auto report = check_comm_admissibility(net.comm(), lambda_max, samples);
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto& model = net.delay(i);
        const double top = 0.95 * model.service_rate;
        const double h = top / static_cast<double>(samples - 1);
        std::vector<double> values(samples);
        for (std::size_t k = 0; k < samples; ++k) values[k] = node_delay(model, h * static_cast<double>(k));
        bool ok = true;
        for (std::size_t k = 1; k < samples && ok; ++k) ok = values[k] > values[k - 1];
        for (std::size_t k = 2; k < samples && ok; ++k) {
            const double second = values[k] - 2.0 * values[k - 1] + values[k - 2];
            ok = second >= -1e-12 * std::abs(values[k]);
        }
        if (!ok) {
            report.node_delays_increasing_convex = false;
            report.offending_nodes.push_back(i);
        }
    }
    return report;
}

}  // namespace loadbal
