#pragma once

// Test-side helpers: instance builders, random generators and independent
// numerical references (finite differences, bisection, brute scans) that do
// not call into the library's own closed forms.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "loadbal/loadbal.hpp"

namespace testing_support {

using namespace loadbal;

inline Network make_network(const std::vector<double>& mu, const std::vector<double>& phi, CommDelayModel comm) {
    std::vector<Node> nodes;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        nodes.push_back(Node{"n" + std::to_string(i + 1), phi[i], NodeDelayModel::mm1(mu[i])});
    }
    return Network(std::move(nodes), std::move(comm));
}

inline Network asymmetric(double t = 0.05) { return make_network({4.0, 4.0}, {1.5, 0.0}, ConstantDelay{t}); }
inline Network symmetric(CommDelayModel comm = ConstantDelay{0.05}) {
    return make_network({2.0, 2.0}, {0.5, 0.5}, std::move(comm));
}

/// Central difference of g at x.
inline double central_difference(const std::function<double(double)>& g, double x, double h = 1e-6) {
    return (g(x + h) - g(x - h)) / (2.0 * h);
}

/// Root of an increasing function on [lo, hi] by plain bisection.
inline double bisect_increasing(const std::function<double(double)>& g, double target, double lo, double hi,
                                double tol = 1e-10) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Sojourn time of an M/M/1 queue, written out independently of the library.
inline double mm1_sojourn(double mu, double beta) { return beta < mu ? 1.0 / (mu - beta) : INFINITY; }

/// d/dbeta [beta / (mu - beta)] by finite differences.
inline double numeric_marginal(double mu, double beta) {
    return central_difference([mu](double b) { return b * mm1_sojourn(mu, b); }, beta);
}

struct RandomInstance {
    std::vector<double> mu;
    std::vector<double> phi;
    CommDelayModel comm;
};

/// n in {2,3,4}, mu in [0.5, 10], sum phi <= 0.8 sum mu, comm kind cycles
/// through the three families (k selects the kind).
inline RandomInstance random_instance(std::mt19937_64& rng, int kind) {
    std::uniform_int_distribution<int> nd(2, 4);
    std::uniform_real_distribution<double> mud(0.5, 10.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomInstance r;
    const int n = nd(rng);
    double cap = 0.0;
    for (int i = 0; i < n; ++i) {
        r.mu.push_back(mud(rng));
        cap += r.mu.back();
    }
    // Skewed shares so that transfers are common.
    std::vector<double> w(n);
    double ws = 0.0;
    for (auto& x : w) {
        x = std::pow(u(rng), 2.0);
        ws += x;
    }
    const double load = (0.1 + 0.7 * u(rng)) * cap;
    for (int i = 0; i < n; ++i) r.phi.push_back(ws > 0 ? load * w[i] / ws : load / n);
    const double phi_total = load;
    switch (kind % 3) {
        case 0: r.comm = ConstantDelay{0.3 * u(rng)}; break;
        case 1: r.comm = ChannelDelay{0.3 * u(rng), phi_total * (1.05 + 2.0 * u(rng))}; break;
        default: {
            PolynomialDelay p;
            p.coefficients = {0.2 * u(rng), 0.2 * u(rng) / std::max(1.0, phi_total)};
            if (u(rng) < 0.5) p.coefficients.push_back(0.05 * u(rng) / std::max(1.0, phi_total * phi_total));
            r.comm = p;
        }
    }
    return r;
}

/// Random non-negative flow matrix on n nodes with arrivals large enough to
/// keep every node's processing rate non-negative.
struct RandomFlow {
    FlowMatrix flow;
    std::vector<double> phi;
};

inline RandomFlow random_flow(std::mt19937_64& rng, std::size_t n, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomFlow r{FlowMatrix(n), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && u(rng) < density) r.flow(i, j) = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const double deficit = r.flow.outflow(i) - r.flow.inflow(i);
        r.phi[i] = std::max(0.0, deficit) + u(rng);
    }
    return r;
}

}  // namespace testing_support
