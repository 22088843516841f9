#pragma once

// Discrete-event simulation of the distributed system.
//
// Jobs arrive at each node as a Poisson process of rate phi_i. A routing
// policy picks the serving node; a transferred job reaches its server after a
// deterministic communication delay and then joins a FIFO single-server queue
// with exponential service of rate mu_j. Jobs never move once they reach a
// server.
//
// Random streams are split by purpose (arrivals + job sizes per origin node,
// routing coins per origin node), so policies that make the same decisions see
// the same trace, and runs with the same seed are bit-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/network.hpp"

namespace loadbal {

enum class Policy { StaticOptimal, NoBalancing, ShortestQueue, MinExpectedDelay, DynamicThreshold };

inline std::string_view policy_name(Policy p) {
    switch (p) {
        case Policy::StaticOptimal: return "static_optimal";
        case Policy::NoBalancing: return "no_balancing";
        case Policy::ShortestQueue: return "sq";
        case Policy::MinExpectedDelay: return "med";
        case Policy::DynamicThreshold: return "dynamic_threshold";
    }
    return "?";
}

inline Policy parse_policy(std::string_view name) {
    for (auto p : {Policy::StaticOptimal, Policy::NoBalancing, Policy::ShortestQueue, Policy::MinExpectedDelay,
                   Policy::DynamicThreshold}) {
        if (policy_name(p) == name) return p;
    }
    throw InputError("unknown policy '" + std::string(name) + "'");
}

struct SimConfig {
    std::uint64_t total_jobs = 100000;
    std::uint64_t seed = 1;
    /// Fraction of the earliest arrivals excluded from statistics.
    double warmup_fraction = 0.1;
    Policy policy = Policy::StaticOptimal;

    void validate() const {
        if (total_jobs < 1) throw InputError("sim.total_jobs must be >= 1");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
            throw InputError("sim.warmup_fraction must lie in [0, 1)");
        }
    }
    [[nodiscard]] std::uint64_t warmup_jobs() const {
        return static_cast<std::uint64_t>(std::floor(warmup_fraction * static_cast<double>(total_jobs)));
    }
};

inline constexpr std::size_t kBatchCount = 20;

struct SimReport {
    Policy policy = Policy::StaticOptimal;
    std::uint64_t seed = 0;
    /// Jobs that entered the statistics (post-warmup).
    std::uint64_t jobs = 0;
    /// Mean node sojourn over all jobs plus mean communication delay over
    /// transferred jobs: the estimator of the model's mean response time.
    double mean_response_time = 0.0;
    /// Mean over jobs of (communication delay + sojourn).
    double per_job_response_time = 0.0;
    double mean_node_sojourn = 0.0;
    /// Mean communication delay over transferred jobs (0 when none).
    double mean_comm_delay = 0.0;
    /// Batch-means 95% half-width of mean_response_time.
    double ci_halfwidth = 0.0;
    std::vector<double> utilization;
    std::uint64_t transfer_count = 0;
    double end_time = 0.0;

    /// Equality of every statistic (policy label excluded).
    [[nodiscard]] bool same_statistics(const SimReport& o) const {
        return seed == o.seed && jobs == o.jobs && mean_response_time == o.mean_response_time &&
               per_job_response_time == o.per_job_response_time && mean_node_sojourn == o.mean_node_sojourn &&
               mean_comm_delay == o.mean_comm_delay && ci_halfwidth == o.ci_halfwidth &&
               utilization == o.utilization && transfer_count == o.transfer_count && end_time == o.end_time;
    }
};

struct Thresholds {
    double low = 0.0;
    double high = kInfinity;
};

namespace detail {

enum class EventKind { ExternalArrival, ReachServer, Departure };

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::size_t index;  // node for arrivals/departures, job for ReachServer
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

struct Job {
    std::size_t origin = 0;
    std::size_t server = 0;
    double arrival = 0.0;
    double reach = 0.0;
    double comm = 0.0;
    double work = 0.0;  // unit-rate exponential, scaled by the server's rate
    bool transferred = false;
};

inline std::mt19937_64 make_stream(std::uint64_t seed, std::size_t node, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(node), purpose};
    return std::mt19937_64(seq);
}

/// Live view of the system handed to routing policies.
struct SystemView {
    double now = 0.0;
    const std::vector<std::uint64_t>& in_system;
    const std::vector<double>& sojourn_sum;
    const std::vector<std::uint64_t>& sojourn_count;
    std::uint64_t transfers = 0;
};

struct RouteDecision {
    std::size_t server;
    double comm_delay = 0.0;
};

using Router = std::function<RouteDecision(std::size_t origin, const SystemView&)>;

inline double t_quantile_975(std::size_t dof) {
    // Student t 0.975 quantile for the batch-means degrees of freedom used here.
    if (dof == 19) return 2.0930240544;
    return 1.959963985;
}

inline SimReport run_simulation(const Network& net, const SimConfig& cfg, const Router& route) {
    cfg.validate();
    const std::size_t n = net.size();
    const std::uint64_t warmup = cfg.warmup_jobs();

    std::vector<std::mt19937_64> arrival_rng;
    arrival_rng.reserve(n);
    for (std::size_t i = 0; i < n; ++i) arrival_rng.push_back(make_stream(cfg.seed, i, 1));
    std::exponential_distribution<double> unit_exp(1.0);

    std::priority_queue<Event, std::vector<Event>, EventLater> events;
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double rate = net.arrival(i);
        if (rate > 0.0) events.push({unit_exp(arrival_rng[i]) / rate, seq++, EventKind::ExternalArrival, i});
    }

    std::vector<Job> jobs;
    jobs.reserve(cfg.total_jobs);
    std::vector<std::deque<std::size_t>> waiting(n);
    std::vector<std::size_t> in_service(n, SIZE_MAX);
    std::vector<std::uint64_t> in_system(n, 0);
    std::vector<double> busy(n, 0.0);
    // Running sojourn statistics seeded with one pseudo-observation 1/mu.
    std::vector<double> sojourn_sum(n);
    std::vector<std::uint64_t> sojourn_count(n, 1);
    for (std::size_t i = 0; i < n; ++i) sojourn_sum[i] = 1.0 / net.delay(i).service_rate;

    const std::uint64_t measured = cfg.total_jobs - warmup;
    std::vector<double> sojourn(measured, 0.0);
    std::vector<double> comm(measured, 0.0);
    std::vector<char> moved(measured, 0);

    std::uint64_t transfers = 0;
    std::uint64_t measured_transfers = 0;
    double now = 0.0;

    auto start_service = [&](std::size_t server, std::size_t job_id) {
        in_service[server] = job_id;
        const double duration = jobs[job_id].work / net.delay(server).service_rate;
        busy[server] += duration;
        events.push({now + duration, seq++, EventKind::Departure, server});
    };
    auto reach = [&](std::size_t job_id) {
        Job& job = jobs[job_id];
        job.reach = now;
        ++in_system[job.server];
        if (in_service[job.server] == SIZE_MAX) start_service(job.server, job_id);
        else waiting[job.server].push_back(job_id);
    };

    while (!events.empty()) {
        const Event ev = events.top();
        events.pop();
        now = ev.time;
        switch (ev.kind) {
            case EventKind::ExternalArrival: {
                if (jobs.size() >= cfg.total_jobs) break;
                const std::size_t origin = ev.index;
                Job job;
                job.origin = origin;
                job.arrival = now;
                job.work = unit_exp(arrival_rng[origin]);
                events.push({now + unit_exp(arrival_rng[origin]) / net.arrival(origin), seq++,
                             EventKind::ExternalArrival, origin});
                const SystemView view{now, in_system, sojourn_sum, sojourn_count, transfers};
                const RouteDecision decision = route(origin, view);
                job.server = decision.server;
                const std::size_t id = jobs.size();
                if (decision.server != origin) {
                    job.transferred = true;
                    job.comm = decision.comm_delay;
                    ++transfers;
                    if (id >= warmup) ++measured_transfers;
                }
                jobs.push_back(job);
                if (job.transferred) events.push({now + job.comm, seq++, EventKind::ReachServer, id});
                else reach(id);
                break;
            }
            case EventKind::ReachServer: reach(ev.index); break;
            case EventKind::Departure: {
                const std::size_t server = ev.index;
                const std::size_t id = in_service[server];
                const Job& job = jobs[id];
                const double s = now - job.reach;
                sojourn_sum[server] += s;
                ++sojourn_count[server];
                --in_system[server];
                if (id >= warmup) {
                    sojourn[id - warmup] = s;
                    comm[id - warmup] = job.comm;
                    moved[id - warmup] = job.transferred ? 1 : 0;
                }
                in_service[server] = SIZE_MAX;
                if (!waiting[server].empty()) {
                    const std::size_t next = waiting[server].front();
                    waiting[server].pop_front();
                    start_service(server, next);
                }
                break;
            }
        }
    }

    SimReport report;
    report.policy = cfg.policy;
    report.seed = cfg.seed;
    report.jobs = measured;
    report.transfer_count = measured_transfers;
    report.end_time = now;
    report.utilization.resize(n);
    for (std::size_t i = 0; i < n; ++i) report.utilization[i] = now > 0.0 ? std::min(1.0, busy[i] / now) : 0.0;
    if (measured == 0) return report;

    auto composite = [&](std::size_t from, std::size_t to) {
        double s = 0.0, c = 0.0, both = 0.0;
        std::size_t k = 0;
        for (std::size_t j = from; j < to; ++j) {
            s += sojourn[j];
            both += sojourn[j] + comm[j];
            if (moved[j]) {
                c += comm[j];
                ++k;
            }
        }
        const double count = static_cast<double>(to - from);
        struct {
            double composite, sojourn, comm, per_job;
        } out{s / count + (k ? c / static_cast<double>(k) : 0.0), s / count, k ? c / static_cast<double>(k) : 0.0,
              both / count};
        return out;
    };
    const auto whole = composite(0, measured);
    report.mean_response_time = whole.composite;
    report.mean_node_sojourn = whole.sojourn;
    report.mean_comm_delay = whole.comm;
    report.per_job_response_time = whole.per_job;

    if (measured >= kBatchCount) {
        const std::size_t size = measured / kBatchCount;
        std::vector<double> batch(kBatchCount);
        for (std::size_t b = 0; b < kBatchCount; ++b) batch[b] = composite(b * size, (b + 1) * size).composite;
        double mean = 0.0;
        for (double v : batch) mean += v;
        mean /= static_cast<double>(kBatchCount);
        double var = 0.0;
        for (double v : batch) var += (v - mean) * (v - mean);
        var /= static_cast<double>(kBatchCount - 1);
        report.ci_halfwidth = t_quantile_975(kBatchCount - 1) * std::sqrt(var / static_cast<double>(kBatchCount));
    }
    return report;
}

/// Communication delay at an empirical transfer rate, held inside the
/// model's admissible range.
inline double comm_delay_at_rate(const CommDelayModel& comm, double rate) {
    const double cap = max_traffic(comm);
    if (rate >= cap) rate = 0.99 * cap;
    return comm_delay(comm, std::max(rate, 0.0));
}

inline double empirical_rate(const SystemView& view) {
    return view.now > 0.0 ? static_cast<double>(view.transfers) / view.now : 0.0;
}

inline void require_stable(const Network& net, std::span<const double> beta) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (beta[i] >= net.delay(i).service_rate) {
            throw InputError("node " + std::to_string(i) + " would be saturated (beta >= mu)");
        }
    }
}

}  // namespace detail

/// Static probabilistic routing: a job arriving at i goes to j with
/// probability x_ij / phi_i, and pays G(lambda) at the flow's lambda.
inline SimReport simulate_static(const Network& net, const FlowMatrix& flow, const SimConfig& cfg) {
    const auto feas = check_feasibility(net, flow);
    if (!feas.feasible()) throw InputError("cannot simulate an infeasible or saturated flow");
    if (relay_count(flow) != 0) throw InputError("cannot simulate a flow with relay nodes");
    detail::require_stable(net, feas.beta);

    const std::size_t n = net.size();
    const double lambda = flow.total();
    const double delay = lambda > 0.0 ? comm_delay(net.comm(), lambda) : 0.0;
    std::vector<std::vector<double>> cumulative(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (net.arrival(i) > 0.0) acc += flow(i, j) / net.arrival(i);
            cumulative[i][j] = acc;
        }
    }
    std::vector<std::mt19937_64> coins;
    for (std::size_t i = 0; i < n; ++i) coins.push_back(detail::make_stream(cfg.seed, i, 2));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    return detail::run_simulation(net, cfg, [&](std::size_t origin, const detail::SystemView&) {
        const double u = uniform(coins[origin]);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != origin && flow(origin, j) > 0.0 && u < cumulative[origin][j]) return detail::RouteDecision{j, delay};
        }
        return detail::RouteDecision{origin, 0.0};
    });
}

/// Queue-length based baselines: NoBalancing keeps every job local,
/// ShortestQueue joins the node with fewest jobs, MinExpectedDelay the node
/// minimizing (jobs + 1) / mu. Ties prefer the origin, then the lowest index.
/// Transfers pay G at the running empirical transfer rate.
inline SimReport simulate_baseline(const Network& net, const SimConfig& cfg) {
    const std::size_t n = net.size();
    const Policy policy = cfg.policy;
    if (policy != Policy::NoBalancing && policy != Policy::ShortestQueue && policy != Policy::MinExpectedDelay) {
        throw InputError("simulate_baseline handles no_balancing, sq and med");
    }
    if (policy == Policy::NoBalancing) {
        std::vector<double> beta(n);
        for (std::size_t i = 0; i < n; ++i) beta[i] = net.arrival(i);
        detail::require_stable(net, beta);
    }
    return detail::run_simulation(net, cfg, [&](std::size_t origin, const detail::SystemView& view) {
        if (policy == Policy::NoBalancing) return detail::RouteDecision{origin, 0.0};
        auto score = [&](std::size_t j) {
            const double jobs = static_cast<double>(view.in_system[j]);
            return policy == Policy::ShortestQueue ? jobs : (jobs + 1.0) / net.delay(j).service_rate;
        };
        std::size_t best = origin;
        double best_score = score(origin);
        for (std::size_t j = 0; j < n; ++j) {
            const double s = score(j);
            if (s < best_score) {
                best = j;
                best_score = s;
            }
        }
        if (best == origin) return detail::RouteDecision{origin, 0.0};
        return detail::RouteDecision{best, detail::comm_delay_at_rate(net.comm(), detail::empirical_rate(view))};
    });
}

/// Sender-initiated threshold policy. Each node's load is estimated as jobs
/// in system divided by its running mean sojourn. An arrival at a node whose
/// estimated marginal delay exceeds `high` is sent to the node with the
/// lowest estimated marginal delay, provided that delay is below `low`.
inline SimReport simulate_dynamic(const Network& net, const Thresholds& thresholds, const SimConfig& cfg) {
    if (!(thresholds.low <= thresholds.high)) throw InputError("threshold low must not exceed high");
    const std::size_t n = net.size();
    auto estimated_price = [&](std::size_t j, const detail::SystemView& view) {
        const double mean_sojourn = view.sojourn_sum[j] / static_cast<double>(view.sojourn_count[j]);
        const double load = static_cast<double>(view.in_system[j]) / mean_sojourn;
        return marginal_node_delay(net.delay(j), load);
    };
    return detail::run_simulation(net, cfg, [&](std::size_t origin, const detail::SystemView& view) {
        if (thresholds.high == kInfinity || estimated_price(origin, view) <= thresholds.high) {
            return detail::RouteDecision{origin, 0.0};
        }
        std::size_t best = origin;
        double best_price = kInfinity;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = estimated_price(j, view);
            if (p < best_price) {
                best = j;
                best_price = p;
            }
        }
        if (best == origin || !(best_price < thresholds.low)) return detail::RouteDecision{origin, 0.0};
        return detail::RouteDecision{best, detail::comm_delay_at_rate(net.comm(), detail::empirical_rate(view))};
    });
}

}  // namespace loadbal
