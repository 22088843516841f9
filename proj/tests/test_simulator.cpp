#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace loadbal;
using namespace testing_support;
using Catch::Approx;

namespace {

SimConfig config(std::uint64_t jobs, std::uint64_t seed, Policy policy) {
    SimConfig c;
    c.total_jobs = jobs;
    c.seed = seed;
    c.policy = policy;
    return c;
}

}  // namespace

TEST_CASE("single M/M/1 node matches the closed form") {
    const auto net = make_network({2.0}, {1.0}, ConstantDelay{0.0});
    const auto r = simulate_static(net, FlowMatrix(1), config(111112, 11, Policy::StaticOptimal));
    CHECK(r.jobs == 100001);
    CHECK(r.mean_response_time == Approx(mm1_sojourn(2.0, 1.0)).epsilon(0.05));
    CHECK(r.transfer_count == 0);
    CHECK(r.utilization[0] == Approx(0.5).epsilon(0.05));
    CHECK(r.ci_halfwidth > 0.0);
}

TEST_CASE("optimal static flow on the asymmetric instance") {
    const auto net = asymmetric(0.05);
    const auto sol = solve(net);
    const auto flow = synthesize_flows(net, sol.partition, sol.allocation.beta);
    const double predicted = mean_response_time(net, flow);
    const auto r = simulate_static(net, flow, config(111112, 5, Policy::StaticOptimal));
    CHECK(r.mean_response_time == Approx(predicted).epsilon(0.05));
    CHECK(r.mean_comm_delay == Approx(0.05));
    CHECK(static_cast<double>(r.transfer_count) / r.jobs == Approx(0.5).epsilon(0.05));
    CHECK(r.utilization[0] == Approx(0.75 / 4.0).epsilon(0.05));
    CHECK(r.utilization[1] == Approx(0.75 / 4.0).epsilon(0.05));

    const auto base = simulate_baseline(net, config(111112, 5, Policy::NoBalancing));
    CHECK(r.mean_response_time < base.mean_response_time);
}

TEST_CASE("simulation is deterministic per seed") {
    const auto net = asymmetric(0.05);
    const auto flow = FlowMatrix::from_rows({{0, 0.75}, {0, 0}});
    const auto a = simulate_static(net, flow, config(20000, 9, Policy::StaticOptimal));
    const auto b = simulate_static(net, flow, config(20000, 9, Policy::StaticOptimal));
    const auto c = simulate_static(net, flow, config(20000, 10, Policy::StaticOptimal));
    CHECK(a.same_statistics(b));
    CHECK_FALSE(a.same_statistics(c));
}

TEST_CASE("zero flow never transfers") {
    const auto net = make_network({3.0, 2.0}, {1.0, 0.5}, ChannelDelay{0.1, 5.0});
    const auto r = simulate_static(net, FlowMatrix(2), config(20000, 1, Policy::StaticOptimal));
    CHECK(r.transfer_count == 0);
    CHECK(r.mean_comm_delay == 0.0);
}

TEST_CASE("unstable or infeasible assignments are rejected") {
    const auto net = make_network({1.0, 4.0}, {0.5, 0.0}, ConstantDelay{0.1});
    const auto tight = make_network({1.0, 4.0}, {1.0, 0.0}, ConstantDelay{0.1});
    CHECK_THROWS_AS(simulate_static(tight, FlowMatrix(2), SimConfig{}), InputError);
    CHECK_THROWS_AS(simulate_static(net, FlowMatrix::from_rows({{0, 0.7}, {0, 0}}), SimConfig{}), InputError);
}

TEST_CASE("dynamic thresholds") {
    const auto net = asymmetric(0.05);
    const auto sol = solve(net);
    const Thresholds th{sol.alpha, sol.alpha + sol.comm_price};
    const auto dyn = simulate_dynamic(net, th, config(111112, 3, Policy::DynamicThreshold));
    const auto base = simulate_baseline(net, config(111112, 3, Policy::NoBalancing));
    CHECK(dyn.mean_response_time <= base.mean_response_time + dyn.ci_halfwidth + base.ci_halfwidth);
    CHECK(dyn.transfer_count > 0);

    const auto off = simulate_dynamic(net, Thresholds{0.0, kInfinity}, config(50000, 3, Policy::DynamicThreshold));
    const auto none = simulate_baseline(net, config(50000, 3, Policy::NoBalancing));
    CHECK(off.same_statistics(none));
    CHECK(off.transfer_count == 0);

    const auto sym = symmetric();
    const auto ssol = solve(sym);
    const auto quiet =
        simulate_dynamic(sym, Thresholds{ssol.alpha, ssol.alpha + ssol.comm_price}, config(50000, 3, Policy::DynamicThreshold));
    // The instantaneous load estimate crosses coinciding thresholds often, but
    // symmetry leaves no net flow: both servers keep their own share.
    const auto quiet_base = simulate_baseline(sym, config(50000, 3, Policy::NoBalancing));
    CHECK(quiet.utilization[0] == Approx(0.25).epsilon(0.05));
    CHECK(quiet.utilization[1] == Approx(0.25).epsilon(0.05));
    CHECK(quiet.mean_response_time <= quiet_base.mean_response_time);
}

TEST_CASE("queue-aware baselines") {
    const auto net = asymmetric(0.05);
    const auto sq = simulate_baseline(net, config(50000, 4, Policy::ShortestQueue));
    const auto med = simulate_baseline(net, config(50000, 4, Policy::MinExpectedDelay));
    const auto none = simulate_baseline(net, config(50000, 4, Policy::NoBalancing));
    CHECK(sq.transfer_count > 0);
    CHECK(med.transfer_count > 0);
    CHECK(sq.mean_response_time < none.mean_response_time);
    CHECK_THROWS_AS(simulate_baseline(net, config(100, 1, Policy::StaticOptimal)), InputError);
}

TEST_CASE("policy names round-trip") {
    for (auto p : {Policy::StaticOptimal, Policy::NoBalancing, Policy::ShortestQueue, Policy::MinExpectedDelay,
                   Policy::DynamicThreshold}) {
        CHECK(parse_policy(policy_name(p)) == p);
    }
    CHECK_THROWS_AS(parse_policy("round_robin"), InputError);
}
