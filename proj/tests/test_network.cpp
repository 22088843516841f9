#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace loadbal;
using namespace testing_support;
using Catch::Approx;

TEST_CASE("network construction rejects unstable or malformed input") {
    CHECK_THROWS_AS(make_network({1.0, 1.0}, {1.5, 0.6}, ConstantDelay{0.1}), UnstableNetwork);
    CHECK_THROWS_AS(make_network({1.0}, {-0.1}, ConstantDelay{0.1}), InputError);
    try {
        make_network({1.0}, {1.0}, ConstantDelay{0.1});
        FAIL("expected rejection");
    } catch (const UnstableNetwork& e) {
        CHECK(std::string(e.what()).find("unstable network") != std::string::npos);
    }
}

TEST_CASE("mean response time") {
    const auto one = make_network({2.0}, {1.0}, ConstantDelay{0.1});
    CHECK(mean_response_time(one, FlowMatrix(1)) == Approx(1.0));

    CHECK(mean_response_time(symmetric(), FlowMatrix(2)) == Approx(2.0 / 3.0));

    // Hand evaluation: node term 2*0.75*F(0.75) over Phi = 1.5, plus t.
    const auto net = asymmetric();
    const auto flow = FlowMatrix::from_rows({{0.0, 0.75}, {0.0, 0.0}});
    const double hand = (2.0 * 0.75 * mm1_sojourn(4.0, 0.75)) / 1.5 + 0.05;
    CHECK(hand == Approx(0.35769).epsilon(1e-4));
    CHECK(mean_response_time(net, flow) == Approx(hand).epsilon(1e-12));

    const auto saturating = FlowMatrix::from_rows({{0.0, 0.0}, {0.0, 0.0}});
    const auto tight = make_network({1.0, 4.0}, {1.0, 0.0}, ConstantDelay{0.1});
    CHECK(std::isinf(mean_response_time(tight, saturating)));

    CHECK_THROWS_AS(mean_response_time(net, FlowMatrix::from_rows({{0.0, 2.0}, {0.0, 0.0}})), InfeasibleFlow);
}

TEST_CASE("aggregate objective") {
    const auto one = make_network({2.0}, {1.0}, ConstantDelay{0.1});
    CHECK(aggregate_objective(one, Allocation{{1.0}, 0.0}) == Approx(1.0));

    const auto net = asymmetric();
    const double value = aggregate_objective(net, Allocation{{0.75, 0.75}, 0.75});
    CHECK(value == Approx(2.0 * 0.75 / 3.25 + 1.5 * 0.05));
    CHECK(value == Approx(0.53654).epsilon(1e-4));
    CHECK(value == Approx(1.5 * mean_response_time(net, FlowMatrix::from_rows({{0, 0.75}, {0, 0}}))));

    // lambda = 0 drops the communication term even though G(0) > 0.
    const auto cluster = make_network({3.0, 5.0, 1.0}, {1.0, 2.0, 0.5}, ChannelDelay{0.3, 4.0});
    double direct = 0.0;
    for (auto [mu, phi] : {std::pair{3.0, 1.0}, {5.0, 2.0}, {1.0, 0.5}}) direct += phi * mm1_sojourn(mu, phi);
    CHECK(aggregate_objective(cluster, Allocation{{1.0, 2.0, 0.5}, 0.0}) == Approx(direct));

    CHECK_THROWS_AS(aggregate_objective(net, Allocation{{1.0, 1.0}, 0.5}), InfeasibleFlow);
}

TEST_CASE("feasibility report") {
    const auto net = make_network({4.0, 4.0}, {1.0, 0.0}, ConstantDelay{0.1});
    const auto bad = check_feasibility(net, FlowMatrix::from_rows({{0.0, 1.5}, {0.0, 0.0}}));
    CHECK_FALSE(bad.feasible());
    REQUIRE(bad.has(FlowViolation::Kind::NegativeProcessing));
    CHECK(bad.beta[0] == Approx(-0.5));

    CHECK(check_feasibility(asymmetric(), FlowMatrix(2)).feasible());
    CHECK(check_feasibility(symmetric(), FlowMatrix(2)).feasible());

    const auto three = make_network({4.0, 4.0, 4.0}, {1.0, 0.0, 0.0}, ConstantDelay{0.1});
    const auto chain = FlowMatrix::from_rows({{0, 0.4, 0}, {0, 0, 0.4}, {0, 0, 0}});
    CHECK(check_feasibility(three, chain).feasible());
    CHECK(relay_count(chain) == 1);

    CHECK(check_feasibility(three, FlowMatrix(2)).has(FlowViolation::Kind::DimensionMismatch));
    CHECK(check_feasibility(three, FlowMatrix::from_rows({{0.1, 0, 0}, {0, 0, 0}, {0, 0, 0}}))
              .has(FlowViolation::Kind::NonzeroDiagonal));
    CHECK(check_feasibility(three, FlowMatrix::from_rows({{0, -0.1, 0}, {0, 0, 0}, {0, 0, 0}}))
              .has(FlowViolation::Kind::NegativeFlow));
}

TEST_CASE("role classification and relay count") {
    const auto net = asymmetric();
    const auto p = classify_roles(net, FlowMatrix::from_rows({{0, 0.75}, {0, 0}}));
    CHECK(p.roles[0] == NodeRole::ActiveSource);
    CHECK(p.roles[1] == NodeRole::Sink);

    const auto z = classify_roles(net, FlowMatrix(2));
    CHECK(z.roles == std::vector<NodeRole>{NodeRole::Neutral, NodeRole::Neutral});

    const auto three = make_network({4.0, 4.0, 4.0}, {1.0, 0.5, 0.0}, ConstantDelay{0.1});
    const auto relay = FlowMatrix::from_rows({{0, 0.3, 0}, {0, 0, 0.2}, {0, 0, 0}});
    CHECK(classify_roles(three, relay).roles[1] == NodeRole::Relay);
    CHECK(relay_count(relay) == 1);
    CHECK(relay_count(FlowMatrix(3)) == 0);

    const auto idle = classify_roles(make_network({4.0, 4.0}, {1.0, 0.0}, ConstantDelay{0.1}),
                                     FlowMatrix::from_rows({{0, 1.0}, {0, 0}}));
    CHECK(idle.roles[0] == NodeRole::IdleSource);

    auto path = FlowMatrix(4);
    path(0, 1) = 0.2;
    path(1, 2) = 0.2;
    path(2, 3) = 0.2;
    CHECK(relay_count(path) == 2);

    CHECK_THROWS_AS(classify_roles(net, FlowMatrix::from_rows({{0, 3.0}, {0, 0}})), InfeasibleFlow);
}
