#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace loadbal;
using namespace testing_support;
using Catch::Approx;

namespace {

NodePartition roles(std::initializer_list<NodeRole> r) { return NodePartition{std::vector<NodeRole>(r)}; }

}  // namespace

TEST_CASE("synthesized flows realize the net transfers") {
    const auto net = asymmetric();
    const std::vector<double> beta{0.75, 0.75};
    const auto x = synthesize_flows(net, roles({NodeRole::ActiveSource, NodeRole::Sink}), beta);
    CHECK(x(0, 1) == Approx(0.75));
    CHECK(x(1, 0) == 0.0);

    const auto three = make_network({4, 4, 4}, {0.4, 0.2, 0.0}, ConstantDelay{0.1});
    const std::vector<double> b3{0.0, 0.0, 0.6};
    const auto y = synthesize_flows(three, roles({NodeRole::IdleSource, NodeRole::IdleSource, NodeRole::Sink}), b3);
    CHECK(y(0, 2) == Approx(0.4));
    CHECK(y(1, 2) == Approx(0.2));
    CHECK(y.total() == Approx(0.6));

    const auto fan = make_network({4, 4, 4}, {0.5, 0.0, 0.0}, ConstantDelay{0.1});
    const std::vector<double> b4{0.0, 0.3, 0.2};
    const auto z = synthesize_flows(fan, roles({NodeRole::IdleSource, NodeRole::Sink, NodeRole::Sink}), b4);
    CHECK(z(0, 1) == Approx(0.3));
    CHECK(z(0, 2) == Approx(0.2));
    CHECK(relay_count(z) == 0);
}

TEST_CASE("synthesis rejects imbalanced input") {
    const auto net = asymmetric();
    const std::vector<double> beta{0.75, 0.5};
    CHECK_THROWS_AS(synthesize_flows(net, roles({NodeRole::ActiveSource, NodeRole::Sink}), beta), InputError);
}

TEST_CASE("relay rewrite") {
    auto x = FlowMatrix(3);
    x(0, 1) = 0.3;
    x(1, 2) = 0.2;
    const auto y = eliminate_relays(x);
    CHECK(y(0, 1) == Approx(0.1));
    CHECK(y(1, 2) == 0.0);
    CHECK(y(0, 2) == Approx(0.2));
    CHECK(x.total() == Approx(0.5));
    CHECK(y.total() == Approx(0.3));

    const auto free = FlowMatrix::from_rows({{0, 0.4, 0.1}, {0, 0, 0}, {0, 0, 0}});
    CHECK(eliminate_relays(free) == free);

    auto chain = FlowMatrix(4);
    chain(0, 1) = 0.2;
    chain(1, 2) = 0.2;
    chain(2, 3) = 0.2;
    const auto c = eliminate_relays(chain);
    CHECK(c(0, 3) == Approx(0.2));
    CHECK(c.total() == Approx(0.2));
    CHECK(relay_count(c) == 0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(c.outflow(i) - c.inflow(i) == Approx(chain.outflow(i) - chain.inflow(i)).margin(1e-15));
    }
}

TEST_CASE("relay elimination on random matrices") {
    std::mt19937_64 rng(20240611);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + trial % 5;
        auto r = random_flow(rng, n, 0.6);
        const auto y = eliminate_relays(r.flow);
        CHECK(relay_count(y) == 0);
        CHECK(y.total() <= r.flow.total() + 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y(i, i) == 0.0);
            CHECK(y.outflow(i) - y.inflow(i) ==
                  Approx(r.flow.outflow(i) - r.flow.inflow(i)).margin(1e-12));
            for (std::size_t j = 0; j < n; ++j) CHECK(y(i, j) >= 0.0);
        }
    }
}

TEST_CASE("two-cycles cancel") {
    auto x = FlowMatrix(2);
    x(0, 1) = 0.5;
    x(1, 0) = 0.2;
    const auto y = eliminate_relays(x);
    CHECK(y(0, 1) == Approx(0.3));
    CHECK(y(1, 0) == 0.0);
}
