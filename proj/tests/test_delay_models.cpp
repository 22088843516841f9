#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace loadbal;
using namespace testing_support;
using Catch::Approx;

TEST_CASE("node delay of an M/M/1 server") {
    const auto m = NodeDelayModel::mm1(2.0);
    CHECK(node_delay(m, 1.0) == Approx(1.0));
    CHECK(node_delay(m, 0.0) == Approx(0.5));
    CHECK(std::isinf(node_delay(m, 2.0)));
    CHECK(std::isinf(node_delay(m, 3.0)));
    CHECK_THROWS_AS(node_delay(m, -0.1), std::domain_error);
}

TEST_CASE("marginal node delay") {
    CHECK(marginal_node_delay(NodeDelayModel::mm1(2.0), 1.0) == Approx(2.0));
    CHECK(marginal_node_delay(NodeDelayModel::mm1(4.0), 0.0) == Approx(0.25));
    CHECK(std::isinf(marginal_node_delay(NodeDelayModel::mm1(2.0), 2.0)));
    CHECK_THROWS_AS(marginal_node_delay(NodeDelayModel::mm1(2.0), -1.0), std::domain_error);

    // Reference: finite difference of beta*F(beta), step 1e-6.
    const double reference = numeric_marginal(4.0, 0.75);
    CHECK(reference == Approx(0.37870).epsilon(1e-4));
    CHECK(marginal_node_delay(NodeDelayModel::mm1(4.0), 0.75) == Approx(reference).epsilon(1e-7));
}

TEST_CASE("marginal delay matches finite differences across the load range") {
    for (double mu : {0.5, 1.0, 3.0, 10.0}) {
        for (double frac : {0.0, 0.1, 0.4, 0.7, 0.9}) {
            const double b = frac * mu + (frac == 0.0 ? 1e-5 : 0.0);
            CHECK(marginal_node_delay(NodeDelayModel::mm1(mu), b) == Approx(numeric_marginal(mu, b)).epsilon(1e-5));
        }
    }
}

TEST_CASE("inverse marginal delay") {
    const auto m2 = NodeDelayModel::mm1(2.0);
    const auto m4 = NodeDelayModel::mm1(4.0);
    CHECK(inverse_marginal_delay(m2, 2.0).rate == Approx(1.0));
    CHECK(inverse_marginal_delay(m4, 0.25).rate == Approx(0.0).margin(1e-15));

    // Reference: bisection on f over [0, mu), tolerance 1e-10.
    const auto f = [](double b) { return numeric_marginal(4.0, b); };
    const double reference = bisect_increasing(f, 0.37870, 0.0, 4.0 - 1e-9);
    CHECK(reference == Approx(0.75).margin(1e-4));
    CHECK(inverse_marginal_delay(m4, 0.37870).rate == Approx(reference).margin(1e-6));

    const auto below = inverse_marginal_delay(m4, 0.1);
    CHECK(below.at_lower_bound);
    CHECK(below.rate == 0.0);

    for (double y : {0.3, 0.5, 1.0, 7.0}) {
        const double b = inverse_marginal_delay(m4, y).rate;
        CHECK(marginal_node_delay(m4, b) == Approx(y).epsilon(1e-12));
    }
}

TEST_CASE("communication delay models") {
    const CommDelayModel constant = ConstantDelay{0.05};
    CHECK(comm_delay(constant, 0.75) == Approx(0.05));
    CHECK(comm_delay_derivative(constant, 0.75) == 0.0);

    const CommDelayModel channel = ChannelDelay{0.1, 10.0};
    CHECK(comm_delay(channel, 5.0) == Approx(0.2));
    const double fd = central_difference([&](double l) { return comm_delay(channel, l); }, 5.0);
    CHECK(fd == Approx(0.04).epsilon(1e-6));
    CHECK(comm_delay_derivative(channel, 5.0) == Approx(fd).epsilon(1e-6));
    CHECK_THROWS_AS(comm_delay(channel, 10.0), SaturationError);
    CHECK_THROWS_AS(comm_delay(channel, -1.0), SaturationError);

    const CommDelayModel poly = PolynomialDelay{{0.1, 0.2, 0.3}};
    CHECK(comm_delay(poly, 2.0) == Approx(0.1 + 0.4 + 1.2));
    CHECK(comm_delay_derivative(poly, 2.0) ==
          Approx(central_difference([&](double l) { return comm_delay(poly, l); }, 2.0)).epsilon(1e-7));
    CHECK(comm_model_name(poly) == "polynomial");
}

TEST_CASE("invalid communication parameters are rejected") {
    CHECK_THROWS_AS(validate_comm_model(ConstantDelay{-1.0}), InputError);
    CHECK_THROWS_AS(validate_comm_model(ChannelDelay{0.1, 0.0}), InputError);
    CHECK_THROWS_AS(validate_comm_model(PolynomialDelay{{0.1, -0.2}}), InputError);
}

TEST_CASE("admissibility of communication models") {
    const auto a = check_comm_admissibility(ConstantDelay{0.05}, 1.0, 100);
    CHECK_FALSE(a.ratio_nondecreasing);

    const auto b = check_comm_admissibility(PolynomialDelay{{0.0, 0.2}}, 1.0, 100);
    CHECK(b.ratio_nondecreasing);

    // G/lambda = 1/(lambda (10 - lambda)) falls until lambda = 5, so the
    // sampled ratio is not monotone on [0, 9].
    const auto c = check_comm_admissibility(ChannelDelay{0.1, 10.0}, 9.0, 1000);
    CHECK_FALSE(c.ratio_nondecreasing);
    const double r1 = comm_delay(ChannelDelay{0.1, 10.0}, 1.0) / 1.0;
    const double r5 = comm_delay(ChannelDelay{0.1, 10.0}, 5.0) / 5.0;
    CHECK(r5 < r1);

    const auto d = check_comm_admissibility(ChannelDelay{0.0, 10.0}, 9.0, 1000);
    CHECK(d.ratio_nondecreasing);

    const auto net = make_network({2.0, 3.0}, {0.5, 1.0}, PolynomialDelay{{0.0, 0.1, 0.1}});
    const auto e = check_model_admissibility(net, 1.5, 200);
    CHECK(e.admissible());
    CHECK(e.triangle_inequality);
    CHECK(e.node_delays_increasing_convex);
}
