#include "doctest.h"

#include <cmath>
#include <vector>

#include "datamarket/datamarket.hpp"

using namespace datamarket;

namespace {

QualityCurve make_curve(std::vector<double> grid, std::vector<double> h) {
    QualityCurve c;
    c.grid = std::move(grid);
    c.h = std::move(h);
    c.validate();
    return c;
}

// Random monotone curve on [0, 1] with `points` interior grid points.
QualityCurve random_curve(Rng& rng, std::size_t points) {
    std::vector<double> grid = {0.0, 1.0};
    for (std::size_t i = 0; i < points; ++i) grid.push_back(rng.uniform01());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<double> h(grid.size());
    for (double& v : h) v = rng.uniform01();
    std::sort(h.begin(), h.end());
    return make_curve(std::move(grid), std::move(h));
}

}  // namespace

TEST_CASE("payment under a linear curve is half the square of the bid") {
    auto c = make_curve({0.0, 1.0}, {0.0, 1.0});
    CHECK(std::abs(myerson_payment(c, 0.5) - 0.125) < 1e-15);
    CHECK(std::abs(myerson_payment(c, 1.0) - 0.5) < 1e-15);
    CHECK(myerson_payment(c, 0.0) == 0.0);

    // Finer grids sample the same linear curve, so payments do not move.
    auto fine = make_curve({0.0, 0.25, 0.5, 0.75, 1.0},
                           {0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(std::abs(myerson_payment(fine, 0.6) - 0.18) < 1e-15);
}

TEST_CASE("payment under a sharp ramp approaches price times gain") {
    const double p = 0.5, g = 0.8, eps = 1e-6;
    auto c = make_curve({0.0, p - eps, p, 1.0}, {0.0, 0.0, g, g});
    // Exact closed form: g * (p - eps / 2) at a full bid.
    double want = g * (p - eps / 2.0);
    CHECK(std::abs(myerson_payment(c, 1.0) - want) < 1e-12);
    CHECK(std::abs(myerson_payment(c, 1.0) - p * g) < 1e-3);
    // Bidding below the ramp pays nothing.
    CHECK(myerson_payment(c, 0.25) == 0.0);
}

TEST_CASE("constant curves are free and bid zero") {
    auto c = make_curve({0.0, 0.5, 1.0}, {0.6, 0.6, 0.6});
    CHECK(myerson_payment(c, 0.0) == 0.0);
    // Off-grid bids keep a one-ulp quadrature residual.
    CHECK(std::abs(myerson_payment(c, 0.7)) < 1e-12);
    CHECK(myerson_payment(c, 1.0) == 0.0);
    // Every bid gives the same utility; ties break to the smallest bid.
    CHECK(best_response(c, 0.8) == 0.0);
}

TEST_CASE("payment bounds and input validation") {
    auto c = make_curve({0.0, 0.3, 1.0}, {0.1, 0.5, 0.9});
    CHECK_THROWS_AS(myerson_payment(c, -0.1), input_error);
    CHECK_THROWS_AS(myerson_payment(c, 1.1), input_error);
    for (double b : {0.0, 0.1, 0.3, 0.65, 1.0}) {
        double pay = myerson_payment(c, b);
        CHECK(pay >= 0.0);
        CHECK(pay <= b * c.value_at(b) + 1e-15);
    }
}

TEST_CASE("payment is non-decreasing in the bid") {
    Rng rng(2024);
    for (int t = 0; t < 20; ++t) {
        auto c = random_curve(rng, 6);
        double prev = 0.0;
        for (double b = 0.0; b <= 1.0; b += 0.01) {
            double pay = myerson_payment(c, b);
            CHECK(pay >= prev - 1e-12);
            prev = pay;
        }
    }
}

TEST_CASE("truthful bids dominate across random curves") {
    Rng rng(77);
    for (int t = 0; t < 25; ++t) {
        auto c = random_curve(rng, 5);
        for (int m = 0; m < 4; ++m) {
            double mu = rng.uniform01();
            double u_truth = buyer_utility(c, mu, mu);
            for (double b = 0.0; b <= 1.0; b += 0.02)
                CHECK(u_truth >= buyer_utility(c, mu, b) - 1e-9);
            // The grid search can do no better than truth-telling.
            double u_best = buyer_utility(c, mu, best_response(c, mu));
            CHECK(u_best <= u_truth + 1e-9);
            CHECK(u_best >= u_truth - 1e-9);
        }
    }
}

TEST_CASE("best response lands on mu for a strictly increasing curve") {
    auto c = make_curve({0.0, 0.25, 0.5, 0.75, 1.0},
                        {0.0, 0.25, 0.5, 0.75, 1.0});
    // For h(z) = z the utility mu*b - b^2/2 peaks uniquely at b = mu.
    CHECK(best_response(c, 0.3) == 0.3);
    CHECK(best_response(c, 0.75) == 0.75);
    CHECK_THROWS_AS(best_response(c, 1.5), input_error);
}

TEST_CASE("quote bundles gain, payment and utility consistently") {
    auto c = make_curve({0.0, 0.5, 1.0}, {0.0, 0.4, 0.8});
    auto q = quote(c, 0.5, 0.9);
    CHECK(q.bid == 0.5);
    CHECK(q.gain_at_bid == 0.4);
    CHECK(q.payment == myerson_payment(c, 0.5));
    REQUIRE(q.utility_at_mu.has_value());
    CHECK(std::abs(*q.utility_at_mu - (0.9 * 0.4 - q.payment)) < 1e-15);
    CHECK_FALSE(quote(c, 0.5).utility_at_mu.has_value());
}

TEST_CASE("lipschitz estimate matches a hand example") {
    auto a = make_curve({0.0, 1.0}, {0.0, 1.0});   // pays b^2/2
    auto b = make_curve({0.0, 1.0}, {0.0, 0.5});   // pays b^2/4
    double L = estimate_lipschitz({a, b}, {0.0, 1.0}, {1.0});
    CHECK(std::abs(L - 0.25) < 1e-15);

    CHECK_THROWS_AS(estimate_lipschitz({a}, {0.0}, {1.0}), input_error);
    CHECK_THROWS_AS(estimate_lipschitz({a, b}, {1.0, 0.5}, {1.0}), input_error);
}
