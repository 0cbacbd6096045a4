#include "doctest.h"

#include <cmath>
#include <vector>

#include "datamarket/datamarket.hpp"

using namespace datamarket;

namespace {

PredictionTask linear_task() {
    // Targets are an exact linear function of the two feature rows.
    PredictionTask t;
    t.y = {4, 5, 10, 11, 16, 17};
    t.train_columns = {0, 1, 2, 3};
    t.test_columns = {4, 5};
    t.validate();
    return t;
}

FeatureMatrix two_rows() {
    return FeatureMatrix({{1, 2, 3, 4, 5, 6}, {2, 1, 4, 3, 6, 5}});
}

}  // namespace

TEST_CASE("bid at or above price returns features untouched") {
    auto X = two_rows();
    AllocationSpec spec;
    spec.noise_seed = 5;
    CHECK(allocate(spec, 0.5, 0.5, X) == X);
    CHECK(allocate(spec, 0.5, 0.9, X) == X);
    CHECK(allocate(spec, 0.0, 0.0, X) == X);

    spec.kind = AllocationKind::bernoulli_mask;
    CHECK(allocate(spec, 0.5, 0.5, X) == X);
}

TEST_CASE("gaussian degradation is seeded and shortfall scaled") {
    auto X = two_rows();
    AllocationSpec spec;
    spec.sigma = 1.0;
    spec.noise_seed = 5;
    auto a = allocate(spec, 1.0, 0.25, X);
    auto b = allocate(spec, 1.0, 0.25, X);
    CHECK(a == b);           // same seed, same noise
    CHECK_FALSE(a == X);

    // Only the price-bid shortfall matters, not the pair itself.
    CHECK(allocate(spec, 1.75, 1.0, X) == a);

    // Twice the shortfall doubles the perturbation.
    auto e = allocate(spec, 2.0, 0.5, X);
    for (std::size_t i = 0; i < X.data().size(); ++i) {
        double e1 = a.data()[i] - X.data()[i];
        double e3 = e.data()[i] - X.data()[i];
        CHECK(std::abs(e3 - 2.0 * e1) < 1e-12);
    }
}

TEST_CASE("bernoulli masks are coupled across keep rates") {
    FeatureMatrix X(4, 25, 1.0);
    AllocationSpec spec;
    spec.kind = AllocationKind::bernoulli_mask;
    spec.noise_seed = 9;
    auto low = allocate(spec, 1.0, 0.3, X);
    auto high = allocate(spec, 1.0, 0.7, X);
    std::size_t kept_low = 0, kept_high = 0;
    for (std::size_t i = 0; i < X.data().size(); ++i) {
        bool kl = low.data()[i] != 0.0;
        bool kh = high.data()[i] != 0.0;
        kept_low += kl;
        kept_high += kh;
        if (kl) CHECK(kh);  // higher bid keeps a superset
    }
    CHECK(kept_low < kept_high);
    CHECK(kept_high < X.data().size());
}

TEST_CASE("allocate validates inputs") {
    auto X = two_rows();
    AllocationSpec bad;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(allocate(bad, 1.0, 0.5, X), input_error);
    AllocationSpec ok;
    CHECK_THROWS_AS(allocate(ok, -1.0, 0.5, X), input_error);
    CHECK_THROWS_AS(allocate(ok, 1.0, -0.5, X), input_error);
}

TEST_CASE("isotonic projection pools adjacent violators") {
    CHECK((isotonic_non_decreasing({3, 1, 2}) ==
           std::vector<double>{2, 2, 2}));
    CHECK((isotonic_non_decreasing({1, 2, 3}) ==
           std::vector<double>{1, 2, 3}));
    CHECK((isotonic_non_decreasing({2, 1}) ==
           std::vector<double>{1.5, 1.5}));
    CHECK((isotonic_non_decreasing({5, 3, 4, 6}) ==
           std::vector<double>{4, 4, 4, 6}));
    CHECK(isotonic_non_decreasing({}).empty());

    // Output is non-decreasing even under awkward floating point inputs.
    std::vector<double> v = {0.1, 0.3, 0.2, 0.2, 0.7, 0.1, 0.4};
    auto w = isotonic_non_decreasing(v);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] >= w[i - 1]);
}

TEST_CASE("quality curve validation") {
    QualityCurve c;
    c.grid = {0.0, 0.5, 1.0};
    c.h = {0.1, 0.4, 0.4};
    CHECK_NOTHROW(c.validate());

    QualityCurve bad_start = c;
    bad_start.grid = {0.1, 0.5, 1.0};
    CHECK_THROWS_AS(bad_start.validate(), input_error);

    QualityCurve bad_mono = c;
    bad_mono.h = {0.4, 0.1, 0.4};
    CHECK_THROWS_AS(bad_mono.validate(), input_error);

    QualityCurve bad_range = c;
    bad_range.h = {0.1, 0.4, 1.4};
    CHECK_THROWS_AS(bad_range.validate(), input_error);

    QualityCurve bad_grid = c;
    bad_grid.grid = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS(bad_grid.validate(), input_error);
}

TEST_CASE("curve interpolation is exact on grid points and linear between") {
    QualityCurve c;
    c.grid = {0.0, 0.5, 1.0};
    c.h = {0.0, 0.4, 0.8};
    CHECK(c.value_at(0.0) == 0.0);
    CHECK(c.value_at(0.5) == 0.4);
    CHECK(c.value_at(1.0) == 0.8);
    CHECK(std::abs(c.value_at(0.25) - 0.2) < 1e-15);
    CHECK(std::abs(c.value_at(0.75) - 0.6) < 1e-15);
    CHECK_THROWS_AS(c.value_at(-0.1), input_error);
    CHECK_THROWS_AS(c.value_at(1.1), input_error);
}

TEST_CASE("estimated curve is monotone with an exact undegraded tail") {
    auto X = two_rows();
    auto task = linear_task();
    AllocationSpec spec;
    spec.sigma = 1.0;
    spec.noise_seed = 11;
    PredictorSpec pspec;
    pspec.ridge_lambda = 1e-6;
    GainSpec gspec;
    std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};

    auto curve = quality_curve(spec, 0.5, X, task, pspec, gspec, grid, 4);
    CHECK_NOTHROW(curve.validate());
    CHECK(curve.replications == 4);

    double g0 = gain(gspec, task.y_test(), fit_predict(pspec, X, task));
    // Grid points at or past the price carry the undegraded gain bit-exactly.
    CHECK(curve.h[2] == g0);
    CHECK(curve.h[3] == g0);
    CHECK(curve.h[4] == g0);
    for (double v : curve.h) CHECK(v <= g0);
}

TEST_CASE("curve family matches per-price curves bit for bit") {
    auto X = two_rows();
    auto task = linear_task();
    AllocationSpec spec;
    spec.sigma = 0.8;
    spec.noise_seed = 13;
    PredictorSpec pspec;
    pspec.ridge_lambda = 1e-6;
    GainSpec gspec;
    std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    std::vector<double> prices = {0.3, 0.7};

    for (bool fresh : {false, true}) {
        spec.fresh_noise = fresh;
        auto fam = quality_curve_family(spec, prices, X, task, pspec, gspec,
                                        grid, 3);
        REQUIRE(fam.size() == 2);
        for (std::size_t i = 0; i < prices.size(); ++i) {
            auto single = quality_curve(spec, prices[i], X, task, pspec,
                                        gspec, grid, 3);
            CHECK(fam[i].h == single.h);
            CHECK(fam[i].grid == single.grid);
        }
    }
}

TEST_CASE("curve construction validates its inputs") {
    auto X = two_rows();
    auto task = linear_task();
    AllocationSpec spec;
    PredictorSpec pspec;
    GainSpec gspec;
    std::vector<double> grid = {0.0, 1.0};
    CHECK_THROWS_AS(
        quality_curve(spec, -1.0, X, task, pspec, gspec, grid, 4), input_error);
    CHECK_THROWS_AS(
        quality_curve(spec, 0.5, X, task, pspec, gspec, {0.5, 1.0}, 4),
        input_error);
    CHECK_THROWS_AS(
        quality_curve(spec, 0.5, X, task, pspec, gspec, {0.0}, 4), input_error);
    CHECK_THROWS_AS(
        quality_curve(spec, 0.5, X, task, pspec, gspec, grid, 0), input_error);
}
