// Acceptance suite: ten end-to-end checks, one printed line each.
// Usage: acceptance [N] where N selects a single criterion; no argument
// runs all ten. Exit code 0 iff every executed criterion passes, including
// its wall-clock budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "datamarket/datamarket.hpp"

using namespace datamarket;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

// --- criterion 1: golden division values ------------------------------------

constexpr double kGoldenExactTol = 1e-9;
constexpr double kGoldenRobustTol = 1e-6;

Outcome criterion1() {
    auto r = repro_report();
    const double inv2e = 0.18393972058572117;       // 1 / (2e)
    const double two_over_3e2 = 0.0902235221577418; // 2 / (3 e^2)
    struct Row {
        const char* name;
        double got, want, tol;
    } rows[] = {
        {"pair share", r.base_psi_a, 0.5, kGoldenExactTol},
        {"pair share b", r.base_psi_b, 0.5, kGoldenExactTol},
        {"replicated family total", r.replicated_total_a, 2.0 / 3.0,
         kGoldenExactTol},
        {"robust pair share", r.robust_pair_lambda1, inv2e, kGoldenRobustTol},
        {"robust replicated total", r.robust_replicated_total_lambda1,
         two_over_3e2, kGoldenRobustTol},
    };
    double worst = 0.0;
    for (const auto& row : rows) {
        double err = std::abs(row.got - row.want);
        worst = std::max(worst, err);
        if (err > row.tol) {
            std::ostringstream os;
            os << row.name << " got " << row.got << " want " << row.want;
            return {false, os.str()};
        }
    }
    return {true, fmt("worst error %.2e", worst)};
}

// --- criterion 2: truthful bidding dominates --------------------------------

constexpr double kDominanceTol = 1e-9;
constexpr int kDominanceInstances = 150;

Outcome criterion2() {
    Rng rng(20260819);
    double worst_gap = 0.0;
    for (int t = 0; t < kDominanceInstances; ++t) {
        std::vector<double> grid = {0.0, 1.0};
        for (int i = 0; i < 6; ++i) grid.push_back(rng.uniform01());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        QualityCurve curve;
        curve.grid = grid;
        curve.h.resize(grid.size());
        for (double& v : curve.h) v = rng.uniform01();
        std::sort(curve.h.begin(), curve.h.end());
        curve.validate();

        double mu = rng.uniform01();
        double u_truth = buyer_utility(curve, mu, mu);
        double u_best = u_truth;
        for (double b : curve.grid)
            u_best = std::max(u_best, buyer_utility(curve, mu, b));
        worst_gap = std::max(worst_gap, u_best - u_truth);
        if (u_truth < u_best - kDominanceTol)
            return {false, fmt("instance %.0f gap %.3e", double(t),
                               u_best - u_truth)};
    }
    return {true, fmt("%.0f instances, worst gap %.2e",
                      double(kDominanceInstances), worst_gap)};
}

// --- criterion 3: payment quadrature ----------------------------------------

constexpr double kQuadratureGridTol = 1e-9;
constexpr double kQuadratureOffTol = 1e-3;

Outcome criterion3() {
    // Linear curve h(z) = z / b_max pays b^2 / (2 b_max).
    for (double b_max : {1.0, 2.0}) {
        QualityCurve lin;
        for (int k = 0; k <= 8; ++k) {
            lin.grid.push_back(b_max * k / 8.0);
            lin.h.push_back(static_cast<double>(k) / 8.0);
        }
        lin.validate();
        for (double b : {0.0, b_max / 4.0, b_max / 2.0, b_max}) {
            double want = b * b / (2.0 * b_max);
            if (std::abs(myerson_payment(lin, b) - want) > kQuadratureGridTol)
                return {false, fmt("linear curve at b=%.3f (b_max %.0f)", b,
                                   b_max)};
        }
        double off = 0.777 * b_max;  // off the curve's own grid
        if (std::abs(myerson_payment(lin, off) - off * off / (2.0 * b_max)) >
            kQuadratureOffTol)
            return {false, "linear curve off-grid"};
    }

    // Step to gain g at price p pays p*g for any winning bid; the sharp
    // ramp version matches to grid tolerance, a 1e-3-wide ramp to 1e-3.
    const double p = 0.5, g = 0.8;
    for (double width : {1e-12, 1e-3}) {
        QualityCurve step;
        step.grid = {0.0, p - width, p, 1.0};
        step.h = {0.0, 0.0, g, g};
        step.validate();
        double tol = width < 1e-9 ? kQuadratureGridTol : kQuadratureOffTol;
        if (std::abs(myerson_payment(step, 1.0) - p * g) > tol)
            return {false, fmt("step curve, ramp width %.0e", width)};
        if (std::abs(myerson_payment(step, 0.9) - p * g) > kQuadratureOffTol)
            return {false, "step curve off-grid bid"};
        if (myerson_payment(step, 0.25) != 0.0)
            return {false, "step curve below the ramp"};
    }
    return {true, "linear and step closed forms match"};
}

// --- criterion 4: regret decay ----------------------------------------------

constexpr double kRegretRatioBound = 0.8;

Outcome criterion4() {
    Scenario sc = scenario_preset("twotype");
    sc.master_seed = 3;
    MarketConfig mc;
    mc.allocation.kind = AllocationKind::gaussian_noise;
    mc.allocation.sigma = 4.0;
    mc.predictor.kind = PredictorKind::k_nearest_neighbor;
    mc.predictor.k = 1;
    mc.gain.kind = GainKind::normalized_accuracy;
    mc.similarity.kind = SimilarityKind::cosine;
    mc.replications = 4;

    auto exp = regret_experiment(sc, mc, {500, 2000}, 10);
    double short_run = exp.mean_avg_regret.at(500);
    double long_run = exp.mean_avg_regret.at(2000);
    double ratio = long_run / short_run;
    bool pass = short_run > 0.0 && ratio < kRegretRatioBound;
    return {pass, fmt("mean avg regret %.4f @500 -> %.4f @2000, ratio %.3f",
                      short_run, long_run, ratio)};
}

// --- criterion 5: sampled division accuracy ---------------------------------

constexpr double kShapleyEps = 0.1;
constexpr double kShapleyDelta = 0.05;
constexpr int kShapleyTrials = 100;
constexpr int kShapleyTrialsNeeded = 95;

Outcome criterion5() {
    const std::size_t M = 8, T = 15;
    const std::size_t K = sample_size(M, kShapleyEps, kShapleyDelta);
    int passed = 0;
    double worst = 0.0;
    for (int trial = 0; trial < kShapleyTrials; ++trial) {
        Rng rng(derive_seed(501, trial));
        std::vector<std::vector<double>> rows(M, std::vector<double>(T));
        for (auto& r : rows)
            for (double& v : r) v = rng.normal();
        std::vector<double> y(T);
        for (std::size_t t = 0; t < T; ++t)
            y[t] = rows[0][t] - 0.5 * rows[3][t] + 0.5 * rng.normal();
        FeatureMatrix X(rows);
        auto task = holdout_split(std::move(y), 0.8);
        PredictorSpec pspec;
        pspec.ridge_lambda = 0.05;
        GainSpec gspec;
        auto oracle = CoalitionValueOracle::from_market(X, task, pspec, gspec);
        auto exact = shapley_exact(oracle);  // also fills the value cache
        auto approx = shapley_approx(oracle, K, derive_seed(502, trial));
        double linf = 0.0;
        for (std::size_t m = 0; m < M; ++m)
            linf = std::max(linf, std::abs(approx.psi[m] - exact.psi[m]));
        worst = std::max(worst, linf);
        if (linf < kShapleyEps) ++passed;
    }
    bool pass = passed >= kShapleyTrialsNeeded;
    return {pass, fmt("%.0f/100 trials under 0.1 (K=%.0f, worst %.4f)",
                      double(passed), double(K), worst)};
}

// --- criterion 6: replication robustness ------------------------------------

constexpr int kReplicationTrials = 100;
constexpr int kReplicationTrialsNeeded = 95;

Outcome criterion6() {
    const std::size_t M = 6, T = 15;
    int held = 0;
    double worst_excess = -1.0;
    for (int trial = 0; trial < kReplicationTrials; ++trial) {
        Rng rng(derive_seed(601, trial));
        std::vector<std::vector<double>> rows(M, std::vector<double>(T));
        for (auto& r : rows)
            for (double& v : r) v = rng.normal();
        std::vector<double> y(T);
        for (std::size_t t = 0; t < T; ++t)
            y[t] = rows[1][t] + 0.5 * rows[4][t] + 0.5 * rng.normal();
        FeatureMatrix X(rows);
        auto task = holdout_split(std::move(y), 0.8);
        std::vector<std::size_t> copies(M);
        for (auto& c : copies)
            c = static_cast<std::size_t>(rng.uniform01() * 4.0) % 4;  // 0..3
        PredictorSpec pspec;
        pspec.ridge_lambda = 0.05;
        GainSpec gspec;
        SimilaritySpec sspec;
        auto rep = replication_robustness_test(
            X, task, pspec, gspec, sspec, copies, std::numbers::ln2, 0.1,
            0.05, derive_seed(602, trial));
        worst_excess = std::max(worst_excess, rep.max_excess);
        if (rep.holds) ++held;
    }
    bool pass = held >= kReplicationTrialsNeeded;
    return {pass, fmt("%.0f/100 trials held (worst excess %.4f)",
                      double(held), worst_excess)};
}

// --- criterion 7: axiom battery ---------------------------------------------

Outcome criterion7() {
    auto rep = axiom_battery(50, 20260819, 1e-9, 0.1);
    std::ostringstream os;
    os << "balance " << 50 - rep.balance_failures << "/50, symmetry "
       << 50 - rep.symmetry_failures << "/50, zero "
       << 50 - rep.zero_element_failures << "/50, additivity "
       << 50 - rep.additivity_failures << "/50, sampled "
       << 50 - rep.sampled_failures << "/50"
       << fmt(", worst exact %.2e", rep.worst_exact_error);
    return {rep.all_passed(), os.str()};
}

// --- criterion 8: penalty checker -------------------------------------------

Outcome criterion8() {
    auto grid = default_penalty_grid();
    for (double rate : {std::numbers::ln2, 1.0, 2.0}) {
        auto chk = penalty_valid(penalty_family("exponential", rate), 4, grid);
        if (!chk.valid) return {false, fmt("rejected exp rate %.3f", rate)};
    }
    if (!penalty_valid(penalty_family("pow2", 0.0), 4, grid).valid)
        return {false, "rejected the halving family"};

    auto rec = penalty_valid(penalty_family("reciprocal", 0.0), 4, grid);
    if (rec.valid) return {false, "accepted the reciprocal family"};
    if (!rec.violation_x || *rec.violation_x != 1.0 || *rec.violation_c != 1)
        return {false, "reciprocal violation not at (x=1, c=1)"};

    auto tight = penalty_valid(penalty_family("exponential", std::numbers::ln2),
                               4, grid);
    if (std::abs(tight.min_slack) > 1e-9 || tight.min_slack_c != 1)
        return {false, fmt("no equality at c=1 (slack %.2e at c=%.0f)",
                           tight.min_slack, double(tight.min_slack_c))};
    return {true, "valid families accepted, rewarding one rejected at (1,1)"};
}

// --- criterion 9: replication profits without the penalty -------------------

Outcome criterion9() {
    auto w = impossibility_witness();
    bool pass = std::abs(w.honest_share - 0.5) < 1e-12 &&
                std::abs(w.family_total - 2.0 / 3.0) < 1e-12 &&
                w.replication_profits;
    return {pass, fmt("family total %.6f vs honest %.6f", w.family_total,
                      w.honest_share)};
}

// --- criterion 10: efficiency -----------------------------------------------

constexpr double kStepRatioBound = 2.0;
constexpr double kDivisionExponentBound = 2.5;

Outcome criterion10() {
    auto per_step = [](std::size_t n, std::uint64_t seed) {
        Scenario sc;
        sc.sellers = 2;
        sc.columns = 12;
        sc.buyers = n;
        sc.rho = 0.5;
        sc.noise = 0.3;
        sc.master_seed = seed;
        auto gen = generate_scenario(sc);
        MarketConfig mc;
        mc.predictor.ridge_lambda = 0.05;
        mc.epsilon = 0.1;  // pinned so both lengths do identical per-step work
        mc.delta = 0.2;
        mc.replications = 2;
        mc.shapley_samples = 50;
        mc.master_seed = derive_seed(seed, 1);
        auto t0 = clock_type::now();
        auto r = run_market(mc, gen.X, gen.buyers);
        double dt = seconds_since(t0);
        if (!r.errors.empty()) throw numeric_error("efficiency run failed");
        return dt / static_cast<double>(n);
    };
    per_step(10, 1);  // warm caches and allocators
    std::vector<double> short_runs = {per_step(10, 2), per_step(10, 3),
                                      per_step(10, 4)};
    std::sort(short_runs.begin(), short_runs.end());
    double base = short_runs[1];  // median of three
    double long_run = per_step(1000, 5);
    double ratio = long_run / base;

    auto division_time = [](std::size_t M, std::uint64_t seed) {
        const std::size_t T = 60;
        Rng rng(seed);
        std::vector<std::vector<double>> rows(M, std::vector<double>(T));
        for (auto& r : rows)
            for (double& v : r) v = rng.normal();
        std::vector<double> y(T);
        for (std::size_t t = 0; t < T; ++t)
            y[t] = rows[0][t] - rows[1][t] + 0.5 * rng.normal();
        FeatureMatrix X(rows);
        auto task = holdout_split(std::move(y), 0.8);
        PredictorSpec pspec;
        pspec.kind = PredictorKind::k_nearest_neighbor;
        pspec.k = 3;
        GainSpec gspec;
        auto oracle = CoalitionValueOracle::from_market(X, task, pspec, gspec);
        std::size_t K = sample_size(M, 0.1, 0.05);  // grows linearly with M
        auto t0 = clock_type::now();
        shapley_approx(oracle, K, derive_seed(seed, 9));
        return seconds_since(t0);
    };
    division_time(10, 100);  // warmup
    std::vector<std::size_t> sizes = {10, 20, 40};
    std::vector<double> times;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        times.push_back(division_time(sizes[i], 101 + i));
    // Least-squares slope of log t against log M.
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        mx += std::log(static_cast<double>(sizes[i]));
        my += std::log(times[i]);
    }
    mx /= 3.0;
    my /= 3.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        double dx = std::log(static_cast<double>(sizes[i])) - mx;
        num += dx * (std::log(times[i]) - my);
        den += dx * dx;
    }
    double exponent = num / den;

    bool pass = ratio <= kStepRatioBound && exponent < kDivisionExponentBound;
    return {pass,
            fmt("per-step ratio %.2f (n=1000 vs n=10), division exponent %.2f",
                ratio, exponent)};
}

// --- driver ------------------------------------------------------------------

struct Criterion {
    int id;
    const char* label;
    double budget_seconds;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "golden division values reproduce", 1.0, criterion1},
    {2, "truthful bids dominate on random monotone curves", 30.0, criterion2},
    {3, "payment quadrature matches closed forms", 1.0, criterion3},
    {4, "average regret decays with stream length", 300.0, criterion4},
    {5, "sampled divisions track exact ones at the sized budget", 120.0,
     criterion5},
    {6, "replication does not profit under the penalized division", 120.0,
     criterion6},
    {7, "division axioms hold on random markets", 60.0, criterion7},
    {8, "penalty checker separates valid from rewarding families", 1.0,
     criterion8},
    {9, "unpenalized division provably rewards replication", 1.0, criterion9},
    {10, "step cost flat in stream length, division cost near quadratic",
     300.0, criterion10},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 10) {
            std::fprintf(stderr, "usage: %s [criterion 1..10]\n", argv[0]);
            return 2;
        }
    }
    bool all_pass = true;
    for (const auto& c : kCriteria) {
        if (only && c.id != only) continue;
        auto t0 = clock_type::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double dt = seconds_since(t0);
        bool in_budget = dt < c.budget_seconds;
        bool pass = o.pass && in_budget;
        all_pass = all_pass && pass;
        std::printf("[%s] criterion %d: %s -- %s (%.2fs%s)\n",
                    pass ? "PASS" : "FAIL", c.id, c.label, o.detail.c_str(),
                    dt, in_budget ? "" : ", OVER BUDGET");
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
