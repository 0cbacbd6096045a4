#pragma once

// Scenario generation, config-file plumbing, and the experiment drivers the
// CLI and the acceptance suite share: golden-value reproduction, the axiom
// battery, the impossibility witness, penalty families, and the regret
// experiment.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "division.hpp"
#include "engine.hpp"
#include "pricing.hpp"

namespace datamarket {

// ---------------------------------------------------------------------------
// Scenario generation

enum class MuDistribution { fixed, uniform, two_type_adversarial };
enum class TaskKind { regression, classification };

struct Scenario {
    std::string name = "inventory";
    std::size_t sellers = 5;
    std::size_t columns = 120;
    std::size_t buyers = 100;
    double rho = 0.3;          // pairwise feature correlation in [0, 1]
    double noise = 0.5;        // target noise level
    TaskKind task_kind = TaskKind::regression;
    MuDistribution mu_dist = MuDistribution::uniform;
    bool truthful = false;     // buyers commit to bid = mu instead of
                               // re-optimizing against each posted curve
    double mu_value = 0.6;     // fixed distribution
    double mu_low = 0.35;      // two-type stream
    double mu_high = 0.75;
    double b_max = 1.0;
    std::uint64_t master_seed = 1;

    void validate() const {
        if (sellers < 1) throw input_error("Scenario: need at least one seller");
        if (columns < 5) throw input_error("Scenario: need at least 5 columns");
        if (buyers < 1) throw input_error("Scenario: need at least one buyer");
        if (!(rho >= 0.0) || !(rho <= 1.0))
            throw input_error("Scenario: rho must be in [0, 1]");
        if (!(noise >= 0.0)) throw input_error("Scenario: noise must be >= 0");
        if (!(b_max > 0.0)) throw input_error("Scenario: b_max must be > 0");
        for (double mu : {mu_value, mu_low, mu_high})
            if (!(mu >= 0.0) || !(mu <= b_max))
                throw input_error("Scenario: mu values must be in [0, b_max]");
    }
};

struct GeneratedScenario {
    FeatureMatrix X;
    std::vector<BuyerInstance> buyers;
};

// Features are correlated Gaussian series (shared component weighted by
// sqrt(rho)); each buyer's target is a sparse signed combination of up to
// three feature rows plus noise, split 80/20 into train/test columns.
inline GeneratedScenario generate_scenario(const Scenario& s) {
    s.validate();
    const std::size_t M = s.sellers, T = s.columns;
    Rng frng(derive_seed(s.master_seed, 10));
    std::vector<double> common(T);
    for (double& v : common) v = frng.normal();
    std::vector<std::vector<double>> rows(M, std::vector<double>(T));
    const double wc = std::sqrt(s.rho), wi = std::sqrt(1.0 - s.rho);
    for (std::size_t m = 0; m < M; ++m) {
        Rng rrng(derive_seed(s.master_seed, 10, m + 1));
        for (std::size_t t = 0; t < T; ++t)
            rows[m][t] = wc * common[t] + wi * rrng.normal();
    }
    GeneratedScenario out{FeatureMatrix(rows), {}};
    out.buyers.reserve(s.buyers);
    for (std::size_t n = 0; n < s.buyers; ++n) {
        Rng brng(derive_seed(s.master_seed, 11, n));
        auto perm = brng.permutation(M);
        std::size_t support = std::min<std::size_t>(3, M);
        std::vector<double> y(T, 0.0);
        for (std::size_t i = 0; i < support; ++i) {
            double w = brng.uniform(0.5, 1.5) * (brng.uniform01() < 0.5 ? -1.0 : 1.0);
            for (std::size_t t = 0; t < T; ++t) y[t] += w * out.X.at(perm[i], t);
        }
        for (std::size_t t = 0; t < T; ++t) y[t] += s.noise * brng.normal();
        if (s.task_kind == TaskKind::classification)
            for (double& v : y) v = v > 0.0 ? 1.0 : 0.0;
        BuyerInstance buyer;
        buyer.task = holdout_split(std::move(y), 0.8);
        switch (s.mu_dist) {
            case MuDistribution::fixed: buyer.mu = s.mu_value; break;
            case MuDistribution::uniform: buyer.mu = brng.uniform(0.0, s.b_max); break;
            case MuDistribution::two_type_adversarial:
                buyer.mu = (n % 2 == 0) ? s.mu_low : s.mu_high;
                break;
        }
        if (s.truthful) buyer.bid = buyer.mu;
        out.buyers.push_back(std::move(buyer));
    }
    return out;
}

// Named presets used by the CLI; config keys can override every field.
inline Scenario scenario_preset(const std::string& name) {
    Scenario s;
    s.name = name;
    if (name == "inventory") {
        // Storefront demo: a handful of correlated foot-traffic-like series.
        s.sellers = 5; s.columns = 120; s.buyers = 100;
        s.rho = 0.3; s.noise = 0.5; s.mu_dist = MuDistribution::uniform;
    } else if (name == "identical") {
        s.sellers = 2; s.columns = 60; s.buyers = 50;
        s.rho = 1.0; s.noise = 0.3;
        s.mu_dist = MuDistribution::fixed; s.mu_value = 0.6;
    } else if (name == "twotype") {
        // Label prediction keeps the quality ramp steep (useless data scores
        // near chance level), so posted-price payments stay comparable to
        // b_max and the weight updates get usable signal.
        s.sellers = 2; s.columns = 24; s.buyers = 500;
        s.rho = 0.5; s.noise = 0.25;
        s.task_kind = TaskKind::classification;
        s.mu_dist = MuDistribution::two_type_adversarial;
        s.mu_low = 0.25; s.mu_high = 0.9;
        s.truthful = true;
    } else {
        throw input_error("unknown scenario preset: " + name);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Config files: flat key=value with [section] headers; keys are exposed as
// "section.key". Deterministic hash so runs can prove they used the same
// configuration.

using Config = std::map<std::string, std::string>;

inline Config parse_config(std::istream& is) {
    Config cfg;
    std::string line, section;
    std::size_t lineno = 0;
    auto trim = [](std::string v) {
        auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
        while (!v.empty() && issp(v.front())) v.erase(v.begin());
        while (!v.empty() && issp(v.back())) v.pop_back();
        return v;
    };
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw input_error("config line " + std::to_string(lineno) +
                                  ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw input_error("config line " + std::to_string(lineno) +
                              ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw input_error("config line " + std::to_string(lineno) +
                              ": empty key");
        cfg[section.empty() ? key : section + "." + key] = val;
    }
    return cfg;
}

inline Config parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw input_error("cannot open config file: " + path);
    return parse_config(f);
}

// FNV-1a over the canonical "key=value\n" serialization (keys sorted by the
// map ordering), so equal configs hash equal regardless of input layout.
inline std::uint64_t config_hash(const Config& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : cfg) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    return h;
}

inline std::string cfg_get(const Config& cfg, const std::string& key,
                           const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

inline double cfg_double(const Config& cfg, const std::string& key,
                         double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw input_error("config value for " + key + " is not a number: " +
                          it->second);
    }
}

inline std::uint64_t cfg_u64(const Config& cfg, const std::string& key,
                             std::uint64_t fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t pos = 0;
        auto v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw input_error("config value for " + key +
                          " is not an unsigned integer: " + it->second);
    }
}

inline std::size_t cfg_size(const Config& cfg, const std::string& key,
                            std::size_t fallback) {
    return static_cast<std::size_t>(cfg_u64(cfg, key, fallback));
}

// Environment override wins over the config seed so experiments can be
// re-rolled without editing files.
inline std::uint64_t effective_seed(const Config& cfg,
                                    std::uint64_t fallback = 1) {
    if (const char* env = std::getenv("DATAMARKET_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw input_error("DATAMARKET_SEED is not an unsigned integer");
        }
    }
    return cfg_u64(cfg, "scenario.seed", fallback);
}

inline Scenario scenario_from_config(const Config& cfg) {
    Scenario s = scenario_preset(cfg_get(cfg, "scenario.name", "inventory"));
    s.sellers = cfg_size(cfg, "scenario.sellers", s.sellers);
    s.columns = cfg_size(cfg, "scenario.columns", s.columns);
    s.buyers = cfg_size(cfg, "scenario.buyers", s.buyers);
    s.rho = cfg_double(cfg, "scenario.rho", s.rho);
    s.noise = cfg_double(cfg, "scenario.noise", s.noise);
    s.mu_value = cfg_double(cfg, "scenario.mu_value", s.mu_value);
    s.mu_low = cfg_double(cfg, "scenario.mu_low", s.mu_low);
    s.mu_high = cfg_double(cfg, "scenario.mu_high", s.mu_high);
    s.b_max = cfg_double(cfg, "scenario.b_max", s.b_max);
    std::string dist = cfg_get(cfg, "scenario.mu_dist", "");
    if (!dist.empty()) {
        if (dist == "fixed") s.mu_dist = MuDistribution::fixed;
        else if (dist == "uniform") s.mu_dist = MuDistribution::uniform;
        else if (dist == "two_type") s.mu_dist = MuDistribution::two_type_adversarial;
        else throw input_error("unknown mu_dist: " + dist);
    }
    std::string task = cfg_get(cfg, "scenario.task", "");
    if (!task.empty()) {
        if (task == "regression") s.task_kind = TaskKind::regression;
        else if (task == "classification") s.task_kind = TaskKind::classification;
        else throw input_error("unknown task kind: " + task);
    }
    std::string truthful = cfg_get(cfg, "scenario.truthful", "");
    if (!truthful.empty()) {
        if (truthful == "true") s.truthful = true;
        else if (truthful == "false") s.truthful = false;
        else throw input_error("scenario.truthful must be true or false");
    }
    s.master_seed = effective_seed(cfg, s.master_seed);
    s.validate();
    return s;
}

inline MarketConfig market_config_from_config(const Config& cfg,
                                              const Scenario& s) {
    MarketConfig mc;
    mc.b_max = s.b_max;
    mc.master_seed = derive_seed(s.master_seed, 20);

    std::string alloc = cfg_get(cfg, "market.allocation", "gaussian");
    if (alloc == "gaussian") mc.allocation.kind = AllocationKind::gaussian_noise;
    else if (alloc == "bernoulli") mc.allocation.kind = AllocationKind::bernoulli_mask;
    else throw input_error("unknown allocation kind: " + alloc);
    mc.allocation.sigma = cfg_double(cfg, "market.sigma", mc.allocation.sigma);

    std::string pred = cfg_get(cfg, "market.predictor", "ridge");
    if (pred == "ridge") mc.predictor.kind = PredictorKind::ridge_regression;
    else if (pred == "knn") mc.predictor.kind = PredictorKind::k_nearest_neighbor;
    else throw input_error("unknown predictor kind: " + pred);
    mc.predictor.ridge_lambda =
        cfg_double(cfg, "market.ridge_lambda", mc.predictor.ridge_lambda);
    mc.predictor.k = cfg_size(cfg, "market.k", mc.predictor.k);

    std::string g = cfg_get(cfg, "market.gain", "one_minus_rmse");
    if (g == "one_minus_rmse") mc.gain.kind = GainKind::one_minus_rmse;
    else if (g == "normalized_accuracy") mc.gain.kind = GainKind::normalized_accuracy;
    else throw input_error("unknown gain kind: " + g);

    std::string sim = cfg_get(cfg, "market.similarity", "cosine");
    if (sim == "cosine") mc.similarity.kind = SimilarityKind::cosine;
    else if (sim == "inverse_hellinger")
        mc.similarity.kind = SimilarityKind::inverse_hellinger;
    else throw input_error("unknown similarity kind: " + sim);
    mc.similarity.hellinger_bins =
        cfg_size(cfg, "market.hellinger_bins", mc.similarity.hellinger_bins);

    if (cfg.count("market.epsilon")) mc.epsilon = cfg_double(cfg, "market.epsilon", 0);
    if (cfg.count("market.delta")) mc.delta = cfg_double(cfg, "market.delta", 0);
    mc.lipschitz = cfg_double(cfg, "market.lipschitz", mc.lipschitz);
    mc.lambda = cfg_double(cfg, "market.lambda", mc.lambda);
    if (cfg.count("market.shapley_samples"))
        mc.shapley_samples = cfg_size(cfg, "market.shapley_samples", 0);
    mc.shapley_epsilon =
        cfg_double(cfg, "market.shapley_epsilon", mc.shapley_epsilon);
    mc.shapley_delta = cfg_double(cfg, "market.shapley_delta", mc.shapley_delta);
    mc.replications = cfg_size(cfg, "market.replications", mc.replications);
    mc.validate();
    return mc;
}

// ---------------------------------------------------------------------------
// Golden-value reproduction: two identical fully predictive sellers, then
// one of them replicated, with exact Shapley sub-oracles throughout.

struct ReproReport {
    double base_psi_a = 0.0;             // exact share, two sellers
    double base_psi_b = 0.0;
    double replicated_each = 0.0;        // exact share, after one replica
    double replicated_total_a = 0.0;     // replicating family's total
    double robust_pair_lambda1 = 0.0;    // penalized share at rate 1
    double robust_replicated_total_lambda1 = 0.0;
    double robust_pair_half_rate = 0.0;  // penalized share at the default rate
    double robust_replicated_total_half_rate = 0.0;
};

namespace detail {

// Feature rows equal to the target make every non-empty coalition worth
// exactly 1 (perfect prediction) while the baseline clamps to 0, giving
// closed-form divisions to compare against.
inline FeatureMatrix golden_matrix(std::size_t rows) {
    std::vector<std::vector<double>> r(rows, {3.0, 3.0, -1.0, 1.0});
    return FeatureMatrix(r);
}

inline PredictionTask golden_task() {
    PredictionTask t;
    t.y = {3.0, 3.0, -1.0, 1.0};
    t.train_columns = {0, 1};
    t.test_columns = {2, 3};
    return t;
}

}  // namespace detail

inline ReproReport repro_report() {
    PredictorSpec pspec;
    pspec.ridge_lambda = 0.0;  // full-rank after dedup, so exact interpolation
    GainSpec gspec;
    SimilaritySpec sspec;  // cosine: identical rows score exactly 1
    auto task = detail::golden_task();

    auto X2 = detail::golden_matrix(2);
    auto X3 = detail::golden_matrix(3);
    auto o2 = CoalitionValueOracle::from_market(X2, task, pspec, gspec);
    auto o3 = CoalitionValueOracle::from_market(X3, task, pspec, gspec);

    ReproReport r;
    auto base = shapley_exact(o2);
    r.base_psi_a = base.psi[0];
    r.base_psi_b = base.psi[1];
    auto repl = shapley_exact(o3);
    r.replicated_each = repl.psi[0];
    r.replicated_total_a = repl.psi[0] + repl.psi[1];

    auto rob2 = shapley_robust_exact(o2, X2, sspec, 1.0);
    auto rob3 = shapley_robust_exact(o3, X3, sspec, 1.0);
    r.robust_pair_lambda1 = rob2.psi[0];
    r.robust_replicated_total_lambda1 = rob3.psi[0] + rob3.psi[1];

    auto rob2h = shapley_robust_exact(o2, X2, sspec, default_penalty_lambda);
    auto rob3h = shapley_robust_exact(o3, X3, sspec, default_penalty_lambda);
    r.robust_pair_half_rate = rob2h.psi[0];
    r.robust_replicated_total_half_rate = rob3h.psi[0] + rob3h.psi[1];
    return r;
}

// ---------------------------------------------------------------------------
// Impossibility witness: any anonymous division that stays balanced must pay
// a replicating seller's family 2/3 where the honest market paid 1/2.

struct ImpossibilityWitness {
    std::vector<double> honest;      // two identical sellers
    std::vector<double> replicated;  // one of them cloned once
    double family_total = 0.0;       // replicating family's payout
    double honest_share = 0.0;
    bool replication_profits = false;
};

inline ImpossibilityWitness impossibility_witness() {
    auto unit_game = [](std::uint64_t mask) { return mask == 0 ? 0.0 : 1.0; };
    auto o2 = CoalitionValueOracle::from_function(2, unit_game);
    auto o3 = CoalitionValueOracle::from_function(3, unit_game);
    ImpossibilityWitness w;
    w.honest = shapley_exact(o2).psi;
    w.replicated = shapley_exact(o3).psi;
    w.family_total = w.replicated[0] + w.replicated[1];
    w.honest_share = w.honest[0];
    w.replication_profits = w.family_total > w.honest_share;
    return w;
}

// ---------------------------------------------------------------------------
// Axiom battery over random small markets. Each instance embeds a duplicate
// pair (symmetry), an all-zero row (zero element), and is checked for
// balance; additivity is checked by mixing two oracles 50/50.

struct AxiomReport {
    std::size_t instances = 0;
    std::size_t balance_failures = 0;
    std::size_t symmetry_failures = 0;
    std::size_t zero_element_failures = 0;
    std::size_t additivity_failures = 0;
    std::size_t sampled_failures = 0;
    double worst_exact_error = 0.0;
    double worst_sampled_error = 0.0;

    bool all_passed() const {
        return balance_failures + symmetry_failures + zero_element_failures +
                   additivity_failures + sampled_failures ==
               0;
    }
};

inline AxiomReport axiom_battery(std::size_t instances, std::uint64_t seed,
                                 double exact_tol = 1e-9,
                                 double sampled_eps = 0.1) {
    AxiomReport rep;
    rep.instances = instances;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed(seed, 30, inst));
        const std::size_t M = 3 + inst % 4;  // 3..6 sellers
        const std::size_t T = 15;
        std::vector<std::vector<double>> rows(M, std::vector<double>(T));
        for (std::size_t t = 0; t < T; ++t) rows[0][t] = rng.normal();
        rows[1] = rows[0];  // symmetric pair
        for (std::size_t m = 2; m + 1 < M; ++m)
            for (std::size_t t = 0; t < T; ++t) rows[m][t] = rng.normal();
        std::fill(rows[M - 1].begin(), rows[M - 1].end(), 0.0);  // zero element
        FeatureMatrix X(rows);
        std::vector<double> y(T);
        for (std::size_t t = 0; t < T; ++t)
            y[t] = rows[0][t] + 0.5 * rng.normal();
        PredictionTask task = holdout_split(std::move(y), 0.8);

        PredictorSpec ridge;
        ridge.ridge_lambda = 0.05;
        GainSpec gspec;
        auto oracle = CoalitionValueOracle::from_market(X, task, ridge, gspec);
        auto exact = shapley_exact(oracle);

        double vfull = oracle.value((std::uint64_t{1} << M) - 1);
        double vempty = oracle.value(0);
        double total = 0.0;
        for (double p : exact.psi) total += p;
        double balance_err = std::abs(total - (vfull - vempty));
        double symmetry_err = std::abs(exact.psi[0] - exact.psi[1]);
        double zero_err = std::abs(exact.psi[M - 1]);
        rep.worst_exact_error = std::max(
            {rep.worst_exact_error, balance_err, symmetry_err, zero_err});
        if (balance_err > exact_tol) ++rep.balance_failures;
        if (symmetry_err > exact_tol) ++rep.symmetry_failures;
        if (zero_err > exact_tol) ++rep.zero_element_failures;

        // Additivity: Shapley of an even mixture equals the mixture of
        // Shapley vectors, for both exact and same-seed sampled estimates.
        PredictorSpec knn;
        knn.kind = PredictorKind::k_nearest_neighbor;
        auto oracle2 = CoalitionValueOracle::from_market(X, task, knn, gspec);
        auto exact2 = shapley_exact(oracle2);
        auto mixed = CoalitionValueOracle::from_function(
            M, [&](std::uint64_t mask) {
                return 0.5 * (oracle.value(mask) + oracle2.value(mask));
            });
        auto exact_mixed = shapley_exact(mixed);
        double additivity_err = 0.0;
        for (std::size_t m = 0; m < M; ++m)
            additivity_err = std::max(
                additivity_err,
                std::abs(exact_mixed.psi[m] -
                         0.5 * (exact.psi[m] + exact2.psi[m])));
        rep.worst_exact_error = std::max(rep.worst_exact_error, additivity_err);
        if (additivity_err > exact_tol) ++rep.additivity_failures;

        // Sampled battery at a generous sample count; balance holds exactly
        // for permutation sampling (marginals telescope), the rest within eps.
        std::size_t K = sample_size(M, sampled_eps / 3.0, 0.01);
        auto sampled = shapley_approx(oracle, K, derive_seed(seed, 31, inst));
        double stotal = 0.0;
        for (double p : sampled.psi) stotal += p;
        double sbalance = std::abs(stotal - (vfull - vempty));
        double ssym = std::abs(sampled.psi[0] - sampled.psi[1]);
        double szero = std::abs(sampled.psi[M - 1]);
        auto sampled_mixed =
            shapley_approx(mixed, K, derive_seed(seed, 31, inst));
        auto sampled2 = shapley_approx(oracle2, K, derive_seed(seed, 31, inst));
        double sadd = 0.0;
        for (std::size_t m = 0; m < M; ++m)
            sadd = std::max(sadd, std::abs(sampled_mixed.psi[m] -
                                           0.5 * (sampled.psi[m] +
                                                  sampled2.psi[m])));
        double worst = std::max({sbalance, ssym, szero, sadd});
        rep.worst_sampled_error = std::max(rep.worst_sampled_error, worst);
        if (sbalance > exact_tol || ssym > sampled_eps || szero > sampled_eps ||
            sadd > sampled_eps)
            ++rep.sampled_failures;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Penalty families for the validity checker.

inline std::function<double(double)> penalty_family(const std::string& name,
                                                    double rate) {
    if (name == "exponential")
        return [rate](double x) { return std::exp(-rate * x); };
    if (name == "pow2") return [](double x) { return std::exp2(-x); };
    if (name == "reciprocal") return [](double x) { return 1.0 / (1.0 + x); };
    throw input_error("unknown penalty family: " + name +
                      " (expected exponential, pow2, or reciprocal)");
}

inline std::vector<double> default_penalty_grid() {
    return {0.0, 1.0, 2.0, 3.0, 4.0};
}

// ---------------------------------------------------------------------------
// Regret experiment: stationary or adversarial buyer stream, several run
// lengths, several seeds; rows go to CSV, means drive the decay check.

struct RegretRow {
    std::size_t n_buyers = 0;
    std::uint64_t seed = 0;
    double realized = 0.0;
    double best_fixed = 0.0;
    double avg_regret = 0.0;
};

struct RegretExperiment {
    std::vector<RegretRow> rows;
    std::map<std::size_t, double> mean_avg_regret;
};

inline RegretExperiment regret_experiment(const Scenario& base,
                                          const MarketConfig& mc_base,
                                          const std::vector<std::size_t>& lengths,
                                          std::size_t n_seeds) {
    if (lengths.empty() || n_seeds == 0)
        throw input_error("regret_experiment: nothing to run");
    RegretExperiment out;
    for (std::size_t n : lengths) {
        // Seeds are independent runs, so they fan out across threads; rows
        // are collected by index and reduced in seed order to keep results
        // identical to a sequential sweep.
        std::vector<RegretRow> rows(n_seeds);
        auto run_one = [&base, &mc_base, &rows, n](std::size_t s) {
            Scenario sc = base;
            sc.buyers = n;
            sc.master_seed = derive_seed(base.master_seed, 40 + s, n);
            auto gen = generate_scenario(sc);
            MarketConfig mc = mc_base;
            mc.epsilon.reset();  // auto schedule per run length
            mc.delta.reset();
            mc.master_seed = derive_seed(sc.master_seed, 41);
            auto result = run_market(mc, gen.X, gen.buyers);
            if (!result.errors.empty())
                throw numeric_error("regret_experiment: step failures in run");
            auto summary = hindsight_regret(result.revenue_log, result.net);
            rows[s] = {n, sc.master_seed, summary.realized_total,
                       summary.best_fixed_total, summary.regret_average};
        };
        std::vector<std::future<void>> pending;
        pending.reserve(n_seeds);
        for (std::size_t s = 0; s < n_seeds; ++s)
            pending.push_back(std::async(std::launch::async, run_one, s));
        for (auto& f : pending) f.get();
        double acc = 0.0;
        for (const auto& row : rows) {
            out.rows.push_back(row);
            acc += row.avg_regret;
        }
        out.mean_avg_regret[n] = acc / static_cast<double>(n_seeds);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV writers. Numbers are printed with round-trip precision so byte-equal
// outputs certify identical runs.

namespace detail {

inline void write_number(std::ostream& os, double v) {
    char buf[32];
    auto n = std::snprintf(buf, sizeof buf, "%.17g", v);
    os.write(buf, n);
}

}  // namespace detail

inline void write_regret_csv(std::ostream& os,
                             const std::vector<RegretRow>& rows) {
    os << "N,realized_revenue,best_fixed_revenue,avg_regret\n";
    for (const auto& r : rows) {
        os << r.n_buyers << ',';
        detail::write_number(os, r.realized);
        os << ',';
        detail::write_number(os, r.best_fixed);
        os << ',';
        detail::write_number(os, r.avg_regret);
        os << '\n';
    }
}

// Per-step revenue plus the regret of the prefix ending at that step.
inline void write_summary_csv(std::ostream& os, const MarketRunResult& result) {
    os << "n,revenue,cumulative_regret\n";
    std::vector<double> totals(result.net.points.size(), 0.0);
    double realized = 0.0;
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
        const auto& row = result.revenue_log.candidate[i];
        for (std::size_t j = 0; j < totals.size(); ++j) totals[j] += row[j];
        realized += result.revenue_log.realized[i];
        double best = 0.0;
        for (double t : totals) best = std::max(best, t);
        os << result.traces[i].n << ',';
        detail::write_number(os, result.revenue_log.realized[i]);
        os << ',';
        detail::write_number(os, best - realized);
        os << '\n';
    }
}

}  // namespace datamarket
