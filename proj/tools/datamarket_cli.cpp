// Command-line front end: run market simulations, price single datasets,
// sweep regret experiments, and sanity-check division properties.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "datamarket/datamarket.hpp"

namespace dm = datamarket;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void print_run_header(const dm::Config& cfg, std::uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "# config_hash=%016llx seed=%llu",
                  static_cast<unsigned long long>(dm::config_hash(cfg)),
                  static_cast<unsigned long long>(seed));
    std::cout << buf << '\n';
}

// Features: one row per seller, "id,v1,v2,...". Target: one value per line.
dm::FeatureMatrix read_features_csv(const std::string& path,
                                    std::vector<std::string>& ids) {
    std::ifstream f(path);
    if (!f) throw dm::input_error("cannot open features file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw dm::input_error("features line " + std::to_string(lineno) +
                                  ": missing seller id");
        ids.push_back(cell);
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw dm::input_error("features line " + std::to_string(lineno) +
                                      ": bad number '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw dm::input_error("features file is empty: " + path);
    dm::FeatureMatrix X(rows);
    X.set_seller_ids(ids);
    return X;
}

std::vector<double> read_target_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw dm::input_error("cannot open target file: " + path);
    std::vector<double> y;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            y.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw dm::input_error("target line " + std::to_string(lineno) +
                                  ": bad number '" + line + "'");
        }
    }
    if (y.empty()) throw dm::input_error("target file is empty: " + path);
    return y;
}

// Traces go to --trace when given, otherwise to stdout as JSONL right after
// the header line; the human-readable summary stays on stderr so piped trace
// output is clean.
int cmd_simulate(const std::string& config_path, const std::string& preset,
                 std::size_t n_override, std::uint64_t seed_override,
                 const std::string& trace_path, const std::string& summary_path) {
    if (config_path.empty() == preset.empty()) {
        std::cerr << "simulate: pass exactly one of --config or --scenario\n";
        return 2;
    }
    dm::Config cfg;
    if (!config_path.empty()) cfg = dm::parse_config_file(config_path);
    else cfg["scenario.name"] = preset;
    if (n_override > 0) cfg["scenario.buyers"] = std::to_string(n_override);
    if (seed_override > 0) cfg["scenario.seed"] = std::to_string(seed_override);

    auto scenario = dm::scenario_from_config(cfg);
    print_run_header(cfg, scenario.master_seed);
    auto mc = dm::market_config_from_config(cfg, scenario);
    auto gen = dm::generate_scenario(scenario);
    auto result = dm::run_market(mc, gen.X, gen.buyers);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw dm::input_error("cannot open trace output: " + trace_path);
        dm::write_jsonl(out, result.traces);
    } else {
        dm::write_jsonl(std::cout, result.traces);
    }
    if (!summary_path.empty()) {
        std::ofstream out(summary_path);
        if (!out)
            throw dm::input_error("cannot open summary output: " + summary_path);
        dm::write_summary_csv(out, result);
    }

    auto summary = dm::hindsight_regret(result.revenue_log, result.net);
    std::cerr << "scenario " << scenario.name << ": " << result.traces.size()
              << " steps, " << result.errors.size() << " failed\n";
    std::cerr << "schedule epsilon=" << fmt6(result.epsilon_used)
              << " delta=" << fmt6(result.delta_used)
              << " grid=" << result.net.points.size() << '\n';
    std::cerr << "realized revenue " << fmt6(summary.realized_total)
              << ", best fixed price " << fmt6(summary.best_fixed_price)
              << " earns " << fmt6(summary.best_fixed_total)
              << ", average regret " << fmt6(summary.regret_average) << '\n';
    for (std::size_t m = 0; m < gen.X.rows(); ++m)
        std::cerr << "  seller " << gen.X.seller_ids()[m] << " revenue "
                  << fmt6(result.seller_revenue[m]) << '\n';
    for (const auto& e : result.errors)
        std::cerr << "step " << e.step << " failed: " << e.message << '\n';
    return result.errors.empty() ? 0 : 1;
}

int cmd_shapley(const std::string& features_path, const std::string& target_path,
                double holdout, std::size_t samples, double lambda,
                const std::string& similarity, double revenue,
                std::uint64_t seed) {
    dm::Config cfg{{"cli.features", features_path},
                   {"cli.target", target_path},
                   {"cli.lambda", fmt(lambda)},
                   {"cli.similarity", similarity}};
    seed = dm::effective_seed(cfg, seed);
    print_run_header(cfg, seed);

    std::vector<std::string> ids;
    auto X = read_features_csv(features_path, ids);
    auto task = dm::holdout_split(read_target_csv(target_path), holdout);

    dm::PredictorSpec pspec;
    pspec.ridge_lambda = 0.05;
    dm::GainSpec gspec;
    dm::SimilaritySpec sspec;
    if (similarity == "cosine") sspec.kind = dm::SimilarityKind::cosine;
    else if (similarity == "inverse_hellinger")
        sspec.kind = dm::SimilarityKind::inverse_hellinger;
    else throw dm::input_error("unknown similarity kind: " + similarity);

    auto oracle = dm::CoalitionValueOracle::from_market(X, task, pspec, gspec);
    if (samples == 0) samples = dm::sample_size(X.rows(), 0.1, 0.05);
    auto plain = dm::shapley_approx(oracle, samples, seed);
    auto robust = dm::shapley_robust(oracle, X, samples, sspec, lambda, seed);
    auto shares = robust.revenue_shares(revenue);

    std::cout << "sellers=" << X.rows() << " samples=" << samples
              << " lambda=" << fmt6(lambda) << '\n';
    std::cout << "id,psi,penalty,robust_psi,revenue_share\n";
    for (std::size_t m = 0; m < X.rows(); ++m) {
        double penalty = plain.psi[m] != 0.0 ? robust.psi[m] / plain.psi[m] : 0.0;
        std::cout << ids[m] << ',' << fmt6(plain.psi[m]) << ','
                  << fmt6(penalty) << ',' << fmt6(robust.psi[m]) << ','
                  << fmt6(shares[m]) << '\n';
    }
    return 0;
}

int cmd_regret(const std::string& config_path, const std::string& lengths_arg,
               std::size_t n_seeds, const std::string& out_path) {
    auto cfg = dm::parse_config_file(config_path);
    auto scenario = dm::scenario_from_config(cfg);
    print_run_header(cfg, scenario.master_seed);
    auto mc = dm::market_config_from_config(cfg, scenario);

    std::vector<std::size_t> lengths;
    std::stringstream ss(lengths_arg);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) lengths.push_back(std::stoul(tok));

    auto exp = dm::regret_experiment(scenario, mc, lengths, n_seeds);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw dm::input_error("cannot open output: " + out_path);
        dm::write_regret_csv(out, exp.rows);
    } else {
        dm::write_regret_csv(std::cout, exp.rows);
    }
    for (const auto& [n, mean] : exp.mean_avg_regret)
        std::cout << "N=" << n << " mean average regret " << fmt6(mean) << '\n';
    return 0;
}

int cmd_penalty_check(const std::string& family, double rate, double c_max) {
    dm::Config cfg{{"cli.family", family},
                   {"cli.rate", fmt(rate)},
                   {"cli.c_max", fmt(c_max)}};
    print_run_header(cfg, 0);
    auto f = dm::penalty_family(family, rate);
    auto check = dm::penalty_valid(f, c_max, dm::default_penalty_grid());
    if (check.valid) {
        std::cout << family << ": replication-safe on the test grid (min slack "
                  << fmt(check.min_slack) << " at x=" << fmt(check.min_slack_x)
                  << ", c=" << fmt(check.min_slack_c) << ")\n";
        return 0;
    }
    std::cout << family << ": rewards replication at x=" << fmt(*check.violation_x)
              << ", c=" << fmt(*check.violation_c) << '\n';
    return 1;
}

int cmd_axioms(std::size_t instances, std::uint64_t seed, double epsilon) {
    dm::Config cfg{{"cli.instances", std::to_string(instances)},
                   {"cli.epsilon", fmt(epsilon)}};
    seed = dm::effective_seed(cfg, seed);
    print_run_header(cfg, seed);
    auto rep = dm::axiom_battery(instances, seed, 1e-9, epsilon);
    std::cout << "instances=" << rep.instances
              << " balance_failures=" << rep.balance_failures
              << " symmetry_failures=" << rep.symmetry_failures
              << " zero_element_failures=" << rep.zero_element_failures
              << " additivity_failures=" << rep.additivity_failures
              << " sampled_failures=" << rep.sampled_failures << '\n';
    std::cout << "worst exact error " << fmt(rep.worst_exact_error)
              << ", worst sampled error " << fmt(rep.worst_sampled_error)
              << '\n';
    std::cout << (rep.all_passed() ? "all axioms hold\n" : "axiom failures\n");
    return rep.all_passed() ? 0 : 1;
}

int cmd_repro() {
    dm::Config cfg{{"cli.command", "repro"}};
    print_run_header(cfg, 0);
    auto r = dm::repro_report();
    struct Line {
        const char* name;
        double got;
        double want;
        double tol;
    };
    const double inv2e = 1.0 / (2.0 * std::numbers::e);
    const double repl1 = 2.0 / (3.0 * std::numbers::e * std::numbers::e);
    const Line lines[] = {
        {"pair share", r.base_psi_a, 0.5, 1e-9},
        {"pair share (other)", r.base_psi_b, 0.5, 1e-9},
        {"replicated share", r.replicated_each, 1.0 / 3.0, 1e-9},
        {"replicating family total", r.replicated_total_a, 2.0 / 3.0, 1e-9},
        {"robust pair share, rate 1", r.robust_pair_lambda1, inv2e, 1e-9},
        {"robust family total, rate 1", r.robust_replicated_total_lambda1,
         repl1, 1e-9},
        {"robust pair share, default rate", r.robust_pair_half_rate, 0.25,
         1e-9},
        {"robust family total, default rate",
         r.robust_replicated_total_half_rate, 1.0 / 6.0, 1e-9},
    };
    bool ok = true;
    for (const auto& l : lines) {
        bool pass = std::abs(l.got - l.want) <= l.tol;
        ok = ok && pass;
        std::cout << (pass ? "ok   " : "FAIL ") << l.name << ": got "
                  << fmt(l.got) << ", want " << fmt(l.want) << '\n';
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-sided data market simulator"};
    app.require_subcommand(1);

    std::string config_path, preset, trace_path, summary_path;
    std::size_t n_buyers = 0;
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "run a full market scenario");
    sim->add_option("--config", config_path, "scenario config file");
    sim->add_option("--scenario", preset,
                    "preset name (inventory, identical, twotype)");
    sim->add_option("--n", n_buyers, "override the buyer count");
    sim->add_option("--seed", sim_seed, "override the scenario seed");
    sim->add_option("--trace", trace_path,
                    "write step trace JSONL here (default stdout)");
    sim->add_option("--summary", summary_path, "write per-step CSV here");

    std::string features_path, target_path, similarity = "cosine";
    double holdout = 0.8, lambda = dm::default_penalty_lambda, revenue = 1.0;
    std::size_t samples = 0;
    std::uint64_t seed = 1;
    auto* shap = app.add_subcommand("shapley", "divide revenue for one dataset");
    shap->add_option("--features", features_path, "CSV: seller id, then values")
        ->required();
    shap->add_option("--target", target_path, "CSV: one target value per line")
        ->required();
    shap->add_option("--holdout", holdout, "train fraction (default 0.8)");
    shap->add_option("--samples", samples, "permutation samples (0 = auto)");
    shap->add_option("--lambda", lambda, "similarity penalty rate");
    shap->add_option("--similarity", similarity, "cosine or inverse_hellinger");
    shap->add_option("--revenue", revenue, "revenue to divide");
    shap->add_option("--seed", seed, "sampling seed");

    std::string lengths = "500,2000", regret_out;
    std::size_t n_seeds = 3;
    auto* reg = app.add_subcommand("regret", "sweep run lengths and seeds");
    reg->add_option("--config", config_path, "scenario config file")->required();
    reg->add_option("--lengths", lengths, "comma-separated run lengths");
    reg->add_option("--seeds", n_seeds, "seeds per length");
    reg->add_option("--out", regret_out, "write CSV here (default stdout)");

    std::string family;
    double rate = dm::default_penalty_lambda, c_max = 3.0;
    auto* pen = app.add_subcommand("penalty-check",
                                   "test a penalty family for replication-proofness");
    pen->add_option("--family", family, "exponential, pow2, or reciprocal")
        ->required();
    pen->add_option("--rate", rate, "rate for the exponential family");
    pen->add_option("--cmax", c_max, "largest replication factor tested");

    std::size_t instances = 50;
    double ax_eps = 0.1;
    std::uint64_t ax_seed = 1;
    auto* ax = app.add_subcommand("axioms", "randomized division axiom battery");
    ax->add_option("--instances", instances, "markets to test");
    ax->add_option("--seed", ax_seed, "battery seed");
    ax->add_option("--epsilon", ax_eps, "sampled-estimate tolerance");

    app.add_subcommand("repro", "recompute the golden division values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, preset, n_buyers, sim_seed,
                                trace_path, summary_path);
        if (shap->parsed())
            return cmd_shapley(features_path, target_path, holdout, samples,
                               lambda, similarity, revenue, seed);
        if (reg->parsed()) return cmd_regret(config_path, lengths, n_seeds, regret_out);
        if (pen->parsed()) return cmd_penalty_check(family, rate, c_max);
        if (ax->parsed()) return cmd_axioms(instances, ax_seed, ax_eps);
        return cmd_repro();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
