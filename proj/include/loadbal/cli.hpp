#pragma once

// Command-line front end: solve, oracle, check, simulate and sweep.
//
// Exit codes: 0 success, 1 check failed (solver/oracle gap too large),
// 2 input error, 3 non-convergence.

#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loadbal/config.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/flow_synthesis.hpp"
#include "loadbal/kkt_solver.hpp"
#include "loadbal/log.hpp"
#include "loadbal/network.hpp"
#include "loadbal/oracle.hpp"
#include "loadbal/simulator.hpp"

namespace loadbal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNonConvergence = 3;

inline std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

namespace detail {

using nlohmann::json;

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << content;
}

inline json kkt_to_json(const KktReport& r) {
    json violations = json::array();
    for (const auto& v : r.role_violations) violations.push_back(v);
    return {{"ok", r.ok()},
            {"tol", r.tol},
            {"sink", r.sink},
            {"active_source", r.active_source},
            {"neutral", r.neutral},
            {"idle_source", r.idle_source},
            {"balance", r.balance},
            {"lambda_sinks", r.lambda_sinks},
            {"lambda_sources", r.lambda_sources},
            {"guard_applied", r.guard_applied},
            {"guard_margin", r.guard_margin},
            {"role_violations", violations}};
}

inline json solve_report_json(const Network& net, const OptimalSolution& sol, const FlowMatrix& flows,
                              const KktReport& kkt) {
    json nodes = json::array();
    json ids = json::array();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double b = sol.allocation.beta[i];
        nodes.push_back({{"id", net.node(i).id},
                         {"role", std::string(role_name(sol.partition.roles[i]))},
                         {"beta", b},
                         {"phi", net.arrival(i)},
                         {"marginal_delay", marginal_node_delay(net.delay(i), b)}});
        ids.push_back(net.node(i).id);
    }
    return {{"status", "ok"},
            {"nodes", nodes},
            {"alpha", sol.alpha},
            {"lambda", sol.allocation.lambda},
            {"comm_price", sol.comm_price},
            {"mean_response_time", sol.mean_response_time(net)},
            {"aggregate_objective", sol.objective},
            {"interior_objective", sol.interior_objective},
            {"no_transfer_chosen", sol.no_transfer_chosen},
            {"outer_iterations", sol.outer_iterations},
            {"flows", {{"ids", ids}, {"matrix", flows.rows()}}},
            {"kkt", kkt_to_json(kkt)}};
}

inline std::string solve_report_csv(const Network& net, const OptimalSolution& sol) {
    std::ostringstream os;
    os << "node_id,role,beta,phi,marginal_delay\n";
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double b = sol.allocation.beta[i];
        os << net.node(i).id << ',' << role_name(sol.partition.roles[i]) << ',' << num(b) << ','
           << num(net.arrival(i)) << ',' << num(marginal_node_delay(net.delay(i), b)) << '\n';
    }
    return os.str();
}

inline void print_solution_table(std::ostream& out, const Network& net, const OptimalSolution& sol,
                                 const KktReport& kkt) {
    out << std::left << std::setw(12) << "node" << std::setw(15) << "role" << std::right << std::setw(14) << "beta"
        << std::setw(14) << "phi" << std::setw(16) << "f(beta)" << '\n';
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double b = sol.allocation.beta[i];
        out << std::left << std::setw(12) << net.node(i).id << std::setw(15) << role_name(sol.partition.roles[i])
            << std::right << std::setw(14) << num(b) << std::setw(14) << num(net.arrival(i)) << std::setw(16)
            << num(marginal_node_delay(net.delay(i), b)) << '\n';
    }
    out << "alpha              " << num(sol.alpha) << '\n'
        << "lambda             " << num(sol.allocation.lambda) << '\n'
        << "Phi*G'(lambda)     " << num(sol.comm_price) << '\n'
        << "mean response time " << num(sol.mean_response_time(net)) << '\n';
    if (sol.no_transfer_chosen) {
        out << "no-transfer allocation chosen (best transferring allocation: "
            << num(sol.interior_objective / net.total_arrival()) << ")\n";
    }
    out << "optimality check   " << (kkt.ok() ? "ok" : "FAILED") << " (worst residual " << num(kkt.worst())
        << ")\n";
}

/// Runs `count` independent tasks on up to `parallel` threads; results are
/// written by index so output order never depends on scheduling.
inline void fan_out(std::size_t count, unsigned parallel, const std::function<void(std::size_t)>& task) {
    if (parallel <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(parallel, count));
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) task(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace detail

struct SolveOptions {
    std::string config;
    std::optional<double> tol;
    std::string out;
    std::string format = "json";
};

inline int cmd_solve(const SolveOptions& opt, std::ostream& out, const log::Logger& logger) {
    Scenario sc = load_scenario(opt.config);
    if (opt.tol) sc.solver.verify_tol = *opt.tol;
    const Network& net = sc.network;
    logger.info("solving " + std::to_string(net.size()) + "-node network, Phi = " + num(net.total_arrival()));
    OptimalSolution sol;
    try {
        sol = solve(net, sc.solver);
    } catch (const NonConvergence& e) {
        if (!opt.out.empty()) {
            nlohmann::json doc = {{"status", "non_converged"},
                                  {"message", e.what()},
                                  {"best_beta", e.best_beta()},
                                  {"best_lambda", e.best_lambda()},
                                  {"best_alpha", e.best_alpha()},
                                  {"best_gap", e.best_gap()}};
            detail::write_file(opt.out, doc.dump(2) + "\n");
        }
        throw;
    }
    const FlowMatrix flows = synthesize_flows(net, sol.partition, sol.allocation.beta);
    const KktReport kkt = verify_optimality(net, sol, sc.solver.verify_tol);
    logger.debug("outer iterations: " + std::to_string(sol.outer_iterations));
    detail::print_solution_table(out, net, sol, kkt);
    if (!opt.out.empty()) {
        if (opt.format == "csv") detail::write_file(opt.out, detail::solve_report_csv(net, sol));
        else detail::write_file(opt.out, detail::solve_report_json(net, sol, flows, kkt).dump(2) + "\n");
    }
    return kExitOk;
}

struct OracleOptions {
    std::string config;
    std::size_t grid = 201;
    std::size_t refine = 6;
    double gap_tol = 1e-5;
    std::string out;
};

inline nlohmann::json oracle_report_json(const Network& net, const OracleResult& res,
                                         const std::optional<OptimalSolution>& sol,
                                         const std::optional<ComparisonReport>& cmp, const OracleOptions& opt) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < net.size(); ++i) {
        nodes.push_back({{"id", net.node(i).id},
                         {"beta", res.allocation.beta[i]},
                         {"net_transfer", res.net_transfer[i]},
                         {"role", cmp ? std::string(role_name(cmp->oracle_roles.roles[i])) : std::string()}});
    }
    nlohmann::json doc = {{"nodes", nodes},
                          {"objective", res.objective},
                          {"mean_response_time", net.total_arrival() > 0 ? res.objective / net.total_arrival() : 0.0},
                          {"lambda", res.allocation.lambda},
                          {"evaluations", res.evaluations},
                          {"grid", opt.grid},
                          {"refine_rounds", opt.refine}};
    if (sol && cmp) {
        doc["comparison"] = {{"solver_objective", sol->objective},
                             {"gap", cmp->objective_gap},
                             {"max_beta_deviation", cmp->max_beta_deviation},
                             {"roles_agree", cmp->roles_agree},
                             {"pass", cmp->pass}};
    } else {
        doc["comparison"] = nullptr;
    }
    return doc;
}

inline int run_oracle_like(const OracleOptions& opt, bool is_check, std::ostream& out, const log::Logger& logger) {
    const Scenario sc = load_scenario(opt.config);
    const Network& net = sc.network;
    OracleConfig ocfg;
    ocfg.grid = opt.grid;
    ocfg.refine_rounds = opt.refine;
    const OracleResult res = brute_force_optimum(net, ocfg);
    logger.info("oracle evaluated " + std::to_string(res.evaluations) + " points");

    std::optional<OptimalSolution> sol;
    std::optional<ComparisonReport> cmp;
    try {
        sol = solve(net, sc.solver);
        cmp = compare_solutions(*sol, res, net, opt.gap_tol);
    } catch (const NonConvergence& e) {
        if (is_check) throw;
        logger.error(std::string("solver did not converge, no comparison: ") + e.what());
    }

    out << std::left << std::setw(12) << "node" << std::right << std::setw(14) << "beta" << std::setw(16)
        << "net_transfer" << '\n';
    for (std::size_t i = 0; i < net.size(); ++i) {
        out << std::left << std::setw(12) << net.node(i).id << std::right << std::setw(14)
            << num(res.allocation.beta[i]) << std::setw(16) << num(res.net_transfer[i]) << '\n';
    }
    out << "oracle objective   " << num(res.objective) << '\n';
    if (cmp) {
        out << "solver objective   " << num(sol->objective) << '\n'
            << "gap                " << num(cmp->objective_gap) << '\n'
            << "roles agree        " << (cmp->roles_agree ? "yes" : "no") << '\n'
            << "result             " << (cmp->pass ? "PASS" : "FAIL") << '\n';
    }
    if (!opt.out.empty()) detail::write_file(opt.out, oracle_report_json(net, res, sol, cmp, opt).dump(2) + "\n");
    if (is_check && !cmp->pass) return kExitCheckFailed;
    return kExitOk;
}

struct SimulateOptions {
    std::string config;
    std::optional<std::string> policy;
    std::optional<std::uint64_t> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<double> warmup;
    std::optional<double> low;
    std::optional<double> high;
    std::size_t replications = 1;
    unsigned parallel = 1;
    std::string out;
};

inline std::string sim_csv_header() { return "policy,seed,jobs,mean_response,ci_halfwidth,transfers\n"; }

inline std::string sim_csv_row(const SimReport& r, std::uint64_t total_jobs) {
    std::ostringstream os;
    os << policy_name(r.policy) << ',' << r.seed << ',' << total_jobs << ',' << num(r.mean_response_time) << ','
       << num(r.ci_halfwidth) << ',' << r.transfer_count << '\n';
    return os.str();
}

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, const log::Logger& logger) {
    Scenario sc = load_scenario(opt.config);
    if (opt.policy) sc.sim.policy = parse_policy(*opt.policy);
    if (opt.jobs) sc.sim.total_jobs = *opt.jobs;
    if (opt.seed) sc.sim.seed = *opt.seed;
    if (opt.warmup) sc.sim.warmup_fraction = *opt.warmup;
    sc.sim.validate();
    if (opt.replications < 1) throw InputError("--replications must be >= 1");
    const Network& net = sc.network;

    std::function<SimReport(const SimConfig&)> run;
    switch (sc.sim.policy) {
        case Policy::StaticOptimal: {
            const auto sol = solve(net, sc.solver);
            const auto flows = synthesize_flows(net, sol.partition, sol.allocation.beta);
            run = [&net, flows](const SimConfig& c) { return simulate_static(net, flows, c); };
            break;
        }
        case Policy::DynamicThreshold: {
            Thresholds th;
            if (opt.low && opt.high) {
                th = {*opt.low, *opt.high};
            } else {
                const auto sol = solve(net, sc.solver);
                th = {opt.low.value_or(sol.alpha), opt.high.value_or(sol.alpha + sol.comm_price)};
            }
            logger.info("thresholds low = " + num(th.low) + ", high = " + num(th.high));
            run = [&net, th](const SimConfig& c) { return simulate_dynamic(net, th, c); };
            break;
        }
        default: run = [&net](const SimConfig& c) { return simulate_baseline(net, c); }; break;
    }

    std::vector<SimReport> reports(opt.replications);
    std::vector<std::string> errors(opt.replications);
    detail::fan_out(opt.replications, opt.parallel, [&](std::size_t r) {
        SimConfig c = sc.sim;
        c.seed = sc.sim.seed + r;
        try {
            reports[r] = run(c);
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw InputError(e);

    std::string csv = sim_csv_header();
    for (const auto& r : reports) csv += sim_csv_row(r, sc.sim.total_jobs);
    if (opt.out.empty()) {
        out << csv;
    } else {
        detail::write_file(opt.out, csv);
        for (const auto& r : reports) {
            out << policy_name(r.policy) << " seed " << r.seed << ": mean response " << num(r.mean_response_time)
                << " +/- " << num(r.ci_halfwidth) << ", transfers " << r.transfer_count << '\n';
        }
    }
    return kExitOk;
}

struct SweepOptions {
    std::string config;
    std::string param;
    double from = 0.0;
    double to = 0.0;
    std::size_t steps = 2;
    unsigned parallel = 1;
    std::string out;
};

inline std::string sweep_csv_header() { return "param_value,alpha,lambda,mean_response,roles\n"; }

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, const log::Logger& logger) {
    const nlohmann::json base = read_json_file(opt.config);
    parse_scenario(base);  // the unswept file must be valid on its own
    const auto ptr = resolve_param_path(base, opt.param);
    if (opt.steps < 1) throw InputError("--steps must be >= 1");

    std::vector<std::string> rows(opt.steps);
    std::vector<std::string> errors(opt.steps);
    std::vector<int> codes(opt.steps, kExitOk);
    detail::fan_out(opt.steps, opt.parallel, [&](std::size_t k) {
        const double v = opt.steps == 1 ? opt.from
                                        : opt.from + (opt.to - opt.from) * static_cast<double>(k) /
                                                         static_cast<double>(opt.steps - 1);
        nlohmann::json doc = base;
        doc[ptr] = v;
        std::ostringstream row;
        row << num(v) << ',';
        try {
            const Scenario sc = parse_scenario(doc);
            const auto sol = solve(sc.network, sc.solver);
            row << num(sol.alpha) << ',' << num(sol.allocation.lambda) << ','
                << num(sol.mean_response_time(sc.network)) << ",\"" << sol.partition.compact() << "\"\n";
        } catch (const UnstableNetwork&) {
            row << "nan,nan,nan,unstable\n";
        } catch (const NonConvergence&) {
            row << "nan,nan,nan,nonconverged\n";
        } catch (const InputError& e) {
            errors[k] = "step " + std::to_string(k) + " (" + opt.param + " = " + num(v) + "): " + e.what();
            codes[k] = kExitInput;
        }
        rows[k] = row.str();
    });
    for (std::size_t k = 0; k < opt.steps; ++k)
        if (codes[k] != kExitOk) throw InputError(errors[k]);

    std::string csv = sweep_csv_header();
    for (const auto& r : rows) csv += r;
    logger.info("sweep of " + opt.param + ": " + std::to_string(opt.steps) + " steps");
    if (opt.out.empty()) out << csv;
    else detail::write_file(opt.out, csv);
    return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const log::Logger logger(err, log::level_from_env());
    CLI::App app{"Optimal static load balancing for heterogeneous distributed systems"};
    app.require_subcommand(1);

    SolveOptions solve_opt;
    auto* solve_cmd = app.add_subcommand("solve", "Compute the optimal allocation");
    solve_cmd->add_option("config", solve_opt.config, "Scenario file")->required();
    solve_cmd->add_option("--tol", solve_opt.tol, "Optimality verification tolerance");
    solve_cmd->add_option("--out", solve_opt.out, "Report file");
    solve_cmd->add_option("--format", solve_opt.format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}));

    OracleOptions oracle_opt;
    auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force reference optimum (n <= 5)");
    OracleOptions check_opt;
    auto* check_cmd = app.add_subcommand("check", "Solve, run the oracle, fail on an objective gap");
    for (auto [cmd, o] : {std::pair{oracle_cmd, &oracle_opt}, std::pair{check_cmd, &check_opt}}) {
        cmd->add_option("config", o->config, "Scenario file")->required();
        cmd->add_option("--grid", o->grid, "Grid points per axis")->check(CLI::Range(2, 100000));
        cmd->add_option("--refine", o->refine, "Refinement rounds");
        cmd->add_option("--gap", o->gap_tol, "Allowed solver - oracle objective gap");
        cmd->add_option("--out", o->out, "Report file (JSON)");
    }

    SimulateOptions sim_opt;
    auto* sim_cmd = app.add_subcommand("simulate", "Discrete-event simulation of a routing policy");
    sim_cmd->add_option("config", sim_opt.config, "Scenario file")->required();
    sim_cmd->add_option("--policy", sim_opt.policy,
                        "static_optimal | no_balancing | sq | med | dynamic_threshold");
    sim_cmd->add_option("--jobs", sim_opt.jobs, "Total jobs");
    sim_cmd->add_option("--seed", sim_opt.seed, "Random seed");
    sim_cmd->add_option("--warmup", sim_opt.warmup, "Warm-up fraction");
    sim_cmd->add_option("--low", sim_opt.low, "Lower threshold (dynamic_threshold)");
    sim_cmd->add_option("--high", sim_opt.high, "Upper threshold (dynamic_threshold)");
    sim_cmd->add_option("--replications", sim_opt.replications, "Replications with seeds seed, seed+1, ...");
    sim_cmd->add_option("--parallel", sim_opt.parallel, "Worker threads");
    sim_cmd->add_option("--out", sim_opt.out, "CSV output file");

    SweepOptions sweep_opt;
    auto* sweep_cmd = app.add_subcommand("sweep", "Tabulate the solution against one parameter");
    sweep_cmd->add_option("config", sweep_opt.config, "Scenario file")->required();
    sweep_cmd->add_option("--param", sweep_opt.param, "Parameter path, e.g. comm.params.t")->required();
    sweep_cmd->add_option("--from", sweep_opt.from, "First value")->required();
    sweep_cmd->add_option("--to", sweep_opt.to, "Last value")->required();
    sweep_cmd->add_option("--steps", sweep_opt.steps, "Number of values")->required();
    sweep_cmd->add_option("--parallel", sweep_opt.parallel, "Worker threads");
    sweep_cmd->add_option("--out", sweep_opt.out, "CSV output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*solve_cmd) return cmd_solve(solve_opt, out, logger);
        if (*oracle_cmd) return run_oracle_like(oracle_opt, false, out, logger);
        if (*check_cmd) return run_oracle_like(check_opt, true, out, logger);
        if (*sim_cmd) return cmd_simulate(sim_opt, out, logger);
        if (*sweep_cmd) return cmd_sweep(sweep_opt, out, logger);
    } catch (const NonConvergence& e) {
        logger.error(e.what());
        err << "non-convergence: " << e.what() << "\nbest iterate: lambda = " << num(e.best_lambda())
            << ", alpha = " << num(e.best_alpha()) << '\n';
        return kExitNonConvergence;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::domain_error& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace loadbal::cli
