// Command-line driver: adaptive/uniform FEM-BEM coupling runs on the
// benchmark problems, rate fitting on run logs, and self-verification.

#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "fembem/bench.hpp"
#include "fembem/verify.hpp"

namespace {

std::map<std::string, std::string> parse_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream is(path);
    if (!is) throw CLI::ValidationError("--config", "cannot open config file " + path);
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

struct RunOptions {
    std::string problem = "lshape-laplace";
    std::string coupling = "jn";
    std::string strategy = "adaptive";
    double theta = 0.25;
    double c = 1.0;
    double tol = 1e-10;
    int max_elements = 10000;
    int quadrature_order = 4;
    std::string out;
    std::string plot;
    std::string config;
};

fembem::CouplingMethod parse_coupling(const std::string& s) {
    if (s == "bmc") return fembem::CouplingMethod::BielakMacCamy;
    if (s == "jn") return fembem::CouplingMethod::JohnsonNedelec;
    if (s == "sym") return fembem::CouplingMethod::Symmetric;
    throw CLI::ValidationError("--coupling", "must be bmc, jn, or sym");
}

void apply_config(const RunOptions& opt, CLI::App* cmd, RunOptions& effective) {
    if (opt.config.empty()) return;
    const auto kv = parse_config(opt.config);
    auto want = [&](const char* flag, const char* key) {
        return cmd->count(flag) == 0 && kv.count(key) > 0;
    };
    if (want("--theta", "theta")) effective.theta = std::stod(kv.at("theta"));
    if (want("--tol", "tol")) effective.tol = std::stod(kv.at("tol"));
    if (want("--max-elements", "max_elements"))
        effective.max_elements = std::stoi(kv.at("max_elements"));
    if (want("--quadrature-order", "quadrature_order"))
        effective.quadrature_order = std::stoi(kv.at("quadrature_order"));
}

fembem::RunResult run_one(const RunOptions& opt, fembem::CouplingMethod method,
                          fembem::RefineStrategy strategy) {
    const fembem::ProblemSpec spec = fembem::make_problem(fembem::problem_from_string(opt.problem),
                                                          opt.c);
    fembem::AdaptiveConfig cfg;
    cfg.method = method;
    cfg.theta = opt.theta;
    cfg.max_elements = opt.max_elements;
    cfg.strategy = strategy;
    cfg.solver.tol = opt.tol;
    cfg.quadrature_order = opt.quadrature_order;
    return fembem::run(fembem::to_adaptive(spec), cfg);
}

bool log_has_failure(const fembem::RunLog& log) {
    for (const auto& r : log.rows)
        if (r.flags.find("solver_failure") != std::string::npos) return true;
    return false;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FEM-BEM coupling benchmarks: adaptive runs, rate fits, self-tests"};
    app.require_subcommand(1);

    RunOptions opt;

    CLI::App* cmd_run = app.add_subcommand("run", "single adaptive or uniform refinement run");
    cmd_run->add_option("--problem", opt.problem,
                        "lshape-laplace | lshape-anisotropic | zshape-unknown | zshape-nonlinear");
    cmd_run->add_option("--coupling", opt.coupling, "bmc | jn | sym");
    cmd_run->add_option("--strategy", opt.strategy, "adaptive | uniform");
    cmd_run->add_option("--theta", opt.theta, "Doerfler marking parameter");
    cmd_run->add_option("--c", opt.c, "ellipticity parameter of the anisotropic model");
    cmd_run->add_option("--tol", opt.tol, "solver tolerance");
    cmd_run->add_option("--max-elements", opt.max_elements, "stop once #triangles exceeds this");
    cmd_run->add_option("--quadrature-order", opt.quadrature_order,
                        "boundary Gauss order of the estimator");
    cmd_run->add_option("--out", opt.out, "output CSV path");
    cmd_run->add_option("--plot", opt.plot, "optional SVG log-log plot path");
    cmd_run->add_option("--config", opt.config, "key=value config file");

    std::string rates_csv, rates_quantity = "est_total";
    int rates_window = 0;
    CLI::App* cmd_rates = app.add_subcommand("rates", "fit a decay rate from a run CSV");
    cmd_rates->add_option("csv", rates_csv, "run CSV file")->required();
    cmd_rates->add_option("--quantity", rates_quantity,
                          "err_omega | est_total | est_omega | est_gamma");
    cmd_rates->add_option("--window", rates_window, "use only the last N levels (0 = all)");

    std::string suite = "all";
    CLI::App* cmd_verify = app.add_subcommand("verify", "run the property self-test suites");
    cmd_verify->add_option("--suite", suite, "ops | coupling | adapt | all");

    CLI::App* cmd_compare =
        app.add_subcommand("compare", "all three couplings x two strategies on one problem");
    cmd_compare->add_option("--problem", opt.problem, "benchmark problem name");
    cmd_compare->add_option("--theta", opt.theta, "Doerfler marking parameter");
    cmd_compare->add_option("--c", opt.c, "ellipticity parameter");
    cmd_compare->add_option("--max-elements", opt.max_elements, "element budget");
    cmd_compare->add_option("--out", opt.out, "output CSV path")->required();
    cmd_compare->add_option("--config", opt.config, "key=value config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            RunOptions eff = opt;
            apply_config(opt, cmd_run, eff);
            const auto method = parse_coupling(eff.coupling);
            fembem::RefineStrategy strategy;
            if (eff.strategy == "adaptive") strategy = fembem::RefineStrategy::Adaptive;
            else if (eff.strategy == "uniform") strategy = fembem::RefineStrategy::Uniform;
            else throw CLI::ValidationError("--strategy", "must be adaptive or uniform");

            const fembem::RunResult res = run_one(eff, method, strategy);
            if (!eff.out.empty()) {
                std::ofstream os(eff.out);
                if (!os) throw CLI::ValidationError("--out", "cannot open " + eff.out);
                fembem::write_run_csv(res.log, os);
            } else {
                fembem::write_run_csv(res.log, std::cout);
            }
            if (!eff.plot.empty()) fembem::write_loglog_svg(res.log, eff.plot);
            if (log_has_failure(res.log)) {
                std::cerr << "solver failure during the run\n";
                return 1;
            }
            return 0;
        }
        if (cmd_rates->parsed()) {
            std::ifstream is(rates_csv);
            if (!is) throw CLI::ValidationError("csv", "cannot open " + rates_csv);
            const fembem::RunLog log = fembem::read_run_csv(is);
            const int window = rates_window > 0 ? rates_window : static_cast<int>(log.rows.size());
            const fembem::RateReport rep = fembem::fit_rate(log, rates_quantity, window);
            std::cout.precision(6);
            std::cout << rep.alpha << "\n";
            return 0;
        }
        if (cmd_verify->parsed()) {
            bool ok;
            if (suite == "ops") ok = fembem::verify_ops(std::cout);
            else if (suite == "coupling") ok = fembem::verify_coupling(std::cout);
            else if (suite == "adapt") ok = fembem::verify_adapt(std::cout);
            else if (suite == "all") ok = fembem::verify_all(std::cout);
            else throw CLI::ValidationError("--suite", "must be ops, coupling, adapt, or all");
            return ok ? 0 : 1;
        }
        if (cmd_compare->parsed()) {
            RunOptions eff = opt;
            apply_config(opt, cmd_compare, eff);
            std::ofstream os(eff.out);
            if (!os) throw CLI::ValidationError("--out", "cannot open " + eff.out);
            os << "coupling,strategy,level,n_triangles,n_boundary_edges,h_max,err_omega,"
                  "est_total,est_omega,est_gamma,solver_iters,time_seconds,flags\n";
            os.precision(17);
            bool failed = false;
            for (const char* coupling : {"bmc", "jn", "sym"}) {
                for (const char* strategy : {"adaptive", "uniform"}) {
                    const fembem::RunResult res =
                        run_one(eff, parse_coupling(coupling),
                                std::string(strategy) == "adaptive"
                                    ? fembem::RefineStrategy::Adaptive
                                    : fembem::RefineStrategy::Uniform);
                    failed = failed || log_has_failure(res.log);
                    for (const auto& r : res.log.rows) {
                        os << coupling << ',' << strategy << ',' << r.level << ','
                           << r.n_triangles << ',' << r.n_boundary_edges << ',' << r.h_max << ',';
                        if (std::isfinite(r.err_omega)) os << r.err_omega;
                        os << ',' << r.est_total << ',' << r.est_omega << ',' << r.est_gamma
                           << ',' << r.solver_iters << ',' << r.time_seconds << ',' << r.flags
                           << "\n";
                    }
                }
            }
            return failed ? 1 : 0;
        }
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const fembem::SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
