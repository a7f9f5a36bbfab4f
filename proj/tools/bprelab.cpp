#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpre/env_json.hpp"
#include "bpre/errors.hpp"
#include "bpre/lab.hpp"
#include "bpre/spectral.hpp"

namespace {

using bpre::InputError;
using nlohmann::ordered_json;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + out_path);
    out << text;
}

bpre::Vec parse_s_vector(const std::string& text, int p) {
    bpre::Vec s;
    std::string token;
    std::stringstream ss(text);
    while (std::getline(ss, token, ','))
        s.push_back(std::stod(token));
    if (static_cast<int>(s.size()) == 1 && p > 1) s.assign(static_cast<size_t>(p), s[0]);
    if (static_cast<int>(s.size()) != p)
        throw InputError("--s " + text + ": expected " + std::to_string(p) + " coordinates");
    return s;
}

int type_to_index(int type, int p) {
    if (type < 1 || type > p)
        throw InputError("--type must be in 1.." + std::to_string(p));
    return type - 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching processes in random environment: survival asymptotics lab"};
    app.require_subcommand(1);

    std::string env_path, out_path;
    uint64_t seed = 0;
    int type = 1;
    int grid = 200;

    auto add_common = [&](CLI::App* cmd, bool needs_seed) {
        cmd->add_option("--env", env_path, "environment JSON file")->required();
        cmd->add_option("--out", out_path, "output file (default: stdout)");
        cmd->add_option("--type", type, "initial particle type, 1-based (default 1)");
        cmd->add_option("--grid", grid, "simplex grid size K (default 200)");
        auto* s = cmd->add_option("--seed", seed, "master RNG seed");
        if (needs_seed) s->required();
    };

    // check
    auto* cmd_check = app.add_subcommand("check", "verify conditions H0-H4 and Lambda'(1) < 0");
    double epsilon = 0.5;
    cmd_check->add_option("--epsilon", epsilon, "epsilon for H4 (default 0.5)");
    add_common(cmd_check, false);

    // survival
    auto* cmd_survival = app.add_subcommand("survival", "survival probability curve (CSV)");
    bpre::lab::SurvivalParams sp;
    cmd_survival->add_option("--n-max", sp.n_max, "largest horizon (default 40)");
    cmd_survival->add_option("--reps", sp.reps, "IS paths per horizon batch (default 100000)");
    cmd_survival->add_option("--exact-max", sp.exact_max,
                             "largest exactly enumerated horizon (default 10)");
    cmd_survival->add_option("--budget", sp.budget, "enumeration budget (default 1e7)");
    int fit_window = 10;
    auto* fit_opt = cmd_survival->add_option("--fit-window", fit_window,
                                             "IS rows used for the c estimate (default 10)");
    add_common(cmd_survival, true);

    // phi
    auto* cmd_phi = app.add_subcommand("phi", "conditional PGF estimates (CSV)");
    bpre::lab::PhiParams pp;
    std::vector<std::string> s_args;
    cmd_phi->add_option("--s", s_args,
                        "evaluation point, comma-separated coordinates (repeatable; "
                        "a single value is broadcast)");
    int phi_n_max = 40;
    cmd_phi->add_option("--n-max", phi_n_max, "largest horizon (default 40)");
    cmd_phi->add_option("--reps", pp.reps, "IS paths (default 100000)");
    cmd_phi->add_option("--exact-max", pp.exact_max, "exact rows up to this n (default 10)");
    cmd_phi->add_option("--budget", pp.budget, "enumeration budget (default 1e7)");
    add_common(cmd_phi, true);

    // spectral
    auto* cmd_spectral = app.add_subcommand("spectral", "transfer-operator Perron triple (JSON)");
    double theta = 1.0;
    double tol = 1e-12;
    cmd_spectral->add_option("--theta", theta, "tilting parameter (default 1)");
    cmd_spectral->add_option("--tol", tol, "power-iteration tolerance (default 1e-12)");
    add_common(cmd_spectral, false);

    // tilt-sample
    auto* cmd_tilt = app.add_subcommand("tilt-sample", "sample tilted environment paths (CSV)");
    bpre::lab::TiltSampleParams tp;
    cmd_tilt->add_option("--theta", tp.theta, "tilting parameter (default 1)");
    cmd_tilt->add_option("--n", tp.n, "path length (default 50)");
    cmd_tilt->add_option("--reps", tp.reps, "number of paths (default 1)");
    add_common(cmd_tilt, true);

    // diagnostics
    auto* cmd_diag = app.add_subcommand("diagnostics", "bound/identity/mass diagnostics (JSON)");
    bpre::lab::DiagnosticsParams dp;
    cmd_diag->add_option("--epsilon", dp.epsilon, "epsilon for H4 (default 0.5)");
    cmd_diag->add_option("--reps", dp.is_reps, "IS replicas in stochastic sections");
    add_common(cmd_diag, true);

    CLI11_PARSE(app, argc, argv);

    try {
        const bpre::model::EnvDistribution env = bpre::model::load_env_file(env_path);

        if (*cmd_check) {
            const auto res = bpre::lab::run_check(env, epsilon, grid);
            write_output(bpre::lab::check_json(res).dump(2) + "\n", out_path);
            return res.pass ? 0 : 1;
        }
        if (*cmd_survival) {
            sp.type_index = type_to_index(type, env.p);
            sp.seed = seed;
            sp.grid = grid;
            const auto curve = bpre::lab::survival_curve(env, sp);
            write_output(bpre::lab::survival_csv(curve), out_path);
            ordered_json summary{{"lambda1", curve.lambda1},
                                 {"rows", curve.rows.size()}};
            if (fit_window > 0) {
                try {
                    const auto fit = bpre::lab::fit_c(curve, fit_window);
                    summary["c"] = fit.c;
                    summary["c_std_error"] = fit.std_error;
                    summary["fit_window"] = fit.window;
                } catch (const InputError& err) {
                    if (fit_opt->count() > 0) throw;  // explicit request: surface the error
                    summary["fit_note"] = err.what();
                }
            }
            if (!out_path.empty()) std::cout << summary.dump(2) << "\n";
            return 0;
        }
        if (*cmd_phi) {
            pp.type_index = type_to_index(type, env.p);
            pp.seed = seed;
            pp.grid = grid;
            for (const auto& text : s_args) pp.s_list.push_back(parse_s_vector(text, env.p));
            pp.schedule = {2, 5};
            for (int n = 10; n <= phi_n_max; n += 5) pp.schedule.push_back(n);
            const auto rows = bpre::lab::phi_table(env, pp);
            const double lambda1 = bpre::spectral::solve(env, 1.0, grid).lambda;
            write_output(bpre::lab::phi_csv(rows, pp, lambda1), out_path);
            return 0;
        }
        if (*cmd_spectral) {
            const auto sol = bpre::spectral::solve(env, theta, grid, tol);
            ordered_json j{{"theta", sol.theta},
                           {"lambda", sol.lambda},
                           {"log_lambda", std::log(sol.lambda)},
                           {"iterations", sol.iterations},
                           {"residual", sol.residual},
                           {"nodes", ordered_json::array()},
                           {"r_values", sol.r_values},
                           {"l_weights", sol.l_weights}};
            for (const auto& node : sol.grid.nodes) j["nodes"].push_back(node);
            write_output(j.dump(2) + "\n", out_path);
            return 0;
        }
        if (*cmd_tilt) {
            tp.type_index = type_to_index(type, env.p);
            tp.seed = seed;
            tp.grid = grid;
            write_output(bpre::lab::tilt_sample_csv(env, tp), out_path);
            return 0;
        }
        if (*cmd_diag) {
            dp.seed = seed;
            dp.grid = grid;
            write_output(bpre::lab::run_diagnostics(env, dp).dump(2) + "\n", out_path);
            return 0;
        }
    } catch (const bpre::BudgetExceededError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    } catch (const bpre::InputError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const bpre::NumericalError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
