#include "bpre/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bpre/errors.hpp"
#include "bpre/genfun.hpp"
#include "bpre/matprod.hpp"
#include "bpre/simulate.hpp"

namespace bpre::lab {

using nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string fmt_svec(const Vec& s) {
    std::string out;
    for (size_t j = 0; j < s.size(); ++j) {
        if (j) out += ';';
        out += fmt_double(s[j]);
    }
    return out;
}

void check_type(const model::EnvDistribution& env, int i) {
    if (i < 0 || i >= env.p)
        throw InputError("type index " + std::to_string(i + 1) + " out of range (p = " +
                         std::to_string(env.p) + ")");
}

int64_t sequences_up_to(const model::EnvDistribution& env, int n, int64_t budget) {
    // largest horizon whose enumeration stays within budget
    int64_t total = 1;
    int k = 0;
    while (k < n) {
        if (total > budget / env.atom_count()) break;
        total *= env.atom_count();
        ++k;
    }
    return k;
}

}  // namespace

CheckResult run_check(const model::EnvDistribution& env, double epsilon, int grid) {
    CheckResult res;
    res.report = model::check_conditions(env, epsilon);
    if (env.p > 3) {
        res.sub_note = "p > 3: transfer-operator solve not available";
    } else if (!res.report.h2 || !res.report.h3) {
        res.sub_note = "mean matrices not strictly positive: spectral solve not applicable";
    } else {
        res.sub = spectral::subcriticality_check(env, grid);
    }
    res.pass = res.report.all_pass() && res.sub.has_value() && res.sub->strongly_subcritical;
    return res;
}

ordered_json check_json(const CheckResult& res) {
    ordered_json j;
    const auto& rep = res.report;
    j["conditions"] = ordered_json{
        {"h0", ordered_json{{"pass", rep.h0}}},
        {"h1", ordered_json{{"pass", rep.h1}, {"note", rep.h1_note}}},
        {"h2", ordered_json{{"pass", rep.h2}, {"sufficient_only", rep.h2_sufficient_only}}},
        {"h3", ordered_json{{"pass", rep.h3},
                            {"gamma", std::isfinite(rep.gamma) ? ordered_json(rep.gamma)
                                                               : ordered_json("inf")}}},
        {"h4", ordered_json{{"pass", rep.h4}, {"note", rep.h4_note},
                            {"moment", rep.h4_moment}}},
        {"epsilon", rep.epsilon_used},
        {"all_pass", rep.all_pass()},
    };
    if (res.sub) {
        j["subcriticality"] = ordered_json{
            {"lambda1", res.sub->lambda1},
            {"lambda_prime1", res.sub->lambda_prime1},
            {"strongly_subcritical", res.sub->strongly_subcritical},
        };
        if (!res.sub->strongly_subcritical) j["subcriticality"]["note"] = "Lambda'(1) >= 0";
    } else {
        j["subcriticality"] = nullptr;
        j["subcriticality_note"] = res.sub_note;
    }
    j["pass"] = res.pass;
    return j;
}

SurvivalCurve survival_curve(const model::EnvDistribution& env, const SurvivalParams& params) {
    check_type(env, params.type_index);
    if (params.n_max < 0) throw InputError("survival: n_max must be >= 0");

    const spectral::SpectralSolution spec = spectral::solve(env, 1.0, params.grid);
    SurvivalCurve curve;
    curve.lambda1 = spec.lambda;
    curve.params = params;
    const double log_lambda = std::log(spec.lambda);

    auto make_row = [&](int n, double p, const char* method, double se) {
        SurvivalRow row;
        row.n = n;
        row.p = p;
        row.method = method;
        row.std_error = se;
        row.ratio = p / std::pow(spec.lambda, n);
        row.log_excess = p > 0.0 ? std::log(p) - n * log_lambda
                                 : -std::numeric_limits<double>::infinity();
        return row;
    };

    const int exact_end =
        sequences_up_to(env, std::min(params.exact_max, params.n_max), params.budget);
    for (int n = 0; n <= exact_end; ++n)
        curve.rows.push_back(make_row(
            n, genfun::exact_survival(env, params.type_index, n, params.budget), "exact", 0.0));

    const int is_start = std::max(1, exact_end - 1);
    if (params.n_max >= is_start) {
        std::vector<int> schedule;
        for (int n = is_start; n <= params.n_max; ++n) schedule.push_back(n);
        const Vec zero(static_cast<size_t>(env.p), 0.0);
        const auto points = tilt::is_curve(env, spec, params.type_index, schedule, params.reps,
                                           params.seed, zero);
        for (const auto& cp : points)
            curve.rows.push_back(make_row(cp.n, cp.mean_zero, "is", cp.se_zero));
    }
    return curve;
}

std::string survival_csv(const SurvivalCurve& curve) {
    std::ostringstream os;
    os << "# bprelab survival seed=" << curve.params.seed << " reps=" << curve.params.reps
       << " type=" << curve.params.type_index + 1 << " n_max=" << curve.params.n_max
       << " exact_max=" << curve.params.exact_max << " grid=" << curve.params.grid
       << " lambda1=" << fmt_double(curve.lambda1) << "\n";
    os << "n,p_survival,method,std_error,p_over_lambda_n,log_p_minus_n_log_lambda\n";
    for (const auto& row : curve.rows)
        os << row.n << ',' << fmt_double(row.p) << ',' << row.method << ','
           << fmt_double(row.std_error) << ',' << fmt_double(row.ratio) << ','
           << fmt_double(row.log_excess) << "\n";
    return os.str();
}

FitResult fit_c(const SurvivalCurve& curve, int window) {
    if (window < 1) throw InputError("fit_c: window must be >= 1");
    std::vector<const SurvivalRow*> is_rows;
    for (const auto& row : curve.rows)
        if (row.method == "is") is_rows.push_back(&row);
    if (static_cast<int>(is_rows.size()) < window)
        throw InputError("fit_c: window too large (" + std::to_string(window) + " > " +
                         std::to_string(is_rows.size()) + " IS rows)");

    KahanSum sum;
    double var_acc = 0.0;
    for (size_t k = is_rows.size() - static_cast<size_t>(window); k < is_rows.size(); ++k) {
        sum.add(is_rows[k]->ratio);
        const double se_ratio = is_rows[k]->std_error / std::pow(curve.lambda1, is_rows[k]->n);
        var_acc += se_ratio * se_ratio;
    }
    FitResult res;
    res.window = window;
    res.c = sum.value() / window;
    res.std_error = std::sqrt(var_acc) / window;
    if (!(res.c > 0.0)) throw NumericalError("fit_c: estimated constant is not positive");
    return res;
}

std::vector<PhiRow> phi_table(const model::EnvDistribution& env, const PhiParams& params) {
    check_type(env, params.type_index);
    std::vector<Vec> s_list = params.s_list;
    if (s_list.empty()) s_list.push_back(Vec(static_cast<size_t>(env.p), 0.5));
    for (const Vec& s : s_list) {
        if (static_cast<int>(s.size()) != env.p)
            throw InputError("phi: s has wrong number of coordinates");
        bool below = false;
        for (double v : s) {
            if (!(v >= 0.0) || v > 1.0) throw InputError("phi: s must lie in [0,1]^p");
            if (v < 1.0) below = true;
        }
        if (!below) throw InputError("phi: s = 1 is excluded");
    }
    std::vector<int> schedule = params.schedule;
    if (schedule.empty()) {
        schedule = {2, 5};
        for (int n = 10; n <= 40; n += 5) schedule.push_back(n);
    }

    const spectral::SpectralSolution spec = spectral::solve(env, 1.0, params.grid);
    const int i = params.type_index;
    std::vector<PhiRow> rows;

    for (const Vec& s : s_list) {
        // exact rows from the enumeration engine
        for (int n : schedule) {
            if (n > params.exact_max) continue;
            if (sequences_up_to(env, n, params.budget) < n) continue;
            const double num = 1.0 - genfun::exact_pgf(env, i, n, s, params.budget);
            const double den = genfun::exact_survival(env, i, n, params.budget);
            if (!(den > 0.0)) continue;
            rows.push_back({s, n, "exact", 1.0 - num / den, 0.0});
        }
        // importance-sampled rows on shared tilted paths
        std::vector<int> is_ns;
        for (int n : schedule)
            if (n >= 1) is_ns.push_back(n);
        if (!is_ns.empty()) {
            const auto pts = tilt::phi_curve(env, spec, i, is_ns, params.reps, params.seed, s);
            for (const auto& pt : pts) rows.push_back({s, pt.n, "is", pt.phi, pt.std_error});
        }
        // simulate-based conditional PGF cross-check at small n
        for (int n : schedule) {
            if (n > params.empirical_max) continue;
            const auto emp = sim::conditional_empirical(env, i, n, params.empirical_reps,
                                                        mix_seed(params.seed, 9000 + n));
            if (emp.no_survivors()) continue;
            const double value = emp.pgf(s);
            double var = 0.0;
            for (const auto& [z, prob] : emp.pmf) {
                double term = 1.0;
                for (size_t j = 0; j < z.size(); ++j)
                    for (int64_t k = 0; k < z[j]; ++k) term *= s[j];
                var += prob * (term - value) * (term - value);
            }
            rows.push_back({s, n, "empirical", value,
                            std::sqrt(var / static_cast<double>(emp.survivors))});
        }
    }
    return rows;
}

std::string phi_csv(const std::vector<PhiRow>& rows, const PhiParams& params, double lambda1) {
    std::ostringstream os;
    os << "# bprelab phi seed=" << params.seed << " reps=" << params.reps
       << " type=" << params.type_index + 1 << " grid=" << params.grid
       << " lambda1=" << fmt_double(lambda1) << " coupling=common-random-numbers\n";
    os << "s,n,method,phi_hat,std_error\n";
    for (const auto& row : rows)
        os << fmt_svec(row.s) << ',' << row.n << ',' << row.method << ',' << fmt_double(row.phi)
           << ',' << fmt_double(row.std_error) << "\n";
    return os.str();
}

std::string tilt_sample_csv(const model::EnvDistribution& env, const TiltSampleParams& params) {
    check_type(env, params.type_index);
    if (params.n < 0) throw InputError("tilt-sample: n must be >= 0");
    if (params.reps < 1) throw InputError("tilt-sample: reps must be >= 1");
    const spectral::SpectralSolution spec = spectral::solve(env, params.theta, params.grid);

    std::ostringstream os;
    os << "# bprelab tilt-sample seed=" << params.seed << " reps=" << params.reps
       << " type=" << params.type_index + 1 << " theta=" << fmt_double(params.theta)
       << " n=" << params.n << " grid=" << params.grid
       << " lambda=" << fmt_double(spec.lambda) << "\n";
    os << "rep,step,atom";
    for (int j = 1; j <= env.p; ++j) os << ",x" << j;
    os << ",log_density\n";

    for (int64_t rep = 0; rep < params.reps; ++rep) {
        Rng rng = derived_rng(params.seed, static_cast<uint64_t>(rep));
        const tilt::TiltedPath path =
            tilt::sample_path(env, spec, basis_vector(env.p, params.type_index), params.n, rng);
        double cum = 0.0;
        for (int k = 1; k <= params.n; ++k) {
            const int atom = path.atom_indices[static_cast<size_t>(k - 1)];
            cum += std::log(tilt::one_step_weight(path.directions[static_cast<size_t>(k - 1)],
                                                  env.atoms[static_cast<size_t>(atom)], spec));
            os << rep << ',' << k << ',' << atom;
            for (int j = 0; j < env.p; ++j)
                os << ',' << fmt_double(path.directions[static_cast<size_t>(k)][static_cast<size_t>(j)]);
            os << ',' << fmt_double(cum) << "\n";
        }
    }
    return os.str();
}

namespace {

// random direction-ish s in [0, hi]^p, clamped away from 1
Vec random_s(Rng& rng, int p, double hi = 0.95) {
    Vec s(static_cast<size_t>(p));
    for (double& v : s) v = hi * rng.uniform01();
    return s;
}

genfun::EnvSequence random_sequence(Rng& rng, const model::EnvDistribution& env, int n) {
    genfun::EnvSequence seq(static_cast<size_t>(n));
    for (int& e : seq) e = pick_index(env.cumulative, rng.uniform01());
    return seq;
}

}  // namespace

ordered_json run_diagnostics(const model::EnvDistribution& env,
                             const DiagnosticsParams& params) {
    ordered_json j;
    j["seed"] = params.seed;
    j["grid"] = params.grid;
    bool all_pass = true;
    auto gate = [&](bool ok) {
        all_pass = all_pass && ok;
        return ok;
    };

    const model::ConditionReport rep = model::check_conditions(env, params.epsilon);
    CheckResult chk;
    chk.report = rep;
    const bool solvable = env.p <= 3 && rep.h2 && rep.h3;
    std::optional<spectral::SpectralSolution> spec;
    if (solvable) {
        spec = spectral::solve(env, 1.0, params.grid);
        chk.sub = spectral::Subcriticality{
            spec->lambda, spectral::lambda_prime(env, 1.0, 1e-3, params.grid), false};
        chk.sub->strongly_subcritical = chk.sub->lambda_prime1 < 0.0;
        chk.pass = rep.all_pass() && chk.sub->strongly_subcritical;
    } else {
        chk.sub_note = "spectral solve not applicable";
    }
    j["check"] = check_json(chk);
    gate(chk.pass);

    // H3 lower bound min_x |M x| >= ||M|| / gamma, attained at a vertex
    {
        double worst_margin = std::numeric_limits<double>::infinity();
        bool ok = true;
        if (std::isfinite(rep.gamma)) {
            for (const auto& atom : env.atoms) {
                const double mnorm = op_norm(atom.mean_matrix);
                double min_col = std::numeric_limits<double>::infinity();
                for (int jcol = 0; jcol < env.p; ++jcol) {
                    double col = 0.0;
                    for (int irow = 0; irow < env.p; ++irow) col += atom.mean_matrix(irow, jcol);
                    min_col = std::min(min_col, col);
                }
                const double margin = min_col - mnorm / rep.gamma;
                worst_margin = std::min(worst_margin, margin);
                ok = ok && margin >= -1e-12;
            }
            j["h3_lower_bound"] =
                ordered_json{{"worst_margin", worst_margin}, {"pass", gate(ok)}};
        } else {
            j["h3_lower_bound"] = ordered_json{{"not_applicable", "gamma infinite"}};
        }
    }

    // psi bound sweep on this environment's atoms
    {
        Rng rng(mix_seed(params.seed, 1));
        int violations = 0;
        double max_ratio = 0.0;
        int evaluated = 0;
        for (int t = 0; t < params.psi_sweeps; ++t) {
            const size_t e = static_cast<size_t>(pick_index(env.cumulative, rng.uniform01()));
            const model::EnvAtom& atom = env.atoms[e];
            const int i = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(env.p));
            const int klen = static_cast<int>(rng.next_u64() % 6);
            const auto path = matprod::products(env, random_sequence(rng, env, klen));
            Mat a(env.p);
            for (int jc = 0; jc < env.p; ++jc) a(i, jc) = path.right.back().m(i, jc);
            const Vec s = random_s(rng, env.p);
            try {
                const auto res = genfun::check_psi_bound(atom, a, s);
                ++evaluated;
                if (!res.pass) ++violations;
                if (res.bound > 0.0) max_ratio = std::max(max_ratio, res.psi_value / res.bound);
            } catch (const DegenerateInputError&) {
            }
        }
        j["psi_bound"] = ordered_json{{"evaluated", evaluated},
                                      {"violations", violations},
                                      {"max_ratio_to_bound", max_ratio},
                                      {"pass", gate(violations == 0 && evaluated > 0)}};
    }

    // iteration identity sweep
    {
        Rng rng(mix_seed(params.seed, 2));
        double max_residual = 0.0;
        int evaluated = 0;
        for (int t = 0; t < params.identity_sweeps; ++t) {
            const int n = 1 + static_cast<int>(rng.next_u64() % 10);
            const int i = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(env.p));
            try {
                const auto res = genfun::check_iteration_identity(
                    env, random_sequence(rng, env, n), i, random_s(rng, env.p));
                ++evaluated;
                max_residual = std::max(max_residual, res.residual);
            } catch (const DegenerateInputError&) {
            }
        }
        j["iteration_identity"] =
            ordered_json{{"evaluated", evaluated},
                         {"max_residual", max_residual},
                         {"pass", gate(evaluated > 0 && max_residual <= 1e-9)}};
    }

    // Furstenberg-Kesten bounds and product entry-ratio bound
    if (std::isfinite(rep.gamma)) {
        Rng rng(mix_seed(params.seed, 3));
        int violations = 0;
        double worst_entry_ratio = 0.0;
        const double entry_bound = rep.gamma * rep.gamma * env.p;
        bool entry_ok = true;
        for (int t = 0; t < params.fk_sweeps; ++t) {
            const int n = 1 + static_cast<int>(rng.next_u64() % 30);
            const int i = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(env.p));
            const auto seq = random_sequence(rng, env, n);
            const auto res = genfun::fk_bounds(env, seq, i, random_s(rng, env.p));
            if (!res.pass) ++violations;
            const double er = entry_ratio(matprod::left_product_full(env, seq).m);
            worst_entry_ratio = std::max(worst_entry_ratio, er);
            entry_ok = entry_ok && er <= entry_bound + 1e-9;
        }
        j["fk_bounds"] = ordered_json{{"evaluated", params.fk_sweeps},
                                      {"violations", violations},
                                      {"pass", gate(violations == 0)}};
        j["product_entry_ratio"] = ordered_json{{"worst", worst_entry_ratio},
                                                {"bound", entry_bound},
                                                {"pass", gate(entry_ok)}};
    } else {
        j["fk_bounds"] = ordered_json{{"not_applicable", "gamma infinite (H3 fails)"}};
        j["product_entry_ratio"] = ordered_json{{"not_applicable", "gamma infinite"}};
    }

    // Hennion rank-one decay
    if (std::isfinite(rep.gamma) && rep.h2) {
        Rng rng(mix_seed(params.seed, 4));
        double resid30 = 0.0;
        bool monotone = true;
        for (int trial = 0; trial < 5; ++trial) {
            const auto seq = random_sequence(rng, env, 30);
            double prev = std::numeric_limits<double>::infinity();
            for (int len = 5; len <= 30; len += 1) {
                genfun::EnvSequence sub(seq.begin(), seq.begin() + len);
                const double r = matprod::hennion_decompose(env, sub).residual;
                if (len >= 6) monotone = monotone && r <= prev + 1e-12;
                prev = r;
                if (len == 30) resid30 = std::max(resid30, r);
            }
        }
        j["hennion"] = ordered_json{{"residual_at_30", resid30},
                                    {"monotone_decay", monotone},
                                    {"pass", gate(resid30 <= 1e-8 && monotone)}};
    } else {
        j["hennion"] = ordered_json{{"not_applicable", "needs strictly positive matrices"}};
    }

    if (spec) {
        // total mass / consistency at theta = 1
        {
            double worst_mass = 0.0, worst_cons = 0.0;
            for (int n = 0; n <= params.mass_n_max; ++n) {
                worst_mass = std::max(worst_mass, tilt::check_total_mass(env, *spec, n));
                if (n < params.mass_n_max)
                    worst_cons = std::max(worst_cons, tilt::check_consistency(env, *spec, n));
            }
            const double tol = env.p == 1 ? 1e-10 : 1e-6;
            j["total_mass"] = ordered_json{{"worst_defect", worst_mass},
                                           {"tolerance", tol},
                                           {"pass", gate(worst_mass <= tol)}};
            j["consistency"] = ordered_json{{"worst_residual", worst_cons},
                                            {"tolerance", tol},
                                            {"pass", gate(worst_cons <= tol)}};
        }

        // Lyapunov exponent under the tilted law vs finite-difference Lambda'(1)
        {
            const double fd = chk.sub->lambda_prime1;
            auto tilted_sampler = [&](uint64_t rseed) {
                Rng rng(mix_seed(params.seed, rseed, 105));
                return tilt::sample_path(env, *spec, Vec(static_cast<size_t>(env.p), 1.0 / env.p),
                                         params.lyapunov_n, rng)
                    .atom_indices;
            };
            const auto tilted =
                matprod::lyapunov(env, tilted_sampler, params.lyapunov_n, params.lyapunov_reps);
            auto ambient_sampler = [&](uint64_t rseed) {
                Rng rng(mix_seed(params.seed, rseed, 106));
                return random_sequence(rng, env, params.lyapunov_n);
            };
            const auto ambient =
                matprod::lyapunov(env, ambient_sampler, params.lyapunov_n, params.lyapunov_reps);
            const double gap = std::abs(tilted.mean - fd);
            const bool ok = fd != 0.0 ? gap <= 0.05 * std::abs(fd) : gap <= 1e-3;
            j["lyapunov"] = ordered_json{{"tilted_mean", tilted.mean},
                                         {"tilted_se", tilted.std_error},
                                         {"ambient_mean", ambient.mean},
                                         {"ambient_se", ambient.std_error},
                                         {"lambda_prime_fd", fd},
                                         {"pass", gate(ok)}};
        }

        // Psi series tail along one tilted path
        {
            Rng rng(mix_seed(params.seed, 7));
            const auto series = tilt::psi_series(
                env, *spec, Vec(static_cast<size_t>(env.p), 1.0 / env.p), params.psi_series_k, rng);
            const double tail = series.increments.empty() ? 0.0 : series.increments.back();
            j["psi_series"] = ordered_json{{"k_max", params.psi_series_k},
                                           {"sum", series.partial_sums.back()},
                                           {"tail_increment", tail},
                                           {"pass", gate(tail <= 1e-6)}};
        }

        // IS agreement with exact enumeration at small n
        {
            bool ok = true;
            ordered_json detail = ordered_json::array();
            for (int n = 4; n <= 6; ++n) {
                const double exact = genfun::exact_survival(env, 0, n);
                const auto est =
                    tilt::is_survival(env, *spec, 0, n, params.is_reps, mix_seed(params.seed, 8));
                const double dev =
                    est.std_error > 0.0 ? std::abs(est.estimate - exact) / est.std_error : 0.0;
                ok = ok && dev <= 3.0;
                detail.push_back(ordered_json{
                    {"n", n}, {"exact", exact}, {"is", est.estimate}, {"se", est.std_error}});
            }
            j["is_vs_exact"] = ordered_json{{"cases", detail}, {"pass", gate(ok)}};
        }

        // variance comparison against naive Monte Carlo at n = 20
        {
            const int n = 20;
            const auto is_est =
                tilt::is_survival(env, *spec, 0, n, params.is_reps, mix_seed(params.seed, 9));
            const auto naive =
                sim::mc_survival(env, 0, n, params.is_reps, mix_seed(params.seed, 10));
            const double is_rel = is_est.estimate > 0.0 ? is_est.std_error / is_est.estimate
                                                        : std::numeric_limits<double>::infinity();
            const double naive_rel = naive.estimate > 0.0
                                         ? naive.std_error / naive.estimate
                                         : std::numeric_limits<double>::infinity();
            j["variance_reduction"] = ordered_json{{"n", n},
                                                   {"is_rel_se", is_rel},
                                                   {"naive_rel_se", naive_rel},
                                                   {"pass", gate(is_rel < naive_rel)}};
        }

        // properness probe near s = 1 (reported, never asserted)
        {
            const Vec s_near(static_cast<size_t>(env.p), 0.99);
            const auto pts =
                tilt::phi_curve(env, *spec, 0, {30}, params.is_reps, mix_seed(params.seed, 11),
                                s_near);
            j["properness_probe"] = ordered_json{
                {"s", 0.99}, {"n", 30}, {"phi_hat", pts[0].phi}, {"std_error", pts[0].std_error}};
        }
    } else {
        j["total_mass"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["consistency"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["lyapunov"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["psi_series"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["is_vs_exact"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["variance_reduction"] = ordered_json{{"not_applicable", chk.sub_note}};
        j["properness_probe"] = ordered_json{{"not_applicable", chk.sub_note}};
    }

    j["all_pass"] = all_pass;
    return j;
}

}  // namespace bpre::lab
