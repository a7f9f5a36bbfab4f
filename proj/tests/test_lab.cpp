#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "bpre/errors.hpp"
#include "bpre/genfun.hpp"
#include "bpre/lab.hpp"
#include "test_env.hpp"

using namespace bpre;
using namespace bpre::lab;
using namespace bpre_test;

TEST_CASE("run_check") {
    SUBCASE("ENV-A passes with the known spectral values") {
        const auto res = run_check(env_a());
        CHECK(res.pass);
        REQUIRE(res.sub.has_value());
        CHECK(std::abs(res.sub->lambda1 - 0.6875) <= 1e-12);
        CHECK(res.sub->lambda_prime1 == doctest::Approx(-0.26750).epsilon(1e-4));
        const auto j = check_json(res);
        CHECK(j["pass"] == true);
        CHECK(j["conditions"]["h3"]["gamma"] == 1.0);
    }
    SUBCASE("T = 0 atom fails H4 and the overall check") {
        const auto env = deterministic_env({model::OffspringLaw(1, {{{1}, 1.0}})});
        const auto res = run_check(env);
        CHECK_FALSE(res.report.h4);
        CHECK_FALSE(res.pass);
    }
    SUBCASE("supercritical environment fails via Lambda'(1) >= 0") {
        const auto res = run_check(scalar_deterministic(2));
        CHECK(res.report.all_pass());
        REQUIRE(res.sub.has_value());
        CHECK_FALSE(res.sub->strongly_subcritical);
        CHECK_FALSE(res.pass);
        CHECK(check_json(res)["subcriticality"]["note"] == "Lambda'(1) >= 0");
    }
}

TEST_CASE("survival curve") {
    const auto env = env_a();
    SurvivalParams params;
    params.n_max = 14;
    params.reps = 20000;
    params.seed = 2024;
    params.exact_max = 8;

    const SurvivalCurve curve = survival_curve(env, params);
    CHECK(curve.lambda1 == doctest::Approx(0.6875).epsilon(1e-12));

    SUBCASE("exact anchor rows") {
        REQUIRE(curve.rows[0].n == 0);
        CHECK(curve.rows[0].p == doctest::Approx(1.0));
        CHECK(curve.rows[0].method == "exact");
        CHECK(curve.rows[1].p == doctest::Approx(0.375).epsilon(1e-15));
        CHECK(curve.rows[2].p == doctest::Approx(0.208984375).epsilon(1e-15));
        CHECK(curve.rows[2].std_error == 0.0);
    }
    SUBCASE("exact and IS rows overlap and agree within 3 s.e.") {
        int overlaps = 0;
        for (const auto& row : curve.rows) {
            if (row.method != "is") continue;
            for (const auto& other : curve.rows) {
                if (other.method != "exact" || other.n != row.n) continue;
                ++overlaps;
                CHECK(std::abs(row.p - other.p) <= 3.0 * row.std_error);
            }
        }
        CHECK(overlaps >= 2);
    }
    SUBCASE("n increases strictly within each method") {
        int prev_exact = -1, prev_is = -1;
        for (const auto& row : curve.rows) {
            if (row.method == "exact") {
                CHECK(row.n > prev_exact);
                prev_exact = row.n;
            } else {
                CHECK(row.n > prev_is);
                prev_is = row.n;
            }
        }
    }
    SUBCASE("csv is schema-stable and reproducible across thread counts") {
        const std::string csv1 = survival_csv(curve);
        setenv("BPRELAB_THREADS", "5", 1);
        const std::string csv2 = survival_csv(survival_curve(env, params));
        unsetenv("BPRELAB_THREADS");
        CHECK(csv1 == csv2);
        CHECK(csv1.find("n,p_survival,method,std_error,p_over_lambda_n,"
                        "log_p_minus_n_log_lambda\n") != std::string::npos);
        CHECK(csv1.find("lambda1=0.6875") != std::string::npos);
    }
}

TEST_CASE("fit_c") {
    SUBCASE("synthetic curve with p = 3 lambda^n recovers c = 3 exactly") {
        SurvivalCurve curve;
        curve.lambda1 = 0.6875;
        for (int n = 5; n <= 14; ++n) {
            SurvivalRow row;
            row.n = n;
            row.p = 3.0 * std::pow(curve.lambda1, n);
            row.method = "is";
            row.std_error = 0.0;
            row.ratio = row.p / std::pow(curve.lambda1, n);
            row.log_excess = std::log(row.p) - n * std::log(curve.lambda1);
            curve.rows.push_back(row);
        }
        const FitResult fit = fit_c(curve, 10);
        CHECK(fit.c == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(fit.std_error == doctest::Approx(0.0));
    }
    SUBCASE("window too large") {
        SurvivalCurve curve;
        curve.lambda1 = 0.6875;
        SurvivalRow row{2, 0.2, "exact", 0.0, 0.4, 0.0};
        curve.rows.push_back(row);
        CHECK_THROWS_AS(fit_c(curve, 10), InputError);
    }
    SUBCASE("estimate is invariant to the number of replicas within uncertainty") {
        const auto env = env_a();
        SurvivalParams small, large;
        small.n_max = large.n_max = 24;
        small.exact_max = large.exact_max = 6;
        small.seed = 91;
        large.seed = 92;
        small.reps = 10000;
        large.reps = 100000;
        const FitResult f1 = fit_c(survival_curve(env, small), 10);
        const FitResult f2 = fit_c(survival_curve(env, large), 10);
        CHECK(f1.c > 0.0);
        CHECK(f2.c > 0.0);
        const double tol = 3.0 * std::sqrt(f1.std_error * f1.std_error +
                                           f2.std_error * f2.std_error);
        CHECK(std::abs(f1.c - f2.c) <= tol);
    }
}

TEST_CASE("phi table") {
    const auto env = env_a();
    PhiParams params;
    params.seed = 404;
    params.reps = 20000;
    params.schedule = {2, 5, 10};
    params.empirical_max = 3;
    params.empirical_reps = 50000;
    params.s_list = {Vec{0.5}};

    const auto rows = phi_table(env, params);

    SUBCASE("exact row at n = 2 matches the enumeration oracle") {
        const double expect = 1.0 - (1.0 - genfun::exact_pgf(env, 0, 2, {0.5})) /
                                        genfun::exact_survival(env, 0, 2);
        bool found = false;
        for (const auto& row : rows)
            if (row.method == "exact" && row.n == 2) {
                found = true;
                CHECK(row.phi == doctest::Approx(expect).epsilon(1e-12));
            }
        CHECK(found);
    }
    SUBCASE("methods agree at shared horizons") {
        for (const auto& row : rows) {
            if (row.method != "is") continue;
            for (const auto& other : rows) {
                if (other.n != row.n || &other == &row) continue;
                if (other.method == "exact")
                    CHECK(std::abs(row.phi - other.phi) <= 3.0 * row.std_error + 1e-12);
                if (other.method == "empirical")
                    CHECK(std::abs(row.phi - other.phi) <=
                          3.0 * (row.std_error + other.std_error) + 1e-12);
            }
        }
    }
    SUBCASE("s = 0 pins phi at zero") {
        PhiParams zero_params = params;
        zero_params.s_list = {Vec{0.0}};
        zero_params.empirical_max = -1;
        for (const auto& row : phi_table(env, zero_params))
            if (row.method == "is") CHECK(row.phi == doctest::Approx(0.0));
    }
    SUBCASE("s = 1 is rejected") {
        PhiParams bad = params;
        bad.s_list = {Vec{1.0}};
        CHECK_THROWS_AS(phi_table(env, bad), InputError);
    }
    SUBCASE("csv output is stable") {
        const std::string csv = phi_csv(rows, params, 0.6875);
        CHECK(csv.find("s,n,method,phi_hat,std_error\n") != std::string::npos);
        CHECK(csv.find("coupling=common-random-numbers") != std::string::npos);
        const std::string csv2 = phi_csv(phi_table(env, params), params, 0.6875);
        CHECK(csv == csv2);
    }
}

TEST_CASE("tilt-sample csv") {
    const auto env = env_b();
    TiltSampleParams params;
    params.seed = 7;
    params.n = 5;
    params.reps = 3;
    const std::string csv = tilt_sample_csv(env, params);
    CHECK(csv.find("rep,step,atom,x1,x2,log_density\n") != std::string::npos);
    // 3 reps x 5 steps of data rows plus metadata and header
    int lines = 0;
    for (char c : csv) lines += (c == '\n');
    CHECK(lines == 2 + 15);
    CHECK(csv == tilt_sample_csv(env, params));
}

TEST_CASE("diagnostics") {
    SUBCASE("ENV-A: everything passes") {
        DiagnosticsParams params;
        params.seed = 1111;
        params.is_reps = 4000;
        params.lyapunov_reps = 300;
        params.psi_sweeps = 2000;
        params.fk_sweeps = 2000;
        params.identity_sweeps = 50;
        params.mass_n_max = 4;
        const auto j = run_diagnostics(env_a(), params);
        CHECK(j["all_pass"] == true);
        CHECK(j["psi_bound"]["violations"] == 0);
        CHECK(j["fk_bounds"]["violations"] == 0);
        CHECK(double(j["total_mass"]["worst_defect"]) <= 1e-10);
    }
    SUBCASE("H3 violation marks sections not applicable") {
        model::OffspringLaw law(2, {{{0, 0}, 0.5}, {{2, 0}, 0.5}});
        const auto env = deterministic_env({law, law});
        DiagnosticsParams params;
        params.seed = 2222;
        const auto j = run_diagnostics(env, params);
        CHECK(j["fk_bounds"].contains("not_applicable"));
        CHECK(j["hennion"].contains("not_applicable"));
        CHECK(j["all_pass"] == false);
    }
    SUBCASE("scalar identity environment: zero total-mass defect and zero Lyapunov") {
        const auto env = deterministic_env({model::OffspringLaw(1, {{{1}, 1.0}})});
        DiagnosticsParams params;
        params.seed = 3333;
        params.is_reps = 500;
        params.lyapunov_reps = 50;
        params.psi_sweeps = 200;
        params.fk_sweeps = 200;
        params.identity_sweeps = 20;
        const auto j = run_diagnostics(env, params);
        CHECK(double(j["total_mass"]["worst_defect"]) <= 1e-12);
        CHECK(std::abs(double(j["lyapunov"]["tilted_mean"])) <= 1e-12);
        CHECK(j["check"]["conditions"]["h4"]["pass"] == false);
    }
}
