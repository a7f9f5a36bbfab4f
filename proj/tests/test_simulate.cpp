#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpre/genfun.hpp"
#include "bpre/matprod.hpp"
#include "bpre/simulate.hpp"
#include "test_env.hpp"

using namespace bpre;
using namespace bpre::sim;
using namespace bpre_test;

TEST_CASE("step: absorbing zero state, deterministic offspring") {
    const auto env = env_a();
    Rng rng(1);

    PopulationState zero{{0}, 0};
    const PopulationState still = step(zero, env.atoms[0], rng);
    CHECK(still.extinct());
    CHECK(still.generation == 1);

    model::OffspringLaw det1(2, {{{2, 1}, 1.0}});
    model::OffspringLaw det2(2, {{{0, 0}, 1.0}});
    const auto denv = deterministic_env({det1, det2});
    const PopulationState next = step({{1, 0}, 0}, denv.atoms[0], rng);
    CHECK(next.z[0] == 2);
    CHECK(next.z[1] == 1);
}

TEST_CASE("step law: Z from 3 parents of {0 or 2} is 2 * Binomial(3, 1/2)") {
    // chi-square against the exact pmf (1,3,3,1)/8 on {0,2,4,6}
    model::OffspringLaw law(1, {{{0}, 0.5}, {{2}, 0.5}});
    const auto env = deterministic_env({law});
    const int reps = 100000;
    int counts[4] = {0, 0, 0, 0};
    for (int r = 0; r < reps; ++r) {
        Rng rng = derived_rng(20240601, static_cast<uint64_t>(r));
        const PopulationState out = step({{3}, 0}, env.atoms[0], rng);
        REQUIRE(out.z[0] % 2 == 0);
        REQUIRE(out.z[0] <= 6);
        ++counts[out.z[0] / 2];
    }
    const double expected[4] = {reps / 8.0, 3.0 * reps / 8.0, 3.0 * reps / 8.0, reps / 8.0};
    double chi2 = 0.0;
    for (int k = 0; k < 4; ++k)
        chi2 += (counts[k] - expected[k]) * (counts[k] - expected[k]) / expected[k];
    CHECK(chi2 < 16.27);  // 99.9% quantile, 3 dof
}

TEST_CASE("run basics") {
    const auto env = env_a();
    Rng rng(3);
    const Trajectory t0 = run(env, {1}, 0, rng);
    CHECK(t0.states.size() == 1);
    CHECK(t0.env_indices.empty());
    CHECK(t0.states[0].z[0] == 1);

    // deterministic single-atom env reproduces the recursion z_{k+1} = 2 z_k
    const auto denv = scalar_deterministic(2);
    Rng rng2(4);
    const Trajectory traj = run(denv, {1}, 5, rng2);
    int64_t expect = 1;
    for (size_t k = 0; k < traj.states.size(); ++k) {
        CHECK(traj.states[k].z[0] == expect);
        expect *= 2;
    }
}

TEST_CASE("extinction is absorbing along trajectories") {
    const auto env = env_a();
    for (int r = 0; r < 200; ++r) {
        Rng rng = derived_rng(99, static_cast<uint64_t>(r));
        const Trajectory traj = run(env, {1}, 12, rng);
        bool dead = false;
        for (const auto& st : traj.states) {
            if (dead) CHECK(st.extinct());
            dead = dead || st.extinct();
        }
    }
}

TEST_CASE("frozen-environment mean matches the matrix product") {
    const auto env = env_b();
    const std::vector<int> seq{0, 1, 0};
    const int reps = 100000;

    // E[Z_3 | seq] = z0 M_1 M_2 M_3 (row vector convention)
    Vec mean{0.0, 0.0};
    for (int r = 0; r < reps; ++r) {
        Rng rng = derived_rng(555, static_cast<uint64_t>(r));
        const Trajectory traj = run_frozen(env, seq, {1, 0}, rng);
        mean[0] += static_cast<double>(traj.states.back().z[0]);
        mean[1] += static_cast<double>(traj.states.back().z[1]);
    }
    mean[0] /= reps;
    mean[1] /= reps;

    Mat prod = Mat::identity(2);
    for (int e : seq) prod = mat_mul(prod, env.atoms[static_cast<size_t>(e)].mean_matrix);
    const Vec expect = vec_mat({1.0, 0.0}, prod);

    for (int j = 0; j < 2; ++j) {
        const double se = std::sqrt(1.0 / reps);  // crude scale bound: counts are small
        CHECK(std::abs(mean[static_cast<size_t>(j)] - expect[static_cast<size_t>(j)]) <=
              3.0 * se + 1e-3);
    }
}

TEST_CASE("mc_survival") {
    const auto env = env_a();
    SUBCASE("n = 0 is certain survival") {
        const McEstimate est = mc_survival(env, 0, 0, 1000, 42);
        CHECK(est.estimate == doctest::Approx(1.0));
        CHECK(est.std_error == doctest::Approx(0.0));
    }
    SUBCASE("n = 1 rate 0.375 within 3 s.e.") {
        const McEstimate est = mc_survival(env, 0, 1, 100000, 42);
        CHECK(std::abs(est.estimate - 0.375) <= 3.0 * est.std_error);
    }
    SUBCASE("n = 2 rate 0.208984375 within 3 s.e.") {
        const McEstimate est = mc_survival(env, 0, 2, 100000, 43);
        CHECK(std::abs(est.estimate - 0.208984375) <= 3.0 * est.std_error);
    }
}

TEST_CASE("mc_survival is reproducible and thread-count independent") {
    const auto env = env_a();
    const McEstimate a = mc_survival(env, 0, 5, 20000, 7);
    const McEstimate b = mc_survival(env, 0, 5, 20000, 7);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);

    setenv("BPRELAB_THREADS", "3", 1);
    const McEstimate c = mc_survival(env, 0, 5, 20000, 7);
    unsetenv("BPRELAB_THREADS");
    CHECK(a.estimate == c.estimate);
}

TEST_CASE("conditional_empirical") {
    SUBCASE("deterministic single child is a point mass") {
        const auto denv = scalar_deterministic(1);
        const auto emp = conditional_empirical(denv, 0, 7, 500, 11);
        REQUIRE(emp.survivors == 500);
        REQUIRE(emp.pmf.size() == 1);
        CHECK(emp.pmf.begin()->first[0] == 1);
        CHECK(emp.pmf.begin()->second == doctest::Approx(1.0));
    }
    SUBCASE("ENV-A at n = 1: exact conditional masses 1/6 and 5/6") {
        const auto env = env_a();
        const auto emp = conditional_empirical(env, 0, 1, 200000, 12);
        REQUIRE_FALSE(emp.no_survivors());
        const double p1 = emp.pmf.at({1});
        const double p2 = emp.pmf.at({2});
        const double se = 1.5 / std::sqrt(static_cast<double>(emp.survivors));
        CHECK(std::abs(p1 - 1.0 / 6.0) <= 3.0 * se);
        CHECK(std::abs(p2 - 5.0 / 6.0) <= 3.0 * se);
    }
    SUBCASE("empirical conditional PGF tracks the exact conditional PGF") {
        const auto env = env_a();
        const int n = 3;
        const auto emp = conditional_empirical(env, 0, n, 200000, 13);
        REQUIRE_FALSE(emp.no_survivors());
        const Vec s{0.6};
        const double exact_cond =
            1.0 - (1.0 - genfun::exact_pgf(env, 0, n, s)) / genfun::exact_survival(env, 0, n);
        const double se = 1.0 / std::sqrt(static_cast<double>(emp.survivors));
        CHECK(std::abs(emp.pgf(s) - exact_cond) <= 3.0 * se);
    }
    SUBCASE("no survivors is a result, not an exception") {
        // two types, every child dies immediately
        model::OffspringLaw dead(1, {{{0}, 1.0}});
        const auto denv = deterministic_env({dead});
        const auto emp = conditional_empirical(denv, 0, 1, 100, 14);
        CHECK(emp.no_survivors());
        CHECK(emp.pmf.empty());
    }
}
