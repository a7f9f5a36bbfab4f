#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "bpre/errors.hpp"
#include "bpre/genfun.hpp"
#include "bpre/simulate.hpp"
#include "bpre/tilt.hpp"
#include "test_env.hpp"

using namespace bpre;
using namespace bpre::tilt;
using namespace bpre_test;

TEST_CASE("one-step weights: scalar closed forms") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    const Vec x{1.0};
    CHECK(one_step_weight(x, env.atoms[0], spec) ==
          doctest::Approx(1.0 / 0.6875).epsilon(1e-12));
    CHECK(one_step_weight(x, env.atoms[1], spec) ==
          doctest::Approx(0.375 / 0.6875).epsilon(1e-12));

    // identity environment: weight 1 for any theta
    const auto ienv = deterministic_env({model::OffspringLaw(1, {{{1}, 1.0}})});
    const auto ispec = spectral::solve(ienv, 1.7);
    CHECK(one_step_weight({1.0}, ienv.atoms[0], ispec) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("step distribution") {
    const auto env = env_a();
    SUBCASE("theta = 1: tilted weights (8/11, 3/11), zero defect in the scalar case") {
        const auto spec = spectral::solve(env, 1.0);
        const auto dist = step_distribution({1.0}, env, spec);
        CHECK(dist.raw_defect <= 1e-12);
        CHECK(dist.probs[0] == doctest::Approx(8.0 / 11.0).epsilon(1e-12));
        CHECK(dist.probs[1] == doctest::Approx(3.0 / 11.0).epsilon(1e-12));
    }
    SUBCASE("single-atom environment is a point mass") {
        const auto denv = scalar_deterministic(2);
        const auto spec = spectral::solve(denv, 1.0);
        const auto dist = step_distribution({1.0}, denv, spec);
        CHECK(dist.probs.size() == 1);
        CHECK(dist.probs[0] == doctest::Approx(1.0));
    }
    SUBCASE("theta -> 0 recovers the ambient law") {
        const auto spec = spectral::solve(env, 1e-6);
        const auto dist = step_distribution({1.0}, env, spec);
        CHECK(dist.probs[0] == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(dist.probs[1] == doctest::Approx(0.5).epsilon(1e-4));
    }
    SUBCASE("p = 2 normalization holds up to the recorded defect") {
        const auto envb = env_b();
        const auto spec = spectral::solve(envb, 1.0, 200);
        Rng rng(3);
        for (int t = 0; t < 50; ++t) {
            const double a = rng.uniform01();
            const auto dist = step_distribution({a, 1.0 - a}, envb, spec);
            CHECK(dist.raw_defect <= 1e-6);
        }
    }
}

TEST_CASE("sample_path") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    SUBCASE("n = 0") {
        Rng rng(5);
        const TiltedPath path = sample_path(env, spec, {1.0}, 0, rng);
        CHECK(path.atom_indices.empty());
        CHECK(path.log_density == doctest::Approx(0.0));
        CHECK(path.directions.size() == 1);
    }
    SUBCASE("empirical atom frequency matches the tilted law") {
        int64_t count_a = 0;
        const int reps = 20000, length = 50;
        for (int r = 0; r < reps; ++r) {
            Rng rng = derived_rng(777, static_cast<uint64_t>(r));
            const TiltedPath path = sample_path(env, spec, {1.0}, length, rng);
            for (int e : path.atom_indices) count_a += (e == 0);
        }
        const double freq = static_cast<double>(count_a) / (reps * length);
        const double se = std::sqrt(8.0 / 11.0 * 3.0 / 11.0 / (reps * length));
        CHECK(std::abs(freq - 8.0 / 11.0) <= 3.0 * se);
    }
}

TEST_CASE("density and factorization") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    SUBCASE("n = 0 density is 1") {
        CHECK(density({1.0}, env, {}, spec) == doctest::Approx(1.0));
    }
    SUBCASE("scalar two-step value") {
        CHECK(density({1.0}, env, {0, 1}, spec) ==
              doctest::Approx(0.375 / (0.6875 * 0.6875)).epsilon(1e-12));
    }
    SUBCASE("log density equals the sum of one-step weights along sampled paths") {
        Rng rng(9);
        const TiltedPath path = sample_path(env, spec, {1.0}, 60, rng);
        const double direct = log_density({1.0}, env, path.atom_indices, spec);
        CHECK(std::abs(direct - path.log_density) <= 1e-9 * std::abs(direct));
    }
    SUBCASE("p = 2 factorization") {
        const auto envb = env_b();
        const auto specb = spectral::solve(envb, 1.0, 200);
        Rng rng(10);
        const TiltedPath path = sample_path(envb, specb, {1.0, 0.0}, 40, rng);
        const double direct = log_density({1.0, 0.0}, envb, path.atom_indices, specb);
        CHECK(std::abs(direct - path.log_density) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("consistency and total mass") {
    SUBCASE("scalar environment: exact identities") {
        const auto env = env_a();
        const auto spec = spectral::solve(env, 1.0);
        CHECK(check_consistency(env, spec, 0) <= 1e-14);
        CHECK(check_total_mass(env, spec, 0) <= 1e-15);
        CHECK(check_total_mass(env, spec, 1) <= 1e-15);
        for (int n = 2; n <= 6; ++n) {
            CHECK(check_consistency(env, spec, n - 1) <= 1e-12);
            CHECK(check_total_mass(env, spec, n) <= 1e-12);
        }
    }
    SUBCASE("p = 2 at K = 200: interpolation-limited") {
        const auto env = env_b();
        const auto spec = spectral::solve(env, 1.0, 200);
        for (int n = 0; n <= 4; ++n) {
            CHECK(check_consistency(env, spec, n) <= 1e-6);
            CHECK(check_total_mass(env, spec, n) <= 1e-6);
        }
    }
    SUBCASE("deterministic scalar environment has zero defect") {
        const auto denv = scalar_deterministic(2);
        const auto spec = spectral::solve(denv, 1.0);
        CHECK(check_total_mass(denv, spec, 5) <= 1e-12);
    }
}

TEST_CASE("importance-sampled survival") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    SUBCASE("s = 1 gives exactly zero") {
        const auto est = is_survival(env, spec, 0, 4, 500, 21, Vec{1.0});
        CHECK(est.estimate == doctest::Approx(0.0));
    }
    SUBCASE("small horizons match exact enumeration within 3 s.e.") {
        for (int n = 2; n <= 6; ++n) {
            const double exact = genfun::exact_survival(env, 0, n);
            const auto est = is_survival(env, spec, 0, n, 10000, 100 + static_cast<uint64_t>(n));
            CAPTURE(n);
            CHECK(std::abs(est.estimate - exact) <= 3.0 * est.std_error);
        }
    }
    SUBCASE("p = 2 agreement with enumeration") {
        const auto envb = env_b();
        const auto specb = spectral::solve(envb, 1.0, 200);
        for (int n = 3; n <= 5; ++n) {
            const double exact = genfun::exact_survival(envb, 0, n);
            const auto est = is_survival(envb, specb, 0, n, 20000, 40 + static_cast<uint64_t>(n));
            CAPTURE(n);
            CHECK(std::abs(est.estimate - exact) <= 3.0 * est.std_error);
        }
    }
    SUBCASE("variance reduction against naive Monte Carlo at n = 20") {
        const int64_t reps = 10000;
        const auto is_est = is_survival(env, spec, 0, 20, reps, 51);
        const auto naive = sim::mc_survival(env, 0, 20, reps, 52);
        REQUIRE(is_est.estimate > 0.0);
        const double is_rel = is_est.std_error / is_est.estimate;
        const double naive_rel =
            naive.estimate > 0.0 ? naive.std_error / naive.estimate : 1e9;
        CHECK(is_rel < naive_rel);
    }
}

TEST_CASE("is_curve is deterministic across thread counts") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    const std::vector<int> ns{3, 6, 9};
    const Vec zero{0.0};
    const auto base = is_curve(env, spec, 0, ns, 4000, 33, zero);
    setenv("BPRELAB_THREADS", "4", 1);
    const auto threaded = is_curve(env, spec, 0, ns, 4000, 33, zero);
    unsetenv("BPRELAB_THREADS");
    for (size_t k = 0; k < ns.size(); ++k) {
        CHECK(base[k].mean_zero == threaded[k].mean_zero);
        CHECK(base[k].se_zero == threaded[k].se_zero);
    }
}

TEST_CASE("phi curve") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    SUBCASE("IS phi at small n matches the exact ratio") {
        const Vec s{0.5};
        const double exact =
            1.0 - (1.0 - genfun::exact_pgf(env, 0, 2, s)) / genfun::exact_survival(env, 0, 2);
        const auto pts = phi_curve(env, spec, 0, {2}, 20000, 61, s);
        CHECK(std::abs(pts[0].phi - exact) <= 3.0 * pts[0].std_error);
    }
    SUBCASE("phi at s = 0 vanishes identically") {
        const auto pts = phi_curve(env, spec, 0, {1, 5, 10}, 2000, 62, Vec{0.0});
        for (const auto& pt : pts) CHECK(pt.phi == doctest::Approx(0.0));
    }
}

TEST_CASE("psi series") {
    const auto env = env_a();
    const auto spec = spectral::solve(env, 1.0);
    SUBCASE("K = 0") {
        Rng rng(71);
        const PsiSeries series = psi_series(env, spec, {1.0}, 0, rng);
        CHECK(series.partial_sums.size() == 1);
        CHECK(series.partial_sums[0] == doctest::Approx(1.0));
    }
    SUBCASE("partial sums are nondecreasing and the tail dies out") {
        Rng rng(72);
        const PsiSeries series = psi_series(env, spec, {1.0}, 100, rng);
        REQUIRE(series.partial_sums.size() == 101);
        for (size_t k = 1; k < series.partial_sums.size(); ++k)
            CHECK(series.partial_sums[k] >= series.partial_sums[k - 1]);
        CHECK(series.increments.back() <= 1e-8);
        // decay rate roughly exp(Lambda'(1)) on average: the tail must be far
        // below the head
        CHECK(series.increments[99] < 1e-6 * series.increments[0]);
    }
}
