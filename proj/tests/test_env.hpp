#ifndef BPRE_TEST_ENV_HPP
#define BPRE_TEST_ENV_HPP

#include <cstdint>
#include <vector>

#include "bpre/model.hpp"
#include "bpre/rng.hpp"

namespace bpre_test {

using bpre::model::derive_moments;
using bpre::model::EnvAtom;
using bpre::model::EnvDistribution;
using bpre::model::OffspringLaw;

// p = 1 reference environment:
//   atom a: {0 w.p. 1/2, 2 w.p. 1/2}        f_a(s) = (1 + s^2)/2,  M = 1
//   atom b: {0 w.p. 3/4, 1 w.p. 1/8, 2 w.p. 1/8}  M = 3/8
// weights 1/2, 1/2; lambda(1) = 0.6875, Lambda'(1) = -0.26749890...
inline EnvDistribution env_a() {
    OffspringLaw law_a(1, {{{0}, 0.5}, {{2}, 0.5}});
    OffspringLaw law_b(1, {{{0}, 0.75}, {{1}, 0.125}, {{2}, 0.125}});
    return EnvDistribution({derive_moments({law_a}), derive_moments({law_b})}, {0.5, 0.5});
}

// p = 2 reference environment with strictly positive mean matrices,
// strongly subcritical, gamma = 1.5.
inline EnvDistribution env_b() {
    OffspringLaw a1(2, {{{0, 0}, 0.4}, {{1, 0}, 0.2}, {{0, 1}, 0.2}, {{1, 1}, 0.2}});
    OffspringLaw a2(2, {{{0, 0}, 0.5}, {{1, 0}, 0.2}, {{0, 1}, 0.1}, {{1, 1}, 0.2}});
    OffspringLaw b1(2, {{{0, 0}, 0.7}, {{1, 0}, 0.1}, {{0, 1}, 0.1}, {{1, 1}, 0.1}});
    OffspringLaw b2(2, {{{0, 0}, 0.6}, {{1, 0}, 0.1}, {{0, 1}, 0.2}, {{1, 1}, 0.1}});
    return EnvDistribution({derive_moments({a1, a2}), derive_moments({b1, b2})}, {0.5, 0.5});
}

// single-atom environment from one offspring law per type
inline EnvDistribution deterministic_env(std::vector<OffspringLaw> laws) {
    return EnvDistribution({derive_moments(std::move(laws))}, {1.0});
}

// p = 1 point-mass environment {k children w.p. 1}
inline EnvDistribution scalar_deterministic(int64_t k) {
    return deterministic_env({OffspringLaw(1, {{{k}, 1.0}})});
}

// Random environment with laws supported on {0,1}^p: every mean matrix is
// strictly positive and every law has nonzero second moments, so H0-H4 hold.
inline EnvDistribution random_env(bpre::Rng& rng, int p, int n_atoms) {
    std::vector<EnvAtom> atoms;
    std::vector<double> weights;
    for (int a = 0; a < n_atoms; ++a) {
        std::vector<OffspringLaw> laws;
        for (int type = 0; type < p; ++type) {
            std::vector<OffspringLaw::Entry> entries;
            const int points = 1 << p;
            double total = 0.0;
            std::vector<double> raw(static_cast<size_t>(points));
            for (double& w : raw) {
                w = 0.05 + rng.uniform01();
                total += w;
            }
            for (int mask = 0; mask < points; ++mask) {
                std::vector<int64_t> z(static_cast<size_t>(p));
                for (int j = 0; j < p; ++j) z[static_cast<size_t>(j)] = (mask >> j) & 1;
                entries.push_back({std::move(z), raw[static_cast<size_t>(mask)] / total});
            }
            laws.emplace_back(p, std::move(entries));
        }
        atoms.push_back(derive_moments(std::move(laws)));
        weights.push_back(1.0);
    }
    for (double& w : weights) w /= n_atoms;
    return EnvDistribution(std::move(atoms), std::move(weights));
}

}  // namespace bpre_test

#endif
