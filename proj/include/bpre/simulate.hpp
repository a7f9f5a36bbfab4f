#ifndef BPRE_SIMULATE_HPP
#define BPRE_SIMULATE_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "bpre/model.hpp"
#include "bpre/rng.hpp"

namespace bpre::sim {

struct PopulationState {
    std::vector<int64_t> z;
    int generation = 0;

    bool extinct() const {
        for (int64_t c : z)
            if (c > 0) return false;
        return true;
    }
};

struct Trajectory {
    std::vector<PopulationState> states;  // 0..n
    std::vector<int> env_indices;         // 1..n
};

// One generation: every type-j parent draws an offspring vector from the
// atom's law j. The zero state maps to zero without consuming randomness.
PopulationState step(const PopulationState& state, const model::EnvAtom& atom, Rng& rng);

// n generations under i.i.d. atom draws from the environment law.
Trajectory run(const model::EnvDistribution& env, std::vector<int64_t> z0, int n, Rng& rng);

// Same recursion under a frozen atom sequence.
Trajectory run_frozen(const model::EnvDistribution& env, const std::vector<int>& seq,
                      std::vector<int64_t> z0, Rng& rng);

struct McEstimate {
    double estimate;
    double std_error;
};

// Naive Monte Carlo estimate of P(|Z_n| > 0 | Z_0 = e_i) with binomial
// standard error. Replicas use streams derived from (seed, replica).
McEstimate mc_survival(const model::EnvDistribution& env, int i, int n, int64_t reps,
                       uint64_t seed);

struct EmpiricalConditional {
    std::map<std::vector<int64_t>, double> pmf;  // law of Z_n given |Z_n| > 0
    int64_t survivors = 0;
    int64_t reps = 0;

    bool no_survivors() const { return survivors == 0; }
    // empirical conditional PGF at s
    double pgf(const Vec& s) const;
};

EmpiricalConditional conditional_empirical(const model::EnvDistribution& env, int i, int n,
                                           int64_t reps, uint64_t seed);

}  // namespace bpre::sim

#endif
