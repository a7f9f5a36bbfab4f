#include "bpre/simulate.hpp"

#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/parallel.hpp"

namespace bpre::sim {

namespace {

// counts above 2^53 are no longer exactly representable as doubles
constexpr int64_t kSaturationLimit = int64_t{1} << 53;

void check_state(const PopulationState& state, int p) {
    if (static_cast<int>(state.z.size()) != p)
        throw InputError("population state has wrong number of types");
    for (int64_t c : state.z)
        if (c < 0) throw InputError("population counts must be nonnegative");
}

int draw_atom(const model::EnvDistribution& env, Rng& rng) {
    return pick_index(env.cumulative, rng.uniform01());
}

}  // namespace

PopulationState step(const PopulationState& state, const model::EnvAtom& atom, Rng& rng) {
    const int p = atom.mean_matrix.n;
    check_state(state, p);

    PopulationState next;
    next.z.assign(static_cast<size_t>(p), 0);
    next.generation = state.generation + 1;
    if (state.extinct()) return next;

    for (int j = 0; j < p; ++j) {
        const model::OffspringLaw& law = atom.laws[static_cast<size_t>(j)];
        for (int64_t parent = 0; parent < state.z[static_cast<size_t>(j)]; ++parent) {
            const int pick = pick_index(law.cumulative, rng.uniform01());
            const auto& child = law.support[static_cast<size_t>(pick)].z;
            for (int c = 0; c < p; ++c) {
                next.z[static_cast<size_t>(c)] += child[static_cast<size_t>(c)];
                if (next.z[static_cast<size_t>(c)] > kSaturationLimit)
                    throw SaturationError("population count exceeded 2^53");
            }
        }
    }
    return next;
}

Trajectory run(const model::EnvDistribution& env, std::vector<int64_t> z0, int n, Rng& rng) {
    if (n < 0) throw InputError("run: n must be >= 0");
    Trajectory traj;
    traj.states.reserve(static_cast<size_t>(n) + 1);
    traj.env_indices.reserve(static_cast<size_t>(n));
    traj.states.push_back({std::move(z0), 0});
    check_state(traj.states.front(), env.p);
    for (int k = 0; k < n; ++k) {
        const int e = draw_atom(env, rng);
        traj.env_indices.push_back(e);
        traj.states.push_back(step(traj.states.back(), env.atoms[static_cast<size_t>(e)], rng));
    }
    return traj;
}

Trajectory run_frozen(const model::EnvDistribution& env, const std::vector<int>& seq,
                      std::vector<int64_t> z0, Rng& rng) {
    Trajectory traj;
    traj.states.push_back({std::move(z0), 0});
    check_state(traj.states.front(), env.p);
    traj.env_indices = seq;
    for (int e : seq) {
        if (e < 0 || e >= env.atom_count())
            throw InputError("run_frozen: atom index out of range");
        traj.states.push_back(step(traj.states.back(), env.atoms[static_cast<size_t>(e)], rng));
    }
    return traj;
}

McEstimate mc_survival(const model::EnvDistribution& env, int i, int n, int64_t reps,
                       uint64_t seed) {
    if (i < 0 || i >= env.p) throw InputError("mc_survival: type index out of range");
    if (n < 0) throw InputError("mc_survival: n must be >= 0");
    if (reps < 1) throw InputError("mc_survival: reps must be >= 1");

    std::vector<int64_t> block_hits(kReplicaBlocks, 0);
    for_each_block(reps, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        for (int64_t r = begin; r < end; ++r) {
            Rng rng = derived_rng(seed, static_cast<uint64_t>(r));
            PopulationState state{std::vector<int64_t>(static_cast<size_t>(env.p), 0), 0};
            state.z[static_cast<size_t>(i)] = 1;
            for (int k = 0; k < n && !state.extinct(); ++k) {
                const int e = draw_atom(env, rng);
                state = step(state, env.atoms[static_cast<size_t>(e)], rng);
            }
            if (!state.extinct()) ++block_hits[static_cast<size_t>(b)];
        }
    });

    int64_t hits = 0;
    for (int64_t h : block_hits) hits += h;
    const double p_hat = static_cast<double>(hits) / static_cast<double>(reps);
    const double se = std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat) / static_cast<double>(reps)));
    return {p_hat, se};
}

double EmpiricalConditional::pgf(const Vec& s) const {
    double out = 0.0;
    for (const auto& [z, prob] : pmf) {
        double term = prob;
        for (size_t j = 0; j < z.size(); ++j) {
            for (int64_t k = 0; k < z[j]; ++k) term *= s[j];
        }
        out += term;
    }
    return out;
}

EmpiricalConditional conditional_empirical(const model::EnvDistribution& env, int i, int n,
                                           int64_t reps, uint64_t seed) {
    if (i < 0 || i >= env.p) throw InputError("conditional_empirical: type index out of range");
    if (n < 0) throw InputError("conditional_empirical: n must be >= 0");
    if (reps < 1) throw InputError("conditional_empirical: reps must be >= 1");

    // per-block count maps, merged in block order
    std::vector<std::map<std::vector<int64_t>, int64_t>> block_counts(kReplicaBlocks);
    for_each_block(reps, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        for (int64_t r = begin; r < end; ++r) {
            Rng rng = derived_rng(seed, static_cast<uint64_t>(r));
            PopulationState state{std::vector<int64_t>(static_cast<size_t>(env.p), 0), 0};
            state.z[static_cast<size_t>(i)] = 1;
            for (int k = 0; k < n && !state.extinct(); ++k) {
                const int e = draw_atom(env, rng);
                state = step(state, env.atoms[static_cast<size_t>(e)], rng);
            }
            if (!state.extinct()) ++block_counts[static_cast<size_t>(b)][state.z];
        }
    });

    EmpiricalConditional out;
    out.reps = reps;
    std::map<std::vector<int64_t>, int64_t> merged;
    for (const auto& bc : block_counts)
        for (const auto& [z, c] : bc) merged[z] += c;
    for (const auto& [z, c] : merged) out.survivors += c;
    if (out.survivors > 0)
        for (const auto& [z, c] : merged)
            out.pmf[z] = static_cast<double>(c) / static_cast<double>(out.survivors);
    return out;
}

}  // namespace bpre::sim
