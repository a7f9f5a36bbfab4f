#include "bpre/tilt.hpp"

#include <algorithm>
#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/matprod.hpp"
#include "bpre/parallel.hpp"

namespace bpre::tilt {

namespace {

constexpr double kDefectGate = 1e-3;

double checked_r(const SpectralSolution& spec, const Vec& x) {
    const double r = spec.r_at(x);
    if (!(r > 0.0))
        throw NumericalError("tilt: interpolated eigenfunction is not positive "
                             "(corrupted spectral solution)");
    return r;
}

void check_direction(const Vec& x, int p) {
    if (static_cast<int>(x.size()) != p)
        throw InputError("tilt: direction has wrong dimension");
    double sum = 0.0;
    for (double v : x) {
        if (v < 0.0) throw InputError("tilt: direction must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InputError("tilt: direction must lie on the simplex (|x| = 1)");
}

// log p_n for a product given as (matrix, log_scale)
double log_density_scaled(const Vec& x0, const matprod::ScaledMat& l, int n,
                          const SpectralSolution& spec) {
    const Vec lx = mat_vec(l.m, x0);
    const double norm = l1_norm(lx);
    if (!(norm > 0.0)) throw DegenerateInputError("tilt density: L x = 0");
    Vec dir(lx);
    for (double& v : dir) v /= norm;
    return spec.theta * (std::log(norm) + l.log_scale) - n * std::log(spec.lambda) +
           std::log(checked_r(spec, dir)) - std::log(checked_r(spec, x0));
}

}  // namespace

double one_step_weight(const Vec& x, const model::EnvAtom& atom,
                       const SpectralSolution& spec) {
    check_direction(x, atom.mean_matrix.n);
    const Vec mx = mat_vec(atom.mean_matrix, x);
    const double norm = l1_norm(mx);
    if (!(norm > 0.0)) throw DegenerateInputError("one_step_weight: M x = 0");
    Vec dir(mx);
    for (double& v : dir) v /= norm;
    return std::pow(norm, spec.theta) * checked_r(spec, dir) /
           (spec.lambda * checked_r(spec, x));
}

StepDistribution step_distribution(const Vec& x, const model::EnvDistribution& env,
                                   const SpectralSolution& spec) {
    StepDistribution out;
    out.probs.resize(env.atoms.size());
    double total = 0.0;
    for (size_t e = 0; e < env.atoms.size(); ++e) {
        out.probs[e] = env.weights[e] * one_step_weight(x, env.atoms[e], spec);
        total += out.probs[e];
    }
    out.raw_defect = std::abs(total - 1.0);
    if (out.raw_defect > kDefectGate)
        throw NumericalError("step_distribution: normalization defect " +
                             std::to_string(out.raw_defect) +
                             " exceeds 1e-3 (grid too coarse)");
    for (double& q : out.probs) q /= total;
    return out;
}

TiltedPath sample_path(const model::EnvDistribution& env, const SpectralSolution& spec,
                       Vec x0, int n, Rng& rng) {
    if (n < 0) throw InputError("sample_path: n must be >= 0");
    check_direction(x0, env.p);

    TiltedPath path;
    path.theta = spec.theta;
    path.directions.reserve(static_cast<size_t>(n) + 1);
    path.directions.push_back(std::move(x0));
    path.atom_indices.reserve(static_cast<size_t>(n));

    std::vector<double> cumulative(env.atoms.size());
    for (int k = 0; k < n; ++k) {
        const Vec& x = path.directions.back();
        const StepDistribution dist = step_distribution(x, env, spec);
        double acc = 0.0;
        for (size_t e = 0; e < dist.probs.size(); ++e) {
            acc += dist.probs[e];
            cumulative[e] = acc;
        }
        cumulative.back() = 1.0;
        const int e = pick_index(cumulative, rng.uniform01());
        path.atom_indices.push_back(e);
        path.log_density +=
            std::log(one_step_weight(x, env.atoms[static_cast<size_t>(e)], spec));
        const Vec mx = mat_vec(env.atoms[static_cast<size_t>(e)].mean_matrix, x);
        path.directions.push_back(project_direction(mx));
    }
    return path;
}

double log_density(const Vec& x0, const model::EnvDistribution& env, const EnvSequence& seq,
                   const SpectralSolution& spec) {
    check_direction(x0, env.p);
    const matprod::ScaledMat l = matprod::left_product_full(env, seq);
    return log_density_scaled(x0, l, static_cast<int>(seq.size()), spec);
}

double density(const Vec& x0, const model::EnvDistribution& env, const EnvSequence& seq,
               const SpectralSolution& spec) {
    return std::exp(log_density(x0, env, seq, spec));
}

namespace {

std::vector<Vec> probe_directions(int p) {
    std::vector<Vec> probes;
    for (int i = 0; i < p; ++i) probes.push_back(basis_vector(p, i));
    if (p > 1) probes.push_back(Vec(static_cast<size_t>(p), 1.0 / p));
    return probes;
}

int64_t checked_sequence_count(int atoms, int n, int64_t budget) {
    int64_t total = 1;
    for (int k = 0; k < n; ++k) {
        if (total > budget / atoms + 1)
            throw BudgetExceededError("tilt check: enumeration exceeds the budget");
        total *= atoms;
    }
    return total;
}

}  // namespace

double check_consistency(const model::EnvDistribution& env, const SpectralSolution& spec,
                         int n, int64_t budget) {
    if (n < 0) throw InputError("check_consistency: n must be >= 0");
    const int atoms = env.atom_count();
    const int64_t total = checked_sequence_count(atoms, n, budget);

    double worst = 0.0;
    for (const Vec& x : probe_directions(env.p)) {
        EnvSequence seq(static_cast<size_t>(n));
        for (int64_t idx = 0; idx < total; ++idx) {
            int64_t rem = idx;
            for (int k = n - 1; k >= 0; --k) {
                seq[static_cast<size_t>(k)] = static_cast<int>(rem % atoms);
                rem /= atoms;
            }
            const matprod::ScaledMat l = matprod::left_product_full(env, seq);
            const double base = std::exp(log_density_scaled(x, l, n, spec));
            KahanSum extended;
            for (int e = 0; e < atoms; ++e) {
                matprod::ScaledMat le = l;
                le.m = mat_mul(env.atoms[static_cast<size_t>(e)].mean_matrix, l.m);
                extended.add(env.weights[static_cast<size_t>(e)] *
                             std::exp(log_density_scaled(x, le, n + 1, spec)));
            }
            worst = std::max(worst, std::abs(extended.value() - base));
        }
    }
    return worst;
}

double check_total_mass(const model::EnvDistribution& env, const SpectralSolution& spec,
                        int n, int64_t budget) {
    if (n < 0) throw InputError("check_total_mass: n must be >= 0");
    const int atoms = env.atom_count();
    const int64_t total = checked_sequence_count(atoms, n, budget);

    double worst = 0.0;
    for (const Vec& x : probe_directions(env.p)) {
        KahanSum mass;
        EnvSequence seq(static_cast<size_t>(n));
        for (int64_t idx = 0; idx < total; ++idx) {
            int64_t rem = idx;
            double weight = 1.0;
            for (int k = n - 1; k >= 0; --k) {
                seq[static_cast<size_t>(k)] = static_cast<int>(rem % atoms);
                rem /= atoms;
            }
            for (int k : seq) weight *= env.weights[static_cast<size_t>(k)];
            const matprod::ScaledMat l = matprod::left_product_full(env, seq);
            mass.add(weight * std::exp(log_density_scaled(x, l, n, spec)));
        }
        worst = std::max(worst, std::abs(mass.value() - 1.0));
    }
    return worst;
}

std::vector<CurvePoint> is_curve(const model::EnvDistribution& env,
                                 const SpectralSolution& spec, int i,
                                 const std::vector<int>& ns, int64_t reps, uint64_t seed,
                                 const Vec& s) {
    if (i < 0 || i >= env.p) throw InputError("is_curve: type index out of range");
    if (reps < 1) throw InputError("is_curve: reps must be >= 1");
    if (ns.empty()) throw InputError("is_curve: empty schedule");
    for (size_t k = 0; k < ns.size(); ++k) {
        if (ns[k] < 0) throw InputError("is_curve: n must be >= 0");
        if (k > 0 && ns[k] <= ns[k - 1])
            throw InputError("is_curve: schedule must be strictly increasing");
    }
    if (static_cast<int>(s.size()) != env.p) throw InputError("is_curve: s has wrong dimension");
    for (double v : s)
        if (!(v >= 0.0) || v > 1.0) throw InputError("is_curve: s must lie in [0,1]^p");

    const int n_max = ns.back();
    const size_t m = ns.size();
    const Vec x0 = basis_vector(env.p, i);
    const double log_lambda = std::log(spec.lambda);
    const double log_r0 = std::log(spec.r_at(x0));
    const Vec zero(static_cast<size_t>(env.p), 0.0);

    struct Block {
        std::vector<KahanSum> sum_s, sum_0, sq_s, sq_0, cross;
        explicit Block(size_t m)
            : sum_s(m), sum_0(m), sq_s(m), sq_0(m), cross(m) {}
    };
    std::vector<Block> blocks(kReplicaBlocks, Block(m));

    for_each_block(reps, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        Block& blk = blocks[static_cast<size_t>(b)];
        std::vector<double> cumulative(env.atoms.size());
        for (int64_t rep = begin; rep < end; ++rep) {
            Rng rng = derived_rng(seed, static_cast<uint64_t>(rep));
            Vec x = x0;
            Vec ys = s;      // F_{k,0}(s), grown one generation per step
            Vec y0 = zero;   // F_{k,0}(0)
            double log_norm = 0.0;  // log |L_{k,1} e_i|
            size_t next = 0;

            // n = 0 entries (no steps yet)
            auto record = [&](int k) {
                const double log_r_end = std::log(checked_r(spec, x));
                const double base = k * log_lambda + log_r0 - log_norm - log_r_end;
                const double ui_s = 1.0 - ys[static_cast<size_t>(i)];
                const double ui_0 = 1.0 - y0[static_cast<size_t>(i)];
                const double vs = ui_s > 0.0 ? std::exp(base + std::log(ui_s)) : 0.0;
                const double v0 = ui_0 > 0.0 ? std::exp(base + std::log(ui_0)) : 0.0;
                blk.sum_s[next].add(vs);
                blk.sum_0[next].add(v0);
                blk.sq_s[next].add(vs * vs);
                blk.sq_0[next].add(v0 * v0);
                blk.cross[next].add(vs * v0);
            };
            if (ns[0] == 0) {
                record(0);
                ++next;
            }
            for (int k = 1; k <= n_max; ++k) {
                const StepDistribution dist = step_distribution(x, env, spec);
                double acc = 0.0;
                for (size_t e = 0; e < dist.probs.size(); ++e) {
                    acc += dist.probs[e];
                    cumulative[e] = acc;
                }
                cumulative.back() = 1.0;
                const int e = pick_index(cumulative, rng.uniform01());
                const model::EnvAtom& atom = env.atoms[static_cast<size_t>(e)];

                const Vec mx = mat_vec(atom.mean_matrix, x);
                const double norm = l1_norm(mx);
                log_norm += std::log(norm);
                x = mx;
                for (double& v : x) v /= norm;
                ys = genfun::apply_atom(atom, ys);
                y0 = genfun::apply_atom(atom, y0);

                if (next < m && ns[next] == k) {
                    record(k);
                    ++next;
                }
            }
        }
    });

    std::vector<CurvePoint> out(m);
    for (size_t k = 0; k < m; ++k) {
        KahanSum ts, t0, qs, q0, cr;
        for (const auto& blk : blocks) {
            ts.add(blk.sum_s[k].value());
            t0.add(blk.sum_0[k].value());
            qs.add(blk.sq_s[k].value());
            q0.add(blk.sq_0[k].value());
            cr.add(blk.cross[k].value());
        }
        const double r = static_cast<double>(reps);
        CurvePoint& cp = out[k];
        cp.n = ns[k];
        cp.mean_s = ts.value() / r;
        cp.mean_zero = t0.value() / r;
        if (reps > 1) {
            const double var_s = std::max(0.0, (qs.value() - r * cp.mean_s * cp.mean_s) / (r - 1));
            const double var_0 =
                std::max(0.0, (q0.value() - r * cp.mean_zero * cp.mean_zero) / (r - 1));
            cp.se_s = std::sqrt(var_s / r);
            cp.se_zero = std::sqrt(var_0 / r);
            cp.cov = (cr.value() - r * cp.mean_s * cp.mean_zero) / (r - 1);
        } else {
            cp.se_s = cp.se_zero = cp.cov = 0.0;
        }
    }
    return out;
}

IsEstimate is_survival(const model::EnvDistribution& env, const SpectralSolution& spec,
                       int i, int n, int64_t reps, uint64_t seed, const Vec& s) {
    if (n == 0) {
        // |Z_0| = 1 deterministically: E[1 - s^{Z_0}] = 1 - s^i
        return {1.0 - s[static_cast<size_t>(i)], 0.0};
    }
    const auto curve = is_curve(env, spec, i, {n}, reps, seed, s);
    return {curve[0].mean_s, curve[0].se_s};
}

IsEstimate is_survival(const model::EnvDistribution& env, const SpectralSolution& spec,
                       int i, int n, int64_t reps, uint64_t seed) {
    return is_survival(env, spec, i, n, reps, seed, Vec(static_cast<size_t>(env.p), 0.0));
}

std::vector<PhiPoint> phi_curve(const model::EnvDistribution& env,
                                const SpectralSolution& spec, int i,
                                const std::vector<int>& ns, int64_t reps, uint64_t seed,
                                const Vec& s) {
    const auto curve = is_curve(env, spec, i, ns, reps, seed, s);
    std::vector<PhiPoint> out;
    out.reserve(curve.size());
    for (const auto& cp : curve) {
        if (!(cp.mean_zero > 0.0))
            throw NumericalError("phi_curve: denominator estimate vanished at n = " +
                                 std::to_string(cp.n));
        const double ratio = cp.mean_s / cp.mean_zero;
        const double r = static_cast<double>(reps);
        const double b2 = cp.mean_zero * cp.mean_zero;
        const double var_ratio =
            (cp.se_s * cp.se_s) / b2 +
            (cp.mean_s * cp.mean_s) * (cp.se_zero * cp.se_zero) / (b2 * b2) -
            2.0 * cp.mean_s * (cp.cov / r) / (b2 * cp.mean_zero);
        out.push_back({cp.n, 1.0 - ratio, std::sqrt(std::max(0.0, var_ratio))});
    }
    return out;
}

PsiSeries psi_series(const model::EnvDistribution& env, const SpectralSolution& spec, Vec x0,
                     int k_max, Rng& rng) {
    if (k_max < 0) throw InputError("psi_series: K must be >= 0");
    check_direction(x0, env.p);

    PsiSeries out;
    out.partial_sums.reserve(static_cast<size_t>(k_max) + 1);
    out.partial_sums.push_back(1.0);
    out.increments.reserve(static_cast<size_t>(k_max));

    matprod::ScaledMat l = matprod::ScaledMat::identity(env.p);  // L_{k-1,1}
    Vec x = std::move(x0);
    std::vector<double> cumulative(env.atoms.size());
    KahanSum sum;
    sum.add(1.0);
    for (int k = 1; k <= k_max; ++k) {
        const StepDistribution dist = step_distribution(x, env, spec);
        double acc = 0.0;
        for (size_t e = 0; e < dist.probs.size(); ++e) {
            acc += dist.probs[e];
            cumulative[e] = acc;
        }
        cumulative.back() = 1.0;
        const int e = pick_index(cumulative, rng.uniform01());
        const model::EnvAtom& atom = env.atoms[static_cast<size_t>(e)];

        const double increment = std::exp(l.log_op_norm()) * atom.t_value;
        out.increments.push_back(increment);
        sum.add(increment);
        out.partial_sums.push_back(sum.value());

        l = l.times_left(atom.mean_matrix, k);
        x = project_direction(mat_vec(atom.mean_matrix, x));
    }
    return out;
}

}  // namespace bpre::tilt
