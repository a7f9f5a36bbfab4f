#include "bpre/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/matprod.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rng.hpp"

namespace bpre::spectral {

namespace {

// index of triangle-grid vertex (i, j) with i + j <= m, lattice (i, j, m-i-j)
int tri_index(int i, int j, int m) {
    // rows of decreasing length: row i holds m - i + 1 vertices
    return i * (m + 1) - i * (i - 1) / 2 + j;
}

void check_positive_env(const model::EnvDistribution& env) {
    for (const auto& atom : env.atoms)
        if (!(min_entry(atom.mean_matrix) > 0.0))
            throw NotApplicableError(
                "transfer-operator solve requires strictly positive mean matrices "
                "(H2/H3 sufficient criterion)");
}

}  // namespace

SimplexGrid SimplexGrid::build(int p, int K) {
    if (p < 1 || p > 3) throw InputError("simplex grid supports p in {1,2,3}");
    SimplexGrid grid;
    grid.p = p;
    grid.size_param = K;
    if (p == 1) {
        grid.nodes.push_back(Vec{1.0});
        return grid;
    }
    if (K < 2) throw InputError("simplex grid needs K >= 2");
    const int m = K - 1;
    if (p == 2) {
        grid.nodes.reserve(static_cast<size_t>(K));
        for (int i = 0; i <= m; ++i) {
            const double t = static_cast<double>(i) / m;
            grid.nodes.push_back(Vec{t, 1.0 - t});
        }
        return grid;
    }
    grid.nodes.reserve(static_cast<size_t>(K) * (K + 1) / 2);
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m - i; ++j)
            grid.nodes.push_back(Vec{static_cast<double>(i) / m, static_cast<double>(j) / m,
                                     static_cast<double>(m - i - j) / m});
    return grid;
}

SimplexGrid::Interp SimplexGrid::locate(const Vec& x) const {
    if (static_cast<int>(x.size()) != p)
        throw InputError("grid interpolation: direction has wrong dimension");
    Interp out;
    if (p == 1) {
        out.count = 1;
        out.idx[0] = 0;
        out.w[0] = 1.0;
        return out;
    }
    const int m = size_param - 1;
    if (p == 2) {
        double t = std::clamp(x[0], 0.0, 1.0) * m;
        int cell = std::min(static_cast<int>(t), m - 1);
        const double frac = t - cell;
        out.count = 2;
        out.idx = {cell, cell + 1, 0};
        out.w = {1.0 - frac, frac, 0.0};
        return out;
    }

    // p = 3: barycentric cell lookup on the subdivided triangle
    const double u1 = std::clamp(x[0], 0.0, 1.0) * m;
    const double u2 = std::clamp(x[1], 0.0, 1.0) * m;
    const double u3 = std::clamp(x[2], 0.0, 1.0) * m;
    const int a = std::min(static_cast<int>(u1), m);
    const int b = std::min(static_cast<int>(u2), m);
    const int c = std::min(static_cast<int>(u3), m);
    const double f1 = u1 - a, f2 = u2 - b, f3 = u3 - c;
    // fractional parts sum to m - s, so s is one of {m, m-1, m-2}
    const int s = a + b + c;

    if (s >= m) {
        // lattice point (all fractional parts vanish up to rounding)
        out.count = 1;
        out.idx[0] = tri_index(a, b, m);
        out.w[0] = 1.0;
        return out;
    }
    if (s == m - 1) {
        // upward cell: vertices (a+1,b,c), (a,b+1,c), (a,b,c+1)
        out.count = 3;
        out.idx = {tri_index(a + 1, b, m), tri_index(a, b + 1, m), tri_index(a, b, m)};
        out.w = {f1, f2, f3};
    } else {
        // downward cell: vertices (a+1,b+1,c), (a+1,b,c+1), (a,b+1,c+1)
        out.count = 3;
        out.idx = {tri_index(a + 1, b + 1, m), tri_index(a + 1, b, m), tri_index(a, b + 1, m)};
        out.w = {1.0 - f3, 1.0 - f2, 1.0 - f1};
    }
    // guard against tiny negative weights from rounding
    double total = 0.0;
    for (int k = 0; k < out.count; ++k) {
        out.w[static_cast<size_t>(k)] = std::max(0.0, out.w[static_cast<size_t>(k)]);
        total += out.w[static_cast<size_t>(k)];
    }
    for (int k = 0; k < out.count; ++k) out.w[static_cast<size_t>(k)] /= total;
    return out;
}

double SimplexGrid::interpolate(const std::vector<double>& g, const Vec& x) const {
    const Interp in = locate(x);
    double v = 0.0;
    for (int k = 0; k < in.count; ++k)
        v += in.w[static_cast<size_t>(k)] * g[static_cast<size_t>(in.idx[static_cast<size_t>(k)])];
    return v;
}

namespace {

// Precomputed action of the discretized operator: for node i and atom e,
// coef = prob_e |M_e x_i|^theta spread onto the interpolation stencil of
// M_e . x_i. Stored sparse; applied from the right (functions) and from the
// left (measures).
struct DiscreteOperator {
    struct Term {
        double coef;
        SimplexGrid::Interp stencil;
    };
    int n_nodes = 0;
    std::vector<std::vector<Term>> rows;

    std::vector<double> apply_right(const std::vector<double>& g) const {
        std::vector<double> out(static_cast<size_t>(n_nodes), 0.0);
        for (int i = 0; i < n_nodes; ++i) {
            double acc = 0.0;
            for (const auto& t : rows[static_cast<size_t>(i)])
                for (int k = 0; k < t.stencil.count; ++k)
                    acc += t.coef * t.stencil.w[static_cast<size_t>(k)] *
                           g[static_cast<size_t>(t.stencil.idx[static_cast<size_t>(k)])];
            out[static_cast<size_t>(i)] = acc;
        }
        return out;
    }

    std::vector<double> apply_left(const std::vector<double>& l) const {
        std::vector<double> out(static_cast<size_t>(n_nodes), 0.0);
        for (int i = 0; i < n_nodes; ++i) {
            const double li = l[static_cast<size_t>(i)];
            if (li == 0.0) continue;
            for (const auto& t : rows[static_cast<size_t>(i)])
                for (int k = 0; k < t.stencil.count; ++k)
                    out[static_cast<size_t>(t.stencil.idx[static_cast<size_t>(k)])] +=
                        li * t.coef * t.stencil.w[static_cast<size_t>(k)];
        }
        return out;
    }
};

DiscreteOperator build_operator(const model::EnvDistribution& env, double theta,
                                const SimplexGrid& grid) {
    DiscreteOperator op;
    op.n_nodes = grid.node_count();
    op.rows.resize(static_cast<size_t>(op.n_nodes));
    for (int i = 0; i < op.n_nodes; ++i) {
        op.rows[static_cast<size_t>(i)].reserve(env.atoms.size());
        for (size_t e = 0; e < env.atoms.size(); ++e) {
            const Vec mx = mat_vec(env.atoms[e].mean_matrix, grid.nodes[static_cast<size_t>(i)]);
            const double norm = l1_norm(mx);
            if (!(norm > 0.0))
                throw NotApplicableError("transfer operator: M x = 0 on the simplex");
            Vec dir(mx);
            for (double& v : dir) v /= norm;
            op.rows[static_cast<size_t>(i)].push_back(
                {env.weights[e] * std::pow(norm, theta), grid.locate(dir)});
        }
    }
    return op;
}

}  // namespace

std::vector<double> apply_transfer(const model::EnvDistribution& env, double theta,
                                   const std::vector<double>& g, const SimplexGrid& grid) {
    if (static_cast<int>(g.size()) != grid.node_count())
        throw InputError("apply_transfer: grid function has wrong length");
    return build_operator(env, theta, grid).apply_right(g);
}

SpectralSolution solve(const model::EnvDistribution& env, double theta, int grid_size,
                       double tol, int max_iter) {
    if (!(theta > 0.0)) throw InputError("solve: theta must be positive");
    if (env.p > 3)
        throw InputError("solve: transfer-operator discretization supports p <= 3 "
                         "(the MC estimator remains available)");
    check_positive_env(env);

    SpectralSolution sol;
    sol.theta = theta;
    sol.grid = SimplexGrid::build(env.p, grid_size);
    const DiscreteOperator op = build_operator(env, theta, sol.grid);
    const int n = op.n_nodes;

    std::vector<double> r(static_cast<size_t>(n), 1.0);
    std::vector<double> l(static_cast<size_t>(n), 1.0 / n);
    double lambda_prev = 0.0;
    double lambda_cur = 0.0;
    double resid_r = 0.0, resid_l = 0.0;
    int it = 0;
    for (it = 1; it <= max_iter; ++it) {
        std::vector<double> pr = op.apply_right(r);
        std::vector<double> pl = op.apply_left(l);

        // Rayleigh-type ratio sum l.(P r) / sum l.r
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            num += l[static_cast<size_t>(i)] * pr[static_cast<size_t>(i)];
            den += l[static_cast<size_t>(i)] * r[static_cast<size_t>(i)];
        }
        if (!(den > 0.0) || !(num > 0.0))
            throw NumericalError("solve: power iteration collapsed to zero");
        lambda_cur = num / den;

        resid_r = 0.0;
        resid_l = 0.0;
        for (int i = 0; i < n; ++i) {
            resid_r = std::max(resid_r, std::abs(pr[static_cast<size_t>(i)] -
                                                 lambda_cur * r[static_cast<size_t>(i)]));
            resid_l = std::max(resid_l, std::abs(pl[static_cast<size_t>(i)] -
                                                 lambda_cur * l[static_cast<size_t>(i)]));
        }
        const double r_scale = *std::max_element(r.begin(), r.end());
        const double l_scale = *std::max_element(l.begin(), l.end());

        // normalize iterates: r by its max, l by total mass
        const double pr_max = *std::max_element(pr.begin(), pr.end());
        double pl_sum = 0.0;
        for (double v : pl) pl_sum += v;
        if (!(pr_max > 0.0) || !(pl_sum > 0.0))
            throw NumericalError("solve: lost positivity during iteration");
        for (double& v : pr) v /= pr_max;
        for (double& v : pl) v /= pl_sum;
        r.swap(pr);
        l.swap(pl);

        const bool lambda_ok = it > 1 && std::abs(lambda_cur - lambda_prev) <=
                                             tol * std::max(1.0, std::abs(lambda_cur));
        const bool resid_ok = resid_r <= 5.0 * tol * lambda_cur * r_scale &&
                              resid_l <= 5.0 * tol * lambda_cur * l_scale;
        lambda_prev = lambda_cur;
        if (lambda_ok && resid_ok) break;
    }
    if (it > max_iter)
        throw NumericalError("solve: power iteration did not converge (last residual " +
                             std::to_string(resid_r) + ")");

    // scaling: l a probability vector, then r with sum l.r = 1
    double l_sum = 0.0;
    for (double v : l) l_sum += v;
    for (double& v : l) v /= l_sum;
    double lr = 0.0;
    for (int i = 0; i < n; ++i) lr += l[static_cast<size_t>(i)] * r[static_cast<size_t>(i)];
    if (!(lr > 0.0)) throw NumericalError("solve: degenerate scaling sum l.r");
    for (double& v : r) v /= lr;

    double min_r = *std::min_element(r.begin(), r.end());
    if (!(min_r > 1e-12))
        throw NumericalError("solve: eigenfunction not bounded away from zero (min r = " +
                             std::to_string(min_r) + ")");

    sol.lambda = lambda_cur;
    sol.r_values = std::move(r);
    sol.l_weights = std::move(l);
    sol.iterations = it;
    sol.residual = std::max(resid_r, resid_l) / lambda_cur;
    return sol;
}

McLambda lambda_subadditive_mc(const model::EnvDistribution& env, double theta, int n,
                               int reps, uint64_t seed) {
    if (n < 1) throw InputError("lambda_subadditive_mc: n must be >= 1");
    if (reps < 1) throw InputError("lambda_subadditive_mc: reps must be >= 1");

    struct Block {
        KahanSum sum, sumsq;
    };
    std::vector<Block> blocks(kReplicaBlocks);
    for_each_block(reps, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        for (int64_t rep = begin; rep < end; ++rep) {
            Rng rng = derived_rng(seed, static_cast<uint64_t>(rep));
            matprod::ScaledMat prod = matprod::ScaledMat::identity(env.p);
            for (int k = 1; k <= n; ++k) {
                const int e = pick_index(env.cumulative, rng.uniform01());
                prod = prod.times_right(env.atoms[static_cast<size_t>(e)].mean_matrix, k);
            }
            if (!(op_norm(prod.m) > 0.0))
                throw NumericalError("lambda_subadditive_mc: zero product norm");
            const double x = std::exp(theta * prod.log_op_norm());
            blocks[static_cast<size_t>(b)].sum.add(x);
            blocks[static_cast<size_t>(b)].sumsq.add(x * x);
        }
    });

    KahanSum total, total_sq;
    for (const auto& b : blocks) {
        total.add(b.sum.value());
        total_sq.add(b.sumsq.value());
    }
    const double mean = total.value() / reps;
    double se_mean = 0.0;
    if (reps > 1) {
        const double var = std::max(0.0, (total_sq.value() - reps * mean * mean) / (reps - 1));
        se_mean = std::sqrt(var / reps);
    }
    const double est = std::pow(mean, 1.0 / n);
    // delta method through x -> x^(1/n)
    const double se = mean > 0.0 ? se_mean * est / (n * mean) : 0.0;
    return {est, se};
}

double lambda_prime(const model::EnvDistribution& env, double theta, double h, int grid_size) {
    if (!(theta - h > 0.0)) throw InputError("lambda_prime: theta - h must stay positive");
    const double lo = solve(env, theta - h, grid_size).lambda;
    const double hi = solve(env, theta + h, grid_size).lambda;
    return (std::log(hi) - std::log(lo)) / (2.0 * h);
}

Subcriticality subcriticality_check(const model::EnvDistribution& env, int grid_size) {
    Subcriticality out;
    out.lambda1 = solve(env, 1.0, grid_size).lambda;
    out.lambda_prime1 = lambda_prime(env, 1.0, 1e-3, grid_size);
    out.strongly_subcritical = out.lambda_prime1 < 0.0;
    return out;
}

}  // namespace bpre::spectral
