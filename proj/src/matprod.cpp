#include "bpre/matprod.hpp"

#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/parallel.hpp"

namespace bpre::matprod {

namespace {

constexpr int kRescaleStride = 20;

void validate_seq(const model::EnvDistribution& env, const EnvSequence& seq) {
    for (int idx : seq)
        if (idx < 0 || idx >= env.atom_count())
            throw InputError("environment sequence: atom index " + std::to_string(idx) +
                             " out of range");
}

ScaledMat rescaled(Mat m, double log_scale, int step) {
    if (step % kRescaleStride == 0) {
        const double c = op_norm(m);
        if (c > 0.0 && std::isfinite(c)) {
            for (double& x : m.a) x /= c;
            log_scale += std::log(c);
        }
    }
    return {std::move(m), log_scale};
}

}  // namespace

Mat ScaledMat::value() const {
    Mat out = m;
    const double c = std::exp(log_scale);
    for (double& x : out.a) x *= c;
    return out;
}

ScaledMat ScaledMat::times_right(const Mat& next, int step) const {
    return rescaled(mat_mul(m, next), log_scale, step);
}

ScaledMat ScaledMat::times_left(const Mat& next, int step) const {
    return rescaled(mat_mul(next, m), log_scale, step);
}

MatrixPath products(const model::EnvDistribution& env, const EnvSequence& seq) {
    validate_seq(env, seq);
    const int n = static_cast<int>(seq.size());
    MatrixPath path;
    path.seq = seq;

    path.right.reserve(static_cast<size_t>(n) + 1);
    path.right.push_back(ScaledMat::identity(env.p));
    for (int k = 1; k <= n; ++k) {
        const Mat& mk = env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k - 1)])].mean_matrix;
        path.right.push_back(path.right.back().times_right(mk, k));
    }

    // left[k-1] = L_{n,k}; built from k = n+1 downwards
    path.left.assign(static_cast<size_t>(n) + 1, ScaledMat::identity(env.p));
    for (int k = n; k >= 1; --k) {
        const Mat& mk = env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k - 1)])].mean_matrix;
        path.left[static_cast<size_t>(k - 1)] =
            path.left[static_cast<size_t>(k)].times_right(mk, n - k + 1);
    }
    return path;
}

ScaledMat left_product_full(const model::EnvDistribution& env, const EnvSequence& seq) {
    validate_seq(env, seq);
    ScaledMat l = ScaledMat::identity(env.p);
    int step = 0;
    for (int idx : seq)
        l = l.times_left(env.atoms[static_cast<size_t>(idx)].mean_matrix, ++step);
    return l;
}

Norms norms(const Mat& m) { return {op_norm(m), l1_norm(m)}; }

RankOneDecomposition hennion_decompose(const model::EnvDistribution& env,
                                       const EnvSequence& seq) {
    const ScaledMat l = seq.empty() ? ScaledMat::identity(env.p)
                                    : left_product_full(env, seq);
    if (!seq.empty() && !(min_entry(l.m) > 0.0))
        throw NotApplicableError("hennion_decompose: product is not strictly positive");

    const int p = l.m.n;
    const double scale = op_norm(l.m);
    if (!(scale > 0.0)) throw NotApplicableError("hennion_decompose: zero product");

    Vec ones(static_cast<size_t>(p), 1.0);
    Vec v = project_direction(mat_vec(l.m, ones));
    Vec u = project_direction(vec_mat(ones, l.m));

    Mat outer(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) outer(i, j) = v[static_cast<size_t>(i)] * u[static_cast<size_t>(j)];
    const double outer_norm = op_norm(outer);

    Mat diff(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            diff(i, j) = l.m(i, j) / scale - outer(i, j) / outer_norm;

    return {l.log_op_norm(), std::move(v), std::move(u), op_norm(diff)};
}

LyapunovEstimate lyapunov(const model::EnvDistribution& env,
                          const std::function<EnvSequence(uint64_t)>& sampler, int n,
                          int reps) {
    if (n < 1) throw InputError("lyapunov: n must be >= 1");
    if (reps < 1) throw InputError("lyapunov: reps must be >= 1");

    struct Block {
        KahanSum sum, sumsq;
    };
    std::vector<Block> blocks(kReplicaBlocks);
    for_each_block(reps, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        for (int64_t r = begin; r < end; ++r) {
            const EnvSequence seq = sampler(static_cast<uint64_t>(r));
            if (static_cast<int>(seq.size()) != n)
                throw InputError("lyapunov: sampler returned a sequence of wrong length");
            const ScaledMat l = left_product_full(env, seq);
            if (!(op_norm(l.m) > 0.0))
                throw NumericalError("lyapunov: zero product norm (H0 violated)");
            const double x = l.log_op_norm() / n;
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
    double se = 0.0;
    if (reps > 1) {
        const double var =
            std::max(0.0, (total_sq.value() - reps * mean * mean) / (reps - 1));
        se = std::sqrt(var / reps);
    }
    return {mean, se};
}

}  // namespace bpre::matprod
