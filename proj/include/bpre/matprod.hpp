#ifndef BPRE_MATPROD_HPP
#define BPRE_MATPROD_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "bpre/linalg.hpp"
#include "bpre/model.hpp"

namespace bpre::matprod {

using EnvSequence = std::vector<int>;

// Matrix with a factored-out log scale: value = m * exp(log_scale). Long
// subcritical products underflow doubles, so consumers work with this pair.
struct ScaledMat {
    Mat m;
    double log_scale = 0.0;

    static ScaledMat identity(int p) { return {Mat::identity(p), 0.0}; }

    double log_op_norm() const { return std::log(op_norm(m)) + log_scale; }
    double log_l1_norm() const { return std::log(l1_norm(m)) + log_scale; }
    Mat value() const;

    // multiply by `next` on the given side, rescaling every 20 steps
    ScaledMat times_right(const Mat& next, int step) const;  // this * next
    ScaledMat times_left(const Mat& next, int step) const;   // next * this
};

// Right products R_k = M_1 ... M_k and left products L_{n,k} = M_n ... M_k
// along one environment sequence. right[k] = R_k (R_0 = Id);
// left[k] = L_{n,k} for k = 1..n+1 (L_{n,n+1} = Id).
struct MatrixPath {
    EnvSequence seq;
    std::vector<ScaledMat> right;
    std::vector<ScaledMat> left;

    const ScaledMat& left_product(int k) const { return left[static_cast<size_t>(k) - 1]; }
};

MatrixPath products(const model::EnvDistribution& env, const EnvSequence& seq);

// L_{n,1} = M_n ... M_1 only (cheaper than a full MatrixPath).
ScaledMat left_product_full(const model::EnvDistribution& env, const EnvSequence& seq);

struct Norms {
    double op;  // max column sum
    double l1;  // sum of |entries|
};
Norms norms(const Mat& m);

// Rank-one approximation of a positive product: v = direction of L*1,
// u = direction of 1'L, scale = op_norm(L), residual measured in the
// operator norm after normalizing both sides.
struct RankOneDecomposition {
    double log_scale;  // log op_norm of the product
    Vec v;
    Vec u;
    double residual;
};

RankOneDecomposition hennion_decompose(const model::EnvDistribution& env,
                                       const EnvSequence& seq);

struct LyapunovEstimate {
    double mean;
    double std_error;
};

// Average of log||L_{n,1}|| / n over independently sampled sequences. The
// sampler receives a per-replica seed and returns the atom indices; it may
// draw from the ambient law or any tilted law.
LyapunovEstimate lyapunov(const model::EnvDistribution& env,
                          const std::function<EnvSequence(uint64_t)>& sampler, int n,
                          int reps);

}  // namespace bpre::matprod

#endif
