#ifndef BPRE_TILT_HPP
#define BPRE_TILT_HPP

#include <cstdint>
#include <vector>

#include "bpre/genfun.hpp"
#include "bpre/model.hpp"
#include "bpre/rng.hpp"
#include "bpre/spectral.hpp"

namespace bpre::tilt {

using genfun::EnvSequence;
using spectral::SpectralSolution;

// One-step factor of the tilted density:
// w_theta(x, M) = |M x|^theta r(M . x) / (lambda(theta) r(x)).
double one_step_weight(const Vec& x, const model::EnvAtom& atom,
                       const SpectralSolution& spec);

struct StepDistribution {
    std::vector<double> probs;  // renormalized
    double raw_defect;          // |sum_e prob_e w_e - 1| before renormalization
};

// Tilted one-step atom distribution at direction x. The raw weights sum to 1
// up to grid interpolation error; the defect is recorded and gated.
StepDistribution step_distribution(const Vec& x, const model::EnvDistribution& env,
                                   const SpectralSolution& spec);

struct TiltedPath {
    std::vector<int> atom_indices;  // 1..n
    std::vector<Vec> directions;    // x_0..x_n
    double log_density = 0.0;       // sum of log one-step weights
    double theta = 0.0;
};

// Sequential sampler of the tilted environment law along the direction chain
// x_k = M_k . x_{k-1}. Prefixes of a sampled path are themselves tilted paths
// of the shorter horizon.
TiltedPath sample_path(const model::EnvDistribution& env, const SpectralSolution& spec,
                       Vec x0, int n, Rng& rng);

// log p_n^theta(x0, L_{n,1}) for the given sequence (rescaled products).
double log_density(const Vec& x0, const model::EnvDistribution& env, const EnvSequence& seq,
                   const SpectralSolution& spec);
double density(const Vec& x0, const model::EnvDistribution& env, const EnvSequence& seq,
               const SpectralSolution& spec);

// max over probe directions and all |atoms|^n sequences of
// |E_M[p_{n+1}(x, M m)] - p_n(x, m)|.
double check_consistency(const model::EnvDistribution& env, const SpectralSolution& spec,
                         int n, int64_t budget = genfun::kDefaultEnumBudget);

// max over probe directions of |E[p_n(x, L_{n,1})] - 1| (exhaustive).
double check_total_mass(const model::EnvDistribution& env, const SpectralSolution& spec,
                        int n, int64_t budget = genfun::kDefaultEnumBudget);

struct IsEstimate {
    double estimate;
    double std_error;
};

// Importance-sampled estimate of E[1 - F^i_{n,0}(s)] at theta = 1: tilted
// paths from x0 = e_i, exact composition along the sampled sequence, and the
// change-of-measure factor lambda^n r(e_i) / (|L e_i| r(L . e_i)).
IsEstimate is_survival(const model::EnvDistribution& env, const SpectralSolution& spec,
                       int i, int n, int64_t reps, uint64_t seed, const Vec& s);
IsEstimate is_survival(const model::EnvDistribution& env, const SpectralSolution& spec,
                       int i, int n, int64_t reps, uint64_t seed);  // s = 0

// Shared-path curve: one tilted path of length max(ns) per replica, with the
// estimator evaluated on every scheduled prefix, for the pair (s, 0). The
// common randomness couples successive n values and the phi ratio.
struct CurvePoint {
    int n;
    double mean_s, se_s;
    double mean_zero, se_zero;
    double cov;  // sample covariance of the two per-path values
};
std::vector<CurvePoint> is_curve(const model::EnvDistribution& env,
                                 const SpectralSolution& spec, int i,
                                 const std::vector<int>& ns, int64_t reps, uint64_t seed,
                                 const Vec& s);

struct PhiPoint {
    int n;
    double phi;
    double std_error;
};
// Phi_hat(n) = 1 - E_hat[1-F(s)] / E_hat[1-F(0)] with common random numbers.
std::vector<PhiPoint> phi_curve(const model::EnvDistribution& env,
                                const SpectralSolution& spec, int i,
                                const std::vector<int>& ns, int64_t reps, uint64_t seed,
                                const Vec& s);

// Partial sums S_K = 1 + sum_{k<=K} ||L_{k-1,1}|| T_k along one tilted path.
struct PsiSeries {
    std::vector<double> partial_sums;  // S_0..S_Kmax
    std::vector<double> increments;    // 1..Kmax
};
PsiSeries psi_series(const model::EnvDistribution& env, const SpectralSolution& spec, Vec x0,
                     int k_max, Rng& rng);

}  // namespace bpre::tilt

#endif
