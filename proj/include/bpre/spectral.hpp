#ifndef BPRE_SPECTRAL_HPP
#define BPRE_SPECTRAL_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "bpre/linalg.hpp"
#include "bpre/model.hpp"

namespace bpre::spectral {

// Nodes on the direction simplex S_+ = {x >= 0 : |x| = 1} with a
// piecewise-linear interpolation structure. p = 1 degenerates to the single
// node {1}; p = 2 is a uniform segment grid with K nodes; p = 3 a barycentric
// triangle grid with K nodes per edge.
struct SimplexGrid {
    int p = 0;
    int size_param = 0;  // K
    std::vector<Vec> nodes;

    static SimplexGrid build(int p, int K);

    struct Interp {
        int count = 0;
        std::array<int, 3> idx{};
        std::array<double, 3> w{};
    };

    // Nonnegative interpolation weights for an arbitrary direction.
    Interp locate(const Vec& x) const;

    double interpolate(const std::vector<double>& g, const Vec& x) const;

    int node_count() const { return static_cast<int>(nodes.size()); }
};

// One application of the transfer operator on a grid function:
// (P_theta g)(x) = sum_e prob_e |M_e x|^theta g(M_e . x).
std::vector<double> apply_transfer(const model::EnvDistribution& env, double theta,
                                   const std::vector<double>& g, const SimplexGrid& grid);

struct SpectralSolution {
    double theta = 0.0;
    double lambda = 0.0;
    std::vector<double> r_values;  // strictly positive, sum_i l_i r_i = 1
    std::vector<double> l_weights; // nonnegative, sum = 1
    SimplexGrid grid;
    int iterations = 0;
    double residual = 0.0;

    double r_at(const Vec& x) const { return grid.interpolate(r_values, x); }
};

// Perron triple (lambda, r, l) of the discretized transfer operator by power
// iteration. Requires strictly positive mean matrices and p <= 3.
SpectralSolution solve(const model::EnvDistribution& env, double theta, int grid_size = 200,
                       double tol = 1e-12, int max_iter = 50000);

struct McLambda {
    double estimate;   // (mean ||R_n||^theta)^(1/n)
    double std_error;  // delta method
};

// Subadditive Monte Carlo estimate of lambda(theta); biased for finite n.
McLambda lambda_subadditive_mc(const model::EnvDistribution& env, double theta, int n,
                               int reps, uint64_t seed);

// Central finite difference of Lambda(theta) = log lambda(theta).
double lambda_prime(const model::EnvDistribution& env, double theta, double h = 1e-3,
                    int grid_size = 200);

struct Subcriticality {
    double lambda1;
    double lambda_prime1;
    bool strongly_subcritical;
};

Subcriticality subcriticality_check(const model::EnvDistribution& env, int grid_size = 200);

}  // namespace bpre::spectral

#endif
