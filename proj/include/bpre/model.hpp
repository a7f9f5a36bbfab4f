#ifndef BPRE_MODEL_HPP
#define BPRE_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bpre/linalg.hpp"

namespace bpre::model {

// Finitely supported offspring distribution on Z_+^p for one parent type.
// Immutable after construction; carries the sampling table for inverse-CDF
// draws and evaluates its own generating function.
struct OffspringLaw {
    struct Entry {
        std::vector<int64_t> z;
        double prob;
    };

    int p = 0;
    std::vector<Entry> support;
    std::vector<double> cumulative;  // normalized, last entry forced to 1

    OffspringLaw(int p_, std::vector<Entry> entries);

    // f(s) = sum_z p(z) * prod_j s_j^z_j, with 0^0 = 1
    double pgf(const Vec& s) const;

    double mean(int j) const;                     // E[z_j]
    double second_factorial(int i, int j) const;  // E[z_i z_j] - delta_ij E[z_i]
};

double pgf_eval(const OffspringLaw& law, const Vec& s);

// One support point of the environment law: a p-tuple of offspring laws plus
// the derived moment objects.
struct EnvAtom {
    std::vector<OffspringLaw> laws;
    Mat mean_matrix;            // M(i,j) = E[type-j children of a type-i parent]
    std::vector<Mat> hessians;  // B(k) = second factorial moments of law k
    double t_value = 0.0;       // sum_k ||B(k)|| / ||M||^2
    double gamma = 0.0;         // max entry / min entry of M, +inf if min == 0
};

EnvAtom derive_moments(std::vector<OffspringLaw> laws);

// Finite mixture of atoms; the law of the random environment.
struct EnvDistribution {
    int p = 0;
    std::vector<EnvAtom> atoms;
    std::vector<double> weights;
    std::vector<double> cumulative;

    EnvDistribution(std::vector<EnvAtom> atoms_, std::vector<double> weights_);

    int atom_count() const { return static_cast<int>(atoms.size()); }

    // max over atoms of the per-atom entry ratio (the global gamma of H3)
    double global_gamma() const;
};

struct ConditionReport {
    bool h0 = false;
    bool h1 = false;
    std::string h1_note;
    bool h2 = false;
    bool h2_sufficient_only = true;
    bool h3 = false;
    double gamma = 0.0;
    bool h4 = false;
    std::string h4_note;
    double h4_moment = 0.0;  // E[||M|| |log T|^(1+eps)] when finite
    double epsilon_used = 0.0;

    bool all_pass() const { return h0 && h1 && h2 && h3 && h4; }
};

// H0: ||M|| > 0 for every atom. H1: finite support makes Theta = (0, inf).
// H2: checked through the sufficient criterion "every M strictly positive"
// (flagged sufficient-only). H3: finite global entry ratio. H4: every atom
// has T > 0, making E[||M|| |log T|^(1+eps)] a finite sum.
ConditionReport check_conditions(const EnvDistribution& env, double epsilon = 0.5);

}  // namespace bpre::model

#endif
