#ifndef BPRE_GENFUN_HPP
#define BPRE_GENFUN_HPP

#include <cstdint>
#include <vector>

#include "bpre/linalg.hpp"
#include "bpre/matprod.hpp"
#include "bpre/model.hpp"

namespace bpre::genfun {

using matprod::EnvSequence;

enum class Order { forward, backward };

inline constexpr int64_t kDefaultEnumBudget = 10'000'000;

// Evaluates one fixed-environment realization of the generating function of
// the whole process: forward gives F_{0,n}(s) = F_1 o ... o F_n (s),
// backward gives F_{n,0}(s) = F_n o ... o F_1 (s). Empty sequence returns s.
Vec compose(const model::EnvDistribution& env, const EnvSequence& seq, const Vec& s,
            Order order);

// Apply one atom's generating function componentwise.
Vec apply_atom(const model::EnvAtom& atom, const Vec& s);

// P(|Z_n| > 0 | Z_0 = e_i) by exhaustive enumeration of all |atoms|^n
// environment sequences. Throws BudgetExceededError beyond the budget.
double exact_survival(const model::EnvDistribution& env, int i, int n,
                      int64_t budget = kDefaultEnumBudget);

// E[s^{Z_n} | Z_0 = e_i], same enumeration.
double exact_pgf(const model::EnvDistribution& env, int i, int n, const Vec& s,
                 int64_t budget = kDefaultEnumBudget);

// psi_{f,a}(s) = |a| / |a(1 - f(s))| - |a| / |a m (1 - s)| with the entrywise
// L1 matrix norm. Positive-homogeneous of degree zero in a.
double psi(const model::EnvAtom& atom, const Mat& a, const Vec& s);

struct PsiBoundCheck {
    double psi_value;
    double bound;  // gamma * p^2 * T of the atom
    bool pass;
};
PsiBoundCheck check_psi_bound(const model::EnvAtom& atom, const Mat& a, const Vec& s);

// Coordinates with s^j < 1 and the smallest gap 1 - s^j among them.
struct SupportGap {
    std::vector<int> active;
    double delta;
};
SupportGap support_gap(const Vec& s);

// Harmonic-mean identity for 1/(1 - F^i_{0,n}(s)): the reciprocal of the
// survival-type quantity equals the reciprocal mean-product term plus a sum
// of psi corrections along the composition.
struct IdentityCheck {
    double lhs;
    double rhs;
    double residual;  // |lhs - rhs| / lhs
};
IdentityCheck check_iteration_identity(const model::EnvDistribution& env,
                                       const EnvSequence& seq, int i, const Vec& s);

struct FkBounds {
    double lower;  // Delta(s) / (p^2 gamma^2)
    double ratio;  // |e_i L_{n,1} (1-s)| / |L_{n,1} e_i|
    double upper;  // gamma^2 p^2
    bool pass;
};
FkBounds fk_bounds(const model::EnvDistribution& env, const EnvSequence& seq, int i,
                   const Vec& s);

}  // namespace bpre::genfun

#endif
