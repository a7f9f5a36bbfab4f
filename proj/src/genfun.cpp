#include "bpre/genfun.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/parallel.hpp"

namespace bpre::genfun {

namespace {

void check_unit_box(const Vec& s, int p) {
    if (static_cast<int>(s.size()) != p)
        throw InputError("s has " + std::to_string(s.size()) + " coordinates, expected " +
                         std::to_string(p));
    for (double v : s)
        if (!(v >= 0.0) || v > 1.0) throw InputError("s must lie in [0,1]^p");
}

void check_type_index(int i, int p) {
    if (i < 0 || i >= p) throw InputError("type index out of range");
}

// |atoms|^n with overflow guard against the budget.
int64_t sequence_count(int atoms, int n, int64_t budget) {
    int64_t total = 1;
    for (int k = 0; k < n; ++k) {
        if (total > budget / atoms + 1) return budget + 1;
        total *= atoms;
    }
    return total;
}

// Decode the idx-th sequence in lexicographic order (first position most
// significant).
void decode_sequence(int64_t idx, int atoms, int n, EnvSequence& out) {
    for (int k = n - 1; k >= 0; --k) {
        out[static_cast<size_t>(k)] = static_cast<int>(idx % atoms);
        idx /= atoms;
    }
}

// E over all environment sequences of (1 - F^i_{0,n}(s)) or of F^i_{0,n}(s),
// sharded over fixed blocks and combined in block order.
double enumerate_mean(const model::EnvDistribution& env, int i, int n, const Vec& s,
                      bool survival_form, int64_t budget) {
    const int atoms = env.atom_count();
    const int64_t total = sequence_count(atoms, n, budget);
    if (total > budget)
        throw BudgetExceededError("enumeration over " + std::to_string(atoms) + "^" +
                                  std::to_string(n) +
                                  " sequences exceeds the budget; use the IS estimator");
    if (n == 0) {
        const double base = s[static_cast<size_t>(i)];
        return survival_form ? 1.0 - base : base;
    }

    std::vector<KahanSum> block_sums(kReplicaBlocks);
    for_each_block(total, kReplicaBlocks, [&](int b, int64_t begin, int64_t end) {
        EnvSequence seq(static_cast<size_t>(n));
        Vec y;
        for (int64_t idx = begin; idx < end; ++idx) {
            decode_sequence(idx, atoms, n, seq);
            double weight = 1.0;
            for (int k : seq) weight *= env.weights[static_cast<size_t>(k)];
            y = s;
            for (int k = n - 1; k >= 0; --k)
                y = apply_atom(env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k)])], y);
            const double v = y[static_cast<size_t>(i)];
            block_sums[static_cast<size_t>(b)].add(weight * (survival_form ? 1.0 - v : v));
        }
    });

    KahanSum out;
    for (const auto& bs : block_sums) out.add(bs.value());
    return out.value();
}

// a(1 - f(s)) and a m (1 - s) reduce to matrix * vector; the L1 norms below
// are over the resulting vectors, |a| over the matrix entries.
double psi_impl(const model::EnvAtom& atom, const Mat& a, const Vec& s, int p) {
    Vec fs(static_cast<size_t>(p));
    for (int k = 0; k < p; ++k) fs[static_cast<size_t>(k)] = atom.laws[static_cast<size_t>(k)].pgf(s);

    const double a_norm = l1_norm(a);
    const double num1 = l1_norm(mat_vec(a, one_minus(fs)));
    const double num2 = l1_norm(mat_vec(a, mat_vec(atom.mean_matrix, one_minus(s))));
    if (!(num1 > 0.0))
        throw DegenerateInputError("psi: |a (1 - f(s))| = 0");
    if (!(num2 > 0.0))
        throw DegenerateInputError("psi: |a m (1 - s)| = 0");

    const double value = a_norm / num1 - a_norm / num2;
    assert(value >= -1e-9 && "psi must be nonnegative (PGF convexity)");
    return value;
}

}  // namespace

Vec apply_atom(const model::EnvAtom& atom, const Vec& s) {
    const int p = atom.mean_matrix.n;
    Vec out(static_cast<size_t>(p));
    for (int k = 0; k < p; ++k) out[static_cast<size_t>(k)] = atom.laws[static_cast<size_t>(k)].pgf(s);
    return out;
}

Vec compose(const model::EnvDistribution& env, const EnvSequence& seq, const Vec& s,
            Order order) {
    check_unit_box(s, env.p);
    for (int idx : seq)
        if (idx < 0 || idx >= env.atom_count())
            throw InputError("compose: atom index " + std::to_string(idx) + " out of range");

    Vec y = s;
    const int n = static_cast<int>(seq.size());
    if (order == Order::forward) {
        for (int k = n - 1; k >= 0; --k)
            y = apply_atom(env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k)])], y);
    } else {
        for (int k = 0; k < n; ++k)
            y = apply_atom(env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k)])], y);
    }
    return y;
}

double exact_survival(const model::EnvDistribution& env, int i, int n, int64_t budget) {
    check_type_index(i, env.p);
    if (n < 0) throw InputError("exact_survival: n must be >= 0");
    Vec zero(static_cast<size_t>(env.p), 0.0);
    return enumerate_mean(env, i, n, zero, /*survival_form=*/true, budget);
}

double exact_pgf(const model::EnvDistribution& env, int i, int n, const Vec& s,
                 int64_t budget) {
    check_type_index(i, env.p);
    if (n < 0) throw InputError("exact_pgf: n must be >= 0");
    check_unit_box(s, env.p);
    return enumerate_mean(env, i, n, s, /*survival_form=*/false, budget);
}

double psi(const model::EnvAtom& atom, const Mat& a, const Vec& s) {
    const int p = atom.mean_matrix.n;
    check_unit_box(s, p);
    if (a.n != p) throw InputError("psi: matrix a has wrong dimension");
    if (!(l1_norm(a) > 0.0)) throw DegenerateInputError("psi: a = 0");
    bool below_one = false;
    for (double v : s)
        if (v < 1.0) below_one = true;
    if (!below_one) throw DomainError("psi: undefined at s = 1 (clamp the caller's s)");
    return psi_impl(atom, a, s, p);
}

PsiBoundCheck check_psi_bound(const model::EnvAtom& atom, const Mat& a, const Vec& s) {
    const double value = psi(atom, a, s);
    const int p = atom.mean_matrix.n;
    const double bound = atom.gamma * p * p * atom.t_value;
    const bool pass = value >= 0.0 && value <= bound + 1e-12;
    return {value, bound, pass};
}

SupportGap support_gap(const Vec& s) {
    SupportGap gap;
    gap.delta = 1.0;
    for (size_t j = 0; j < s.size(); ++j) {
        if (s[j] < 1.0) {
            gap.active.push_back(static_cast<int>(j));
            gap.delta = std::min(gap.delta, 1.0 - s[j]);
        }
    }
    if (gap.active.empty()) throw DomainError("support_gap: undefined at s = 1");
    return gap;
}

IdentityCheck check_iteration_identity(const model::EnvDistribution& env,
                                       const EnvSequence& seq, int i, const Vec& s) {
    check_type_index(i, env.p);
    check_unit_box(s, env.p);
    support_gap(s);  // rejects s = 1
    const int n = static_cast<int>(seq.size());
    const int p = env.p;

    // suffix compositions: tail[k] = F_{k,n}(s), tail[n] = s
    std::vector<Vec> tail(static_cast<size_t>(n) + 1);
    tail[static_cast<size_t>(n)] = s;
    for (int k = n; k >= 1; --k)
        tail[static_cast<size_t>(k - 1)] = apply_atom(
            env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k - 1)])],
            tail[static_cast<size_t>(k)]);

    const double fi = tail[0][static_cast<size_t>(i)];
    if (!(fi < 1.0))
        throw DegenerateInputError("iteration identity: 1 - F^i_{0,n}(s) = 0");
    const double lhs = 1.0 / (1.0 - fi);

    const matprod::MatrixPath path = matprod::products(env, seq);

    // leading term 1/|a_i R_n (1 - s)|: only row i of R_n contributes
    const Vec rn_one_minus_s = mat_vec(path.right[static_cast<size_t>(n)].m, one_minus(s));
    const double lead_raw = rn_one_minus_s[static_cast<size_t>(i)];
    if (!(lead_raw > 0.0))
        throw DegenerateInputError("iteration identity: |a_i R_n (1 - s)| = 0");
    double rhs =
        std::exp(-(std::log(lead_raw) + path.right[static_cast<size_t>(n)].log_scale));

    // psi corrections: term k carries the prefactor 1/|a_i R_{k-1}| that the
    // telescoping produces (psi itself is scale-free in a)
    for (int k = 1; k <= n; ++k) {
        const matprod::ScaledMat& r_prev = path.right[static_cast<size_t>(k - 1)];
        Mat a(p);
        for (int j = 0; j < p; ++j) a(i, j) = r_prev.m(i, j);
        const double row_l1 = l1_norm(a);
        if (!(row_l1 > 0.0))
            throw DegenerateInputError("iteration identity: |a_i R_" + std::to_string(k - 1) +
                                       "| = 0 at k = " + std::to_string(k));
        double term;
        try {
            term = psi_impl(env.atoms[static_cast<size_t>(seq[static_cast<size_t>(k - 1)])], a,
                            tail[static_cast<size_t>(k)], p);
        } catch (const DegenerateInputError& err) {
            throw DegenerateInputError(std::string(err.what()) + " at k = " + std::to_string(k));
        }
        rhs += std::exp(-(std::log(row_l1) + r_prev.log_scale)) * term;
    }

    return {lhs, rhs, std::abs(lhs - rhs) / lhs};
}

FkBounds fk_bounds(const model::EnvDistribution& env, const EnvSequence& seq, int i,
                   const Vec& s) {
    check_type_index(i, env.p);
    check_unit_box(s, env.p);
    const double gamma = env.global_gamma();
    if (!std::isfinite(gamma))
        throw NotApplicableError("fk_bounds: gamma is infinite (H3 fails)");
    const SupportGap gap = support_gap(s);
    const int p = env.p;

    const matprod::ScaledMat l = matprod::left_product_full(env, seq);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < p; ++j) {
        num += l.m(i, j) * (1.0 - s[static_cast<size_t>(j)]);
        den += l.m(j, i);
    }
    if (!(den > 0.0)) throw NotApplicableError("fk_bounds: |L e_i| = 0");

    FkBounds out;
    out.lower = gap.delta / (p * p * gamma * gamma);
    out.ratio = num / den;
    out.upper = gamma * gamma * p * p;
    out.pass = out.ratio >= out.lower - 1e-12 && out.ratio <= out.upper + 1e-12;
    return out;
}

}  // namespace bpre::genfun
