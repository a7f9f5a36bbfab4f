#include "bpre/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bpre/errors.hpp"

namespace bpre::model {

namespace {

constexpr double kProbTol = 1e-12;

std::string vec_to_string(const std::vector<int64_t>& z) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < z.size(); ++i) os << (i ? "," : "") << z[i];
    os << ")";
    return os.str();
}

}  // namespace

OffspringLaw::OffspringLaw(int p_, std::vector<Entry> entries)
    : p(p_), support(std::move(entries)) {
    if (p <= 0) throw InputError("offspring law: number of types must be positive");
    if (support.empty()) throw InputError("offspring law: empty support");

    double total = 0.0;
    std::set<std::vector<int64_t>> seen;
    for (const auto& e : support) {
        if (static_cast<int>(e.z.size()) != p)
            throw InputError("offspring law: point " + vec_to_string(e.z) + " has " +
                             std::to_string(e.z.size()) + " coordinates, expected " +
                             std::to_string(p));
        for (int64_t c : e.z)
            if (c < 0)
                throw InputError("offspring law: negative coordinate in " + vec_to_string(e.z));
        if (!(e.prob > 0.0) || e.prob > 1.0)
            throw InputError("offspring law: probability of " + vec_to_string(e.z) +
                             " must lie in (0,1]");
        if (!seen.insert(e.z).second)
            throw InputError("offspring law: duplicate support point " + vec_to_string(e.z));
        total += e.prob;
    }
    if (std::abs(total - 1.0) > kProbTol)
        throw InputError("offspring law: probabilities sum to " + std::to_string(total) +
                         ", not 1");

    cumulative.reserve(support.size());
    double acc = 0.0;
    for (const auto& e : support) {
        acc += e.prob / total;
        cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;
}

double OffspringLaw::pgf(const Vec& s) const {
    if (static_cast<int>(s.size()) != p)
        throw InputError("pgf: argument has " + std::to_string(s.size()) +
                         " coordinates, expected " + std::to_string(p));
    double out = 0.0;
    for (const auto& e : support) {
        double term = e.prob;
        for (int j = 0; j < p; ++j) {
            const int64_t k = e.z[static_cast<size_t>(j)];
            if (k == 0) continue;  // 0^0 = 1
            const double sj = s[static_cast<size_t>(j)];
            if (k == 1)
                term *= sj;
            else if (k == 2)
                term *= sj * sj;
            else
                term *= std::pow(sj, static_cast<double>(k));
        }
        out += term;
    }
    return out;
}

double OffspringLaw::mean(int j) const {
    double m = 0.0;
    for (const auto& e : support) m += e.prob * static_cast<double>(e.z[static_cast<size_t>(j)]);
    return m;
}

double OffspringLaw::second_factorial(int i, int j) const {
    double b = 0.0;
    for (const auto& e : support) {
        const double zi = static_cast<double>(e.z[static_cast<size_t>(i)]);
        const double zj = static_cast<double>(e.z[static_cast<size_t>(j)]);
        b += e.prob * (i == j ? zi * (zi - 1.0) : zi * zj);
    }
    return b;
}

double pgf_eval(const OffspringLaw& law, const Vec& s) { return law.pgf(s); }

EnvAtom derive_moments(std::vector<OffspringLaw> laws) {
    if (laws.empty()) throw InputError("derive_moments: no offspring laws given");
    const int p = laws.front().p;
    if (static_cast<int>(laws.size()) != p)
        throw InputError("derive_moments: expected one law per type (" + std::to_string(p) +
                         "), got " + std::to_string(laws.size()));
    for (const auto& l : laws)
        if (l.p != p) throw InputError("derive_moments: laws disagree on the number of types");

    EnvAtom atom;
    atom.mean_matrix = Mat(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            atom.mean_matrix(i, j) = laws[static_cast<size_t>(i)].mean(j);

    atom.hessians.reserve(static_cast<size_t>(p));
    double hess_norm_sum = 0.0;
    for (int k = 0; k < p; ++k) {
        Mat b(p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                b(i, j) = laws[static_cast<size_t>(k)].second_factorial(i, j);
        hess_norm_sum += op_norm(b);
        atom.hessians.push_back(std::move(b));
    }

    const double mn = op_norm(atom.mean_matrix);
    atom.t_value = mn > 0.0 ? hess_norm_sum / (mn * mn) : 0.0;
    atom.gamma = entry_ratio(atom.mean_matrix);
    atom.laws = std::move(laws);
    return atom;
}

EnvDistribution::EnvDistribution(std::vector<EnvAtom> atoms_, std::vector<double> weights_)
    : atoms(std::move(atoms_)), weights(std::move(weights_)) {
    if (atoms.empty()) throw InputError("environment: no atoms");
    if (atoms.size() != weights.size())
        throw InputError("environment: atom/weight count mismatch");
    p = atoms.front().mean_matrix.n;
    double total = 0.0;
    for (size_t e = 0; e < atoms.size(); ++e) {
        if (atoms[e].mean_matrix.n != p)
            throw InputError("environment: atoms[" + std::to_string(e) +
                             "] has a different number of types");
        if (!(weights[e] > 0.0))
            throw InputError("environment: atoms[" + std::to_string(e) +
                             "].prob must be positive");
        total += weights[e];
    }
    if (std::abs(total - 1.0) > kProbTol)
        throw InputError("environment: atom probabilities sum to " + std::to_string(total) +
                         ", not 1");
    cumulative.reserve(atoms.size());
    double acc = 0.0;
    for (double w : weights) {
        acc += w / total;
        cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;
}

double EnvDistribution::global_gamma() const {
    double g = 1.0;
    for (const auto& atom : atoms) g = std::max(g, atom.gamma);
    return g;
}

ConditionReport check_conditions(const EnvDistribution& env, double epsilon) {
    if (!(epsilon > 0.0)) throw InputError("check_conditions: epsilon must be positive");
    ConditionReport rep;
    rep.epsilon_used = epsilon;

    rep.h0 = true;
    for (const auto& atom : env.atoms)
        if (!(op_norm(atom.mean_matrix) > 0.0)) rep.h0 = false;

    // Finite support: E[||M||^theta] is a finite sum for every theta > 0.
    rep.h1 = true;
    rep.h1_note = "finite environment support: Theta = (0, inf)";

    rep.h2 = true;
    rep.h2_sufficient_only = true;
    for (const auto& atom : env.atoms)
        if (!(min_entry(atom.mean_matrix) > 0.0)) rep.h2 = false;

    rep.gamma = env.global_gamma();
    rep.h3 = std::isfinite(rep.gamma);

    rep.h4 = true;
    double moment = 0.0;
    for (size_t e = 0; e < env.atoms.size(); ++e) {
        const double t = env.atoms[e].t_value;
        if (!(t > 0.0)) {
            rep.h4 = false;
            rep.h4_note = "atoms[" + std::to_string(e) + "] has T = 0 (|log T| diverges)";
            continue;
        }
        moment += env.weights[e] * op_norm(env.atoms[e].mean_matrix) *
                  std::pow(std::abs(std::log(t)), 1.0 + epsilon);
    }
    if (rep.h4) {
        rep.h4_moment = moment;
        rep.h4_note = "E[||M|| |log T|^(1+eps)] finite";
    }
    return rep;
}

}  // namespace bpre::model
