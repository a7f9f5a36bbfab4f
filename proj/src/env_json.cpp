#include "bpre/env_json.hpp"

#include <fstream>

#include "bpre/errors.hpp"

namespace bpre::model {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw InputError(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw InputError(path + ": missing field \"" + key + "\"");
    return *it;
}

double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw InputError(path + ": expected a number");
    return j.get<double>();
}

OffspringLaw parse_law(const json& j, int p, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw InputError(path + ": expected a non-empty array of support entries");
    std::vector<OffspringLaw::Entry> entries;
    entries.reserve(j.size());
    for (size_t k = 0; k < j.size(); ++k) {
        const std::string epath = path + "[" + std::to_string(k) + "]";
        const json& zj = require_field(j[k], "z", epath);
        if (!zj.is_array() || static_cast<int>(zj.size()) != p)
            throw InputError(epath + ".z: expected " + std::to_string(p) + " coordinates");
        OffspringLaw::Entry e;
        e.z.reserve(zj.size());
        for (size_t c = 0; c < zj.size(); ++c) {
            const json& zc = zj[c];
            if (!zc.is_number_integer() || zc.get<int64_t>() < 0)
                throw InputError(epath + ".z[" + std::to_string(c) +
                                 "]: expected a nonnegative integer");
            e.z.push_back(zc.get<int64_t>());
        }
        e.prob = require_number(require_field(j[k], "p", epath), epath + ".p");
        entries.push_back(std::move(e));
    }
    try {
        return OffspringLaw(p, std::move(entries));
    } catch (const InputError& err) {
        throw InputError(path + ": " + err.what());
    }
}

}  // namespace

EnvDistribution env_from_json(const json& j) {
    const json& pj = require_field(j, "p", "$");
    if (!pj.is_number_integer() || pj.get<int>() < 1)
        throw InputError("$.p: expected a positive integer");
    const int p = pj.get<int>();

    const json& atoms_j = require_field(j, "atoms", "$");
    if (!atoms_j.is_array() || atoms_j.empty())
        throw InputError("$.atoms: expected a non-empty array");

    std::vector<EnvAtom> atoms;
    std::vector<double> weights;
    atoms.reserve(atoms_j.size());
    for (size_t a = 0; a < atoms_j.size(); ++a) {
        const std::string apath = "$.atoms[" + std::to_string(a) + "]";
        weights.push_back(require_number(require_field(atoms_j[a], "prob", apath),
                                         apath + ".prob"));
        const json& laws_j = require_field(atoms_j[a], "laws", apath);
        if (!laws_j.is_array() || static_cast<int>(laws_j.size()) != p)
            throw InputError(apath + ".laws: expected " + std::to_string(p) +
                             " offspring laws (one per parent type)");
        std::vector<OffspringLaw> laws;
        laws.reserve(laws_j.size());
        for (size_t t = 0; t < laws_j.size(); ++t)
            laws.push_back(parse_law(laws_j[t], p, apath + ".laws[" + std::to_string(t) + "]"));
        atoms.push_back(derive_moments(std::move(laws)));
    }
    try {
        return EnvDistribution(std::move(atoms), std::move(weights));
    } catch (const InputError& err) {
        throw InputError(std::string("$: ") + err.what());
    }
}

EnvDistribution load_env_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open environment file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw InputError(path + ": " + err.what());
    }
    return env_from_json(j);
}

nlohmann::ordered_json env_to_json(const EnvDistribution& env) {
    nlohmann::ordered_json out;
    out["p"] = env.p;
    auto& atoms = out["atoms"] = nlohmann::ordered_json::array();
    for (size_t a = 0; a < env.atoms.size(); ++a) {
        nlohmann::ordered_json aj;
        aj["prob"] = env.weights[a];
        auto& laws = aj["laws"] = nlohmann::ordered_json::array();
        for (const auto& law : env.atoms[a].laws) {
            nlohmann::ordered_json lj = nlohmann::ordered_json::array();
            for (const auto& e : law.support)
                lj.push_back(nlohmann::ordered_json{{"z", e.z}, {"p", e.prob}});
            laws.push_back(std::move(lj));
        }
        atoms.push_back(std::move(aj));
    }
    return out;
}

}  // namespace bpre::model
