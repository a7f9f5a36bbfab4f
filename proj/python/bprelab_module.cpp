#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "bpre/env_json.hpp"
#include "bpre/errors.hpp"
#include "bpre/genfun.hpp"
#include "bpre/lab.hpp"
#include "bpre/matprod.hpp"
#include "bpre/model.hpp"
#include "bpre/simulate.hpp"
#include "bpre/spectral.hpp"
#include "bpre/tilt.hpp"

namespace py = pybind11;
using namespace bpre;

namespace {

Mat mat_from_rows(const std::vector<std::vector<double>>& rows) {
    const int n = static_cast<int>(rows.size());
    Mat m(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != n)
            throw InputError("matrix rows must form a square matrix");
        for (int j = 0; j < n; ++j) m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    return m;
}

std::vector<std::vector<double>> mat_rows(const Mat& m) {
    std::vector<std::vector<double>> rows(static_cast<size_t>(m.n));
    for (int i = 0; i < m.n; ++i) {
        rows[static_cast<size_t>(i)].resize(static_cast<size_t>(m.n));
        for (int j = 0; j < m.n; ++j) rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = m(i, j);
    }
    return rows;
}

model::OffspringLaw law_from_pairs(
    int p, const std::vector<std::pair<std::vector<int64_t>, double>>& entries) {
    std::vector<model::OffspringLaw::Entry> out;
    out.reserve(entries.size());
    for (const auto& [z, prob] : entries) out.push_back({z, prob});
    return model::OffspringLaw(p, std::move(out));
}

}  // namespace

PYBIND11_MODULE(bprelab, m) {
    m.doc() = "multitype branching processes in random environment: exact survival, "
              "spectral objects of the transfer operator, exponential tilting";

    py::register_exception<BudgetExceededError>(m, "BudgetExceededError");
    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

    py::class_<model::OffspringLaw>(m, "OffspringLaw")
        .def(py::init(&law_from_pairs), py::arg("p"), py::arg("support"),
             "support: list of (z tuple, probability)")
        .def_readonly("p", &model::OffspringLaw::p)
        .def("pgf", &model::OffspringLaw::pgf)
        .def("mean", &model::OffspringLaw::mean)
        .def("second_factorial", &model::OffspringLaw::second_factorial);

    py::class_<model::EnvAtom>(m, "EnvAtom")
        .def_property_readonly("mean_matrix",
                               [](const model::EnvAtom& a) { return mat_rows(a.mean_matrix); })
        .def_property_readonly("hessians",
                               [](const model::EnvAtom& a) {
                                   std::vector<std::vector<std::vector<double>>> out;
                                   for (const auto& b : a.hessians) out.push_back(mat_rows(b));
                                   return out;
                               })
        .def_readonly("t_value", &model::EnvAtom::t_value)
        .def_readonly("gamma", &model::EnvAtom::gamma);

    py::class_<model::EnvDistribution>(m, "EnvDistribution")
        .def(py::init([](std::vector<model::EnvAtom> atoms, std::vector<double> weights) {
                 return model::EnvDistribution(std::move(atoms), std::move(weights));
             }),
             py::arg("atoms"), py::arg("weights"))
        .def_readonly("p", &model::EnvDistribution::p)
        .def_readonly("weights", &model::EnvDistribution::weights)
        .def_property_readonly("atoms",
                               [](const model::EnvDistribution& e) { return e.atoms; })
        .def("global_gamma", &model::EnvDistribution::global_gamma);

    py::class_<model::ConditionReport>(m, "ConditionReport")
        .def_readonly("h0", &model::ConditionReport::h0)
        .def_readonly("h1", &model::ConditionReport::h1)
        .def_readonly("h2", &model::ConditionReport::h2)
        .def_readonly("h2_sufficient_only", &model::ConditionReport::h2_sufficient_only)
        .def_readonly("h3", &model::ConditionReport::h3)
        .def_readonly("gamma", &model::ConditionReport::gamma)
        .def_readonly("h4", &model::ConditionReport::h4)
        .def_readonly("h4_moment", &model::ConditionReport::h4_moment)
        .def_readonly("epsilon_used", &model::ConditionReport::epsilon_used)
        .def("all_pass", &model::ConditionReport::all_pass);

    m.def("derive_moments", &model::derive_moments, py::arg("laws"));
    m.def("pgf_eval", &model::pgf_eval, py::arg("law"), py::arg("s"));
    m.def("check_conditions", &model::check_conditions, py::arg("env"),
          py::arg("epsilon") = 0.5);
    m.def("load_env_file", &model::load_env_file, py::arg("path"));
    m.def(
        "env_from_json",
        [](const std::string& text) { return model::env_from_json(nlohmann::json::parse(text)); },
        py::arg("json_text"));

    // simulate
    m.def(
        "mc_survival",
        [](const model::EnvDistribution& env, int i, int n, int64_t reps, uint64_t seed) {
            const auto est = sim::mc_survival(env, i, n, reps, seed);
            return std::make_pair(est.estimate, est.std_error);
        },
        py::arg("env"), py::arg("i"), py::arg("n"), py::arg("reps"), py::arg("seed"));
    m.def(
        "conditional_empirical",
        [](const model::EnvDistribution& env, int i, int n, int64_t reps, uint64_t seed) {
            const auto emp = sim::conditional_empirical(env, i, n, reps, seed);
            py::dict pmf;
            for (const auto& [z, prob] : emp.pmf) pmf[py::tuple(py::cast(z))] = prob;
            return py::make_tuple(pmf, emp.survivors);
        },
        py::arg("env"), py::arg("i"), py::arg("n"), py::arg("reps"), py::arg("seed"));

    // genfun
    m.def(
        "compose",
        [](const model::EnvDistribution& env, const std::vector<int>& seq, const Vec& s,
           const std::string& order) {
            return genfun::compose(env, seq, s,
                                   order == "backward" ? genfun::Order::backward
                                                       : genfun::Order::forward);
        },
        py::arg("env"), py::arg("seq"), py::arg("s"), py::arg("order") = "forward");
    m.def("exact_survival", &genfun::exact_survival, py::arg("env"), py::arg("i"), py::arg("n"),
          py::arg("budget") = genfun::kDefaultEnumBudget);
    m.def("exact_pgf", &genfun::exact_pgf, py::arg("env"), py::arg("i"), py::arg("n"),
          py::arg("s"), py::arg("budget") = genfun::kDefaultEnumBudget);
    m.def(
        "psi",
        [](const model::EnvAtom& atom, const std::vector<std::vector<double>>& a, const Vec& s) {
            return genfun::psi(atom, mat_from_rows(a), s);
        },
        py::arg("atom"), py::arg("a"), py::arg("s"));
    m.def(
        "check_psi_bound",
        [](const model::EnvAtom& atom, const std::vector<std::vector<double>>& a, const Vec& s) {
            const auto res = genfun::check_psi_bound(atom, mat_from_rows(a), s);
            return py::make_tuple(res.psi_value, res.bound, res.pass);
        },
        py::arg("atom"), py::arg("a"), py::arg("s"));
    m.def(
        "check_iteration_identity",
        [](const model::EnvDistribution& env, const std::vector<int>& seq, int i, const Vec& s) {
            const auto res = genfun::check_iteration_identity(env, seq, i, s);
            return py::make_tuple(res.lhs, res.rhs, res.residual);
        },
        py::arg("env"), py::arg("seq"), py::arg("i"), py::arg("s"));
    m.def(
        "fk_bounds",
        [](const model::EnvDistribution& env, const std::vector<int>& seq, int i, const Vec& s) {
            const auto res = genfun::fk_bounds(env, seq, i, s);
            return py::make_tuple(res.lower, res.ratio, res.upper, res.pass);
        },
        py::arg("env"), py::arg("seq"), py::arg("i"), py::arg("s"));

    // matprod
    m.def(
        "hennion_decompose",
        [](const model::EnvDistribution& env, const std::vector<int>& seq) {
            const auto res = matprod::hennion_decompose(env, seq);
            return py::make_tuple(res.log_scale, res.v, res.u, res.residual);
        },
        py::arg("env"), py::arg("seq"));
    m.def(
        "left_product",
        [](const model::EnvDistribution& env, const std::vector<int>& seq) {
            const auto l = matprod::left_product_full(env, seq);
            return py::make_tuple(mat_rows(l.m), l.log_scale);
        },
        py::arg("env"), py::arg("seq"), "L_{n,1} = M_n ... M_1 as (matrix, log_scale)");

    // spectral
    py::class_<spectral::SpectralSolution>(m, "SpectralSolution")
        .def_readonly("theta", &spectral::SpectralSolution::theta)
        .def_readonly("lambda_", &spectral::SpectralSolution::lambda)
        .def_readonly("r_values", &spectral::SpectralSolution::r_values)
        .def_readonly("l_weights", &spectral::SpectralSolution::l_weights)
        .def_readonly("iterations", &spectral::SpectralSolution::iterations)
        .def_readonly("residual", &spectral::SpectralSolution::residual)
        .def_property_readonly(
            "nodes", [](const spectral::SpectralSolution& s) { return s.grid.nodes; })
        .def("r_at", &spectral::SpectralSolution::r_at);

    m.def("solve", &spectral::solve, py::arg("env"), py::arg("theta"),
          py::arg("grid_size") = 200, py::arg("tol") = 1e-12, py::arg("max_iter") = 50000);
    m.def(
        "lambda_subadditive_mc",
        [](const model::EnvDistribution& env, double theta, int n, int reps, uint64_t seed) {
            const auto est = spectral::lambda_subadditive_mc(env, theta, n, reps, seed);
            return std::make_pair(est.estimate, est.std_error);
        },
        py::arg("env"), py::arg("theta"), py::arg("n"), py::arg("reps"), py::arg("seed"));
    m.def("lambda_prime", &spectral::lambda_prime, py::arg("env"), py::arg("theta"),
          py::arg("h") = 1e-3, py::arg("grid_size") = 200);
    m.def(
        "subcriticality_check",
        [](const model::EnvDistribution& env, int grid_size) {
            const auto res = spectral::subcriticality_check(env, grid_size);
            return py::make_tuple(res.lambda1, res.lambda_prime1, res.strongly_subcritical);
        },
        py::arg("env"), py::arg("grid_size") = 200);

    // tilt
    py::class_<tilt::TiltedPath>(m, "TiltedPath")
        .def_readonly("atom_indices", &tilt::TiltedPath::atom_indices)
        .def_readonly("directions", &tilt::TiltedPath::directions)
        .def_readonly("log_density", &tilt::TiltedPath::log_density)
        .def_readonly("theta", &tilt::TiltedPath::theta);

    m.def("one_step_weight", &tilt::one_step_weight, py::arg("x"), py::arg("atom"),
          py::arg("spec"));
    m.def(
        "step_distribution",
        [](const Vec& x, const model::EnvDistribution& env, const spectral::SpectralSolution& s) {
            const auto dist = tilt::step_distribution(x, env, s);
            return std::make_pair(dist.probs, dist.raw_defect);
        },
        py::arg("x"), py::arg("env"), py::arg("spec"));
    m.def(
        "sample_path",
        [](const model::EnvDistribution& env, const spectral::SpectralSolution& spec, Vec x0,
           int n, uint64_t seed) {
            Rng rng(seed);
            return tilt::sample_path(env, spec, std::move(x0), n, rng);
        },
        py::arg("env"), py::arg("spec"), py::arg("x0"), py::arg("n"), py::arg("seed"));
    m.def("density", &tilt::density, py::arg("x0"), py::arg("env"), py::arg("seq"),
          py::arg("spec"));
    m.def("log_density", &tilt::log_density, py::arg("x0"), py::arg("env"), py::arg("seq"),
          py::arg("spec"));
    m.def("check_consistency", &tilt::check_consistency, py::arg("env"), py::arg("spec"),
          py::arg("n"), py::arg("budget") = genfun::kDefaultEnumBudget);
    m.def("check_total_mass", &tilt::check_total_mass, py::arg("env"), py::arg("spec"),
          py::arg("n"), py::arg("budget") = genfun::kDefaultEnumBudget);
    m.def(
        "is_survival",
        [](const model::EnvDistribution& env, const spectral::SpectralSolution& spec, int i,
           int n, int64_t reps, uint64_t seed, const std::optional<Vec>& s) {
            const auto est = s ? tilt::is_survival(env, spec, i, n, reps, seed, *s)
                               : tilt::is_survival(env, spec, i, n, reps, seed);
            return std::make_pair(est.estimate, est.std_error);
        },
        py::arg("env"), py::arg("spec"), py::arg("i"), py::arg("n"), py::arg("reps"),
        py::arg("seed"), py::arg("s") = std::nullopt);
    m.def(
        "phi_curve",
        [](const model::EnvDistribution& env, const spectral::SpectralSolution& spec, int i,
           const std::vector<int>& ns, int64_t reps, uint64_t seed, const Vec& s) {
            std::vector<std::tuple<int, double, double>> out;
            for (const auto& pt : tilt::phi_curve(env, spec, i, ns, reps, seed, s))
                out.emplace_back(pt.n, pt.phi, pt.std_error);
            return out;
        },
        py::arg("env"), py::arg("spec"), py::arg("i"), py::arg("ns"), py::arg("reps"),
        py::arg("seed"), py::arg("s"));
    m.def(
        "psi_series",
        [](const model::EnvDistribution& env, const spectral::SpectralSolution& spec, Vec x0,
           int k_max, uint64_t seed) {
            Rng rng(seed);
            const auto series = tilt::psi_series(env, spec, std::move(x0), k_max, rng);
            return std::make_pair(series.partial_sums, series.increments);
        },
        py::arg("env"), py::arg("spec"), py::arg("x0"), py::arg("k_max"), py::arg("seed"));

    // lab-level conveniences
    m.def(
        "run_check",
        [](const model::EnvDistribution& env, double epsilon, int grid) {
            return lab::check_json(lab::run_check(env, epsilon, grid)).dump();
        },
        py::arg("env"), py::arg("epsilon") = 0.5, py::arg("grid") = 200,
        "condition report + subcriticality as a JSON string");
    m.def(
        "survival_curve",
        [](const model::EnvDistribution& env, int i, int n_max, int64_t reps, uint64_t seed,
           int exact_max, int grid) {
            lab::SurvivalParams params;
            params.type_index = i;
            params.n_max = n_max;
            params.reps = reps;
            params.seed = seed;
            params.exact_max = exact_max;
            params.grid = grid;
            const auto curve = lab::survival_curve(env, params);
            std::vector<std::tuple<int, double, std::string, double, double>> rows;
            for (const auto& row : curve.rows)
                rows.emplace_back(row.n, row.p, row.method, row.std_error, row.ratio);
            return std::make_pair(rows, curve.lambda1);
        },
        py::arg("env"), py::arg("i"), py::arg("n_max"), py::arg("reps"), py::arg("seed"),
        py::arg("exact_max") = 10, py::arg("grid") = 200);
}
