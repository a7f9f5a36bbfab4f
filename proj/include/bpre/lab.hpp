#ifndef BPRE_LAB_HPP
#define BPRE_LAB_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpre/model.hpp"
#include "bpre/spectral.hpp"
#include "bpre/tilt.hpp"

namespace bpre::lab {

// deterministic shortest-round-trip formatting used by every CSV/JSON writer
std::string fmt_double(double v);

struct CheckResult {
    model::ConditionReport report;
    std::optional<spectral::Subcriticality> sub;  // absent when solve not applicable
    std::string sub_note;
    bool pass = false;
};
CheckResult run_check(const model::EnvDistribution& env, double epsilon = 0.5,
                      int grid = 200);
nlohmann::ordered_json check_json(const CheckResult& res);

struct SurvivalParams {
    int type_index = 0;
    int n_max = 40;
    int64_t reps = 100000;
    uint64_t seed = 0;
    int exact_max = 10;
    int grid = 200;
    int64_t budget = genfun::kDefaultEnumBudget;
};

struct SurvivalRow {
    int n;
    double p;
    std::string method;  // "exact" or "is"
    double std_error;    // 0 for exact rows
    double ratio;        // p / lambda^n
    double log_excess;   // log p - n log lambda
};

struct SurvivalCurve {
    std::vector<SurvivalRow> rows;  // exact rows first, then IS rows; n increasing per method
    double lambda1 = 0.0;
    SurvivalParams params;
};

SurvivalCurve survival_curve(const model::EnvDistribution& env, const SurvivalParams& params);
std::string survival_csv(const SurvivalCurve& curve);

struct FitResult {
    double c;
    double std_error;
    int window;
};
// Average of p / lambda^n over the last `window` IS rows.
FitResult fit_c(const SurvivalCurve& curve, int window);

struct PhiParams {
    int type_index = 0;
    std::vector<Vec> s_list;        // defaults to 0.5 * ones
    std::vector<int> schedule;      // defaults to {2, 5, 10, ..., 40}
    int64_t reps = 100000;
    uint64_t seed = 0;
    int exact_max = 10;
    int empirical_max = 4;          // simulate-based cross-check horizon
    int64_t empirical_reps = 100000;
    int grid = 200;
    int64_t budget = genfun::kDefaultEnumBudget;
};

struct PhiRow {
    Vec s;
    int n;
    std::string method;  // "exact", "is", "empirical"
    double phi;
    double std_error;
};

std::vector<PhiRow> phi_table(const model::EnvDistribution& env, const PhiParams& params);
std::string phi_csv(const std::vector<PhiRow>& rows, const PhiParams& params, double lambda1);

struct TiltSampleParams {
    int type_index = 0;
    double theta = 1.0;
    int n = 50;
    int64_t reps = 1;
    uint64_t seed = 0;
    int grid = 200;
};
std::string tilt_sample_csv(const model::EnvDistribution& env, const TiltSampleParams& params);

struct DiagnosticsParams {
    uint64_t seed = 0;
    int grid = 200;
    int identity_sweeps = 100;
    int psi_sweeps = 10000;
    int fk_sweeps = 10000;
    int mass_n_max = 5;
    int lyapunov_n = 200;
    int lyapunov_reps = 1000;
    int64_t is_reps = 10000;
    int psi_series_k = 100;
    double epsilon = 0.5;
};
nlohmann::ordered_json run_diagnostics(const model::EnvDistribution& env,
                                       const DiagnosticsParams& params);

}  // namespace bpre::lab

#endif
