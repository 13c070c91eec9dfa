#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochorder/model_file.hpp"
#include "stochorder/semigroup.hpp"

namespace stochorder {

/// One CSV row of `t,quantity,value`.
struct CurvePoint {
    double t = 0.0;
    std::string quantity;
    double value = 0.0;
};

/// Header plus rows, numbers printed with 17 significant digits.
std::string curves_csv(const std::vector<CurvePoint>& rows);

/// 0 certified, 1 refuted, 3 inconclusive (2 is reserved for input errors).
int exit_code(Verdict verdict);

struct PipelineResult {
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
    nlohmann::json report;          // full JSON report including the input hash
    std::vector<CurvePoint> curves; // filled on request or by simulate
};

nlohmann::json derivation_json(const IntertwinerDerivation& derivation);

/// True when a(e) vanishes at a finite endpoint (e.g. Wright–Fisher).
bool degenerate_at_boundary(const DiffusionModel& model);

/// Gammabed ledger plus, for d ≤ 2, the discrete certificate on a tensor grid.
struct MultiDCertificate {
    ObligationLedger ledger;
    std::optional<MonotonicityCertificate> discrete;
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
    [[nodiscard]] nlohmann::json to_json() const;
};

TensorGrid tensor_grid_for(const SampleBox& box, const std::vector<int>& points_per_axis);

MultiDCertificate certify_monotonicity_md(const CoefficientField& coeffs, const IndexSet& index_set,
                                          const SampleBox& box, const std::vector<int>& points_per_axis,
                                          const CertifyOptions& options, const std::string& model_id = {});

struct SpinCertificate {
    VerificationReport attractive;
    double intertwining_residual = 0.0;
    RateConstants constants;
    VerificationReport preservation;
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
    [[nodiscard]] nlohmann::json to_json() const;
};

SpinCertificate certify_spin_system(const SpinSystem& sys, const PreservationOptions& options);

CertifyOptions certify_options(const NumericSettings& numeric);

PipelineResult run_classify(const ModelFile& model);

struct CheckSettings {
    std::optional<OrderSpec> order;  // overrides the model file's order
    bool curves = false;
};
PipelineResult run_check(const ModelFile& model, const CheckSettings& settings);

/// lower ≤ middle ≤ upper in the generator sense for the chosen order.
PipelineResult run_compare(const ModelFile& lower, const ModelFile& middle, const ModelFile& upper,
                           std::optional<OrderSpec> order);

struct SimulateSettings {
    std::optional<double> t;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
};
/// Empirical statistics plus the matrix-semigroup values when the state space allows.
PipelineResult run_simulate(const ModelFile& model, const SimulateSettings& settings);

}  // namespace stochorder
