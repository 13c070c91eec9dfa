#pragma once

#include <map>
#include <string>
#include <vector>

#include "stochorder/expr.hpp"
#include "stochorder/multi_index.hpp"
#include "stochorder/report.hpp"

namespace stochorder {

/// Coefficients of ½ Σ a_ij ∂_i∂_j f + Σ b_i ∂_i f − c f on R^d.
struct CoefficientField {
    int dim = 0;
    std::vector<std::vector<Expr>> a;  // symmetric d×d
    std::vector<Expr> b;
    Expr c;

    /// Multi-index coefficient g_γ for ‖γ‖₁ ≤ 2: g_{2e_i} = ½a_ii,
    /// g_{e_i+e_j} = a_ij (i ≠ j), g_{e_i} = b_i, g_0 = −c.
    [[nodiscard]] Expr g(const MultiIndex& gamma) const;
    /// Throws std::invalid_argument on shape errors or asymmetric a.
    void validate() const;
    static CoefficientField from_g(int dim, const std::map<MultiIndex, Expr>& g);
};

/// Axis-aligned box for quasi-random sampling.
struct SampleBox {
    std::vector<double> lower;
    std::vector<double> upper;
    int count = 200;
    static SampleBox cube(int dim, double lo, double hi, int count = 200);
};

/// Halton points in the box (bases 2, 3, 5, ...), deterministic.
std::vector<std::vector<double>> quasi_random_points(const SampleBox& box);

enum class ObligationStatus { proven_zero, sampled, numerically_zero_unproven, violated };
std::string to_string(ObligationStatus s);

struct Obligation {
    MultiIndex alpha;
    MultiIndex beta;
    MultiIndex gamma;
    std::string relation;  // ">= 0" or "== 0"
    Expr expression;       // ∂_{α−β} g_γ
    ObligationStatus status = ObligationStatus::sampled;
    double worst_value = 0.0;
    std::vector<double> witness;
    [[nodiscard]] nlohmann::json to_json() const;
};

enum class ZeroTestMode { symbolic_first, numeric_only };

struct ObligationLedger {
    VerificationReport report{"obligations"};
    std::vector<Obligation> obligations;
    [[nodiscard]] std::size_t violated() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

ObligationLedger check_gammabed(const CoefficientField& coeffs, const IndexSet& index_set, const SampleBox& box,
                                ZeroTestMode mode = ZeroTestMode::symbolic_first);

/// Coefficients g̃^{(α)}_ζ, ‖ζ‖₁ ≤ 2, of the operator acting on ∂_α f.
struct BAlphaField {
    MultiIndex alpha;
    std::map<MultiIndex, Expr> g;
    [[nodiscard]] CoefficientField as_field() const;
};

/// Requires alpha ∈ index_set.
BAlphaField build_B_alpha(const CoefficientField& coeffs, const MultiIndex& alpha, const IndexSet& index_set);
/// Any alpha with entries ≤ 2 and ‖α‖₁ ∈ {1,2}, e.g. (2) in one dimension.
BAlphaField build_B_alpha(const CoefficientField& coeffs, const MultiIndex& alpha);

ObligationLedger check_comparison_md(const CoefficientField& lower, const CoefficientField& middle,
                                     const CoefficientField& upper, const IndexSet& index_set, const SampleBox& box);

/// All multi-indices γ ∈ {0,1,2}^d with ‖γ‖₁ ≤ max_norm.
std::vector<MultiIndex> multi_indices_up_to(int dim, int max_norm);

}  // namespace stochorder
