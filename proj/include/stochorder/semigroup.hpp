#pragma once

#include <Eigen/SparseLU>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochorder/discretize.hpp"
#include "stochorder/grid_operator.hpp"
#include "stochorder/order.hpp"
#include "stochorder/report.hpp"

namespace stochorder {

/// Caches sparse LU factorizations of (I − λA) per λ.
class ResolventCache {
public:
    explicit ResolventCache(const GridOperator& op);

    /// f with (I − λA) f = g; throws std::runtime_error if singular.
    [[nodiscard]] Vector solve(double lambda, const Vector& g) const;
    [[nodiscard]] Eigen::Index size() const noexcept { return matrix_.rows(); }

private:
    using Factor = Eigen::SparseLU<Eigen::SparseMatrix<double>>;
    const Factor& factor(double lambda) const;

    Eigen::SparseMatrix<double> matrix_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::unique_ptr<Factor>> factors_;
};

Vector resolvent(const GridOperator& op, double lambda, const Vector& g);

/// e^{t A_n} f with A_n = n(R(1/n, A) − I), summed as a Poisson mixture of
/// resolvent powers.
Vector yosida_evolve(const GridOperator& op, double t, const Vector& f, int n);

/// e^{tA} f by uniformization, split into sub-steps with Λt ≤ 50 each.
Vector expm_apply(const GridOperator& op, double t, const Vector& f);
/// Row-vector action μ e^{tA}.
Vector expm_apply_transpose(const GridOperator& op, double t, const Vector& mu);

constexpr Eigen::Index expm_dimension_limit = 4096;

/// Raised when λ‖C‖‖R(λ,B)‖ ≥ 1, so the Neumann series for U_λ need not converge.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& message, double lambda0)
        : std::runtime_error(message), lambda0_(lambda0) {}
    [[nodiscard]] double lambda0() const noexcept { return lambda0_; }

private:
    double lambda0_;
};

class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// ‖C‖⁻¹ ‖R(λ,B)‖⁻¹ in the induced max-norm.
double lambda0_estimate(const GridOperator& B, const GridOperator& C, double lambda);

/// Σ_k (λ C R(λ,B))^k g.
Vector compute_U_lambda(const GridOperator& B, const GridOperator& C, double lambda, const Vector& g, int kmax = 10000);

VerificationReport verify_fundamental_bound(const GridOperator& A, const DiscreteIntertwiner& bc,
                                            const DiscreteOrderMap& phi, double lambda,
                                            std::span<const Vector> cone_samples);

enum class Verdict { certified, refuted, inconclusive };
std::string to_string(Verdict v);

struct CertifyOptions {
    std::vector<double> lambdas{0.01, 0.1, 1.0};
    std::vector<double> times{0.1, 1.0};
    int family_size = 20;
    std::uint64_t seed = 1;
    double tolerance = 1e-9;  // relative positivity tolerance
};

struct MonotonicityCertificate {
    std::string model_id;
    OrderSpec order;
    std::vector<double> lambdas;
    std::vector<double> times;
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
    VerificationReport report{"certify_monotonicity"};
    nlohmann::json witness;
    double semigroup_margin = 0.0;  // smallest Φ e^{tA} f entry over the spot checks
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Discrete part of the pipeline: intertwiner → C ≥ 0 → resolvent positivity
/// of B → fundamental bound on a cone family → semigroup spot checks.
MonotonicityCertificate certify_discrete(const GridOperator& generator, const DiscreteOrderMap& phi,
                                         const CertifyOptions& options, const std::string& model_id = {});

/// derive_BC admissibility followed by certify_discrete on build_generator.
MonotonicityCertificate certify_monotonicity(const DiffusionModel& model, OrderKind order, int intervals,
                                             const CertifyOptions& options,
                                             std::optional<double> truncation = {});

/// Φ e^{tA} f ≥ e^{tB} h entrywise. Throws std::invalid_argument unless Φf ≥ h ≥ 0.
VerificationReport verify_lower_bound(const GridOperator& A, const GridOperator& B, const DiscreteOrderMap& phi,
                                      const Vector& f, const Vector& h, double t, double tolerance = 1e-8);

struct ComparisonOptions {
    std::vector<double> times{0.1, 1.0};
    double tolerance = 1e-9;
    int start_states = 5;  // rows checked for law dominance
};

/// e^{tA1} f ≤ e^{tA} f ≤ e^{tA2} f for f in `family`, after checking
/// A2 − A = C²Φ and A − A1 = C¹Φ with C¹, C² ≥ 0.
VerificationReport verify_comparison(const GridOperator& A1, const GridOperator& A, const GridOperator& A2,
                                     const DiscreteOrderMap& phi, const TestFamily& family,
                                     const ComparisonOptions& options);

/// Empirical law at time t of the chain started at `start`. Paths run on
/// independent streams derived from (seed, path index).
Distribution simulate_ctmc(const GridOperator& op, std::size_t start, double t, std::uint64_t seed,
                           std::size_t paths);

double total_variation(const Distribution& p, const Distribution& q);

/// Row distribution e_start e^{tA} with the missing mass as killed.
Distribution semigroup_row(const GridOperator& op, std::size_t start, double t);

}  // namespace stochorder
