#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stochorder/discretize.hpp"
#include "stochorder/grid_operator.hpp"
#include "stochorder/report.hpp"

namespace stochorder {

using SpinConfig = std::vector<std::uint8_t>;

enum class SpinRule { contact, voter, anti_voter, glauber, independent, custom };
std::string to_string(SpinRule rule);
SpinRule spin_rule_from_string(const std::string& name);

struct SpinParameters {
    double infection = 1.0;  // contact: λ per infected neighbour; recovery rate 1
    double beta = 0.0;       // glauber inverse temperature
    double up = 1.0;         // independent: 0 → 1 rate
    double down = 1.0;       // independent: 1 → 0 rate
};

/// Finite spin system on {0,1}^n with single-site flip rates c(i, σ).
class SpinSystem {
public:
    using Parameters = SpinParameters;

    SpinSystem(int sites, std::vector<std::pair<int, int>> edges, SpinRule rule, Parameters params = {});
    /// Custom rates: table[i][mask] = c(i, σ) with bit j of mask = σ_j (n ≤ 12).
    static SpinSystem custom(int sites, std::vector<std::vector<double>> table);
    static SpinSystem path(int sites, SpinRule rule, Parameters params = {});
    static SpinSystem cycle(int sites, SpinRule rule, Parameters params = {});

    [[nodiscard]] int sites() const noexcept { return sites_; }
    [[nodiscard]] SpinRule rule() const noexcept { return rule_; }
    [[nodiscard]] const Parameters& parameters() const noexcept { return params_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
    [[nodiscard]] const std::vector<int>& neighbours(int site) const;
    /// Sites whose spin can change c(site, ·), including `site` itself.
    [[nodiscard]] std::vector<int> dependency(int site) const;

    [[nodiscard]] double rate(int site, const SpinConfig& sigma) const;
    [[nodiscard]] double rate(int site, std::uint64_t mask) const;

private:
    template <class Spin>
    double rate_impl(int site, Spin&& spin) const;

    int sites_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adjacency_;
    SpinRule rule_ = SpinRule::independent;
    Parameters params_;
    std::vector<std::vector<double>> table_;
};

struct RateConstants {
    std::vector<double> max_rate;                    // c(i)
    std::vector<std::map<int, double>> dependence;  // c_u(i) for u ≠ i
    double spread = 0.0;                             // M = sup_x Σ_{u≠x} c_u(x)
    [[nodiscard]] nlohmann::json to_json() const;
};

RateConstants rate_constants(const SpinSystem& sys);

VerificationReport check_attractive(const SpinSystem& sys);

/// A on 2^n states; Φ, B, C on 2^n·n rows indexed σ·n + x.
struct IPSMatrices {
    GridOperator A;
    GridOperator phi;
    GridOperator B;
    GridOperator C;
};

constexpr int ips_matrix_site_limit = 12;

IPSMatrices build_matrices(const SpinSystem& sys);

/// max |ΦA − (B+C)Φ| computed in exact rational arithmetic from the stored
/// double entries (zero means the identity holds exactly).
double exact_intertwining_residual(const IPSMatrices& m);

/// Φ with its right inverse; the pseudo-inverse is only materialised for n ≤ 8.
DiscreteOrderMap spin_order_map(const SpinSystem& sys, const IPSMatrices& m);

enum class PreservationMode { exhaustive, randomized };

struct PreservationOptions {
    std::vector<double> times{0.1, 1.0, 5.0};
    PreservationMode mode = PreservationMode::exhaustive;
    int random_functions = 50;
    std::uint64_t seed = 1;
    double tolerance = 1e-10;
};

/// e^{tA} f stays monotone for every test f (covering-pair scan).
VerificationReport verify_monotone_preservation(const SpinSystem& sys, const PreservationOptions& options);

/// Φ e^{tA} f ≥ e^{tB} h − tolerance. Throws std::invalid_argument unless Φf ≥ h ≥ 0.
VerificationReport verify_ips_lower_bound(const SpinSystem& sys, const Vector& f, const Vector& h, double t,
                                          double tolerance = 1e-10);

/// |||f||| = Σ_x δ_f(x) for f on {0,1}^n.
double triple_norm(const Vector& f, int sites);

/// |||e^{tA} f||| ≤ e^{tM} |||f||| + 1e-9 on the given functions.
VerificationReport verify_triple_norm_growth(const SpinSystem& sys, const std::vector<Vector>& functions,
                                             const std::vector<double>& times);

/// max over terms of weight·min_{i∈T} σ_i; monotone by construction.
struct MonotoneFunction {
    std::vector<std::vector<int>> terms;
    std::vector<double> weights;
    [[nodiscard]] double operator()(const SpinConfig& sigma) const;
};

struct GillespieStats {
    std::size_t paths = 0;
    std::vector<double> marginal_mean;
    std::vector<double> marginal_stderr;
    std::vector<double> function_mean;
    std::vector<double> function_stderr;
};

/// Event-driven simulation with a Fenwick tree over site rates; path p uses
/// the stream seeded by (seed, p).
GillespieStats gillespie(const SpinSystem& sys, const SpinConfig& start, double t, std::uint64_t seed,
                         std::size_t paths, const std::vector<MonotoneFunction>& functions = {});

std::uint64_t config_to_mask(const SpinConfig& sigma);
SpinConfig mask_to_config(std::uint64_t mask, int sites);

}  // namespace stochorder
