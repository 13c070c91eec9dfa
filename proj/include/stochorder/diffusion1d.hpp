#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochorder/expr.hpp"
#include "stochorder/order.hpp"
#include "stochorder/report.hpp"

namespace stochorder {

enum class Endpoint { left, right };
std::string to_string(Endpoint side);

enum class BoundaryKind { reflecting, sticky, elastic, absorbing, killing, trap, natural };
std::string to_string(BoundaryKind kind);
BoundaryKind boundary_kind_from_string(const std::string& name);

/// Raised when a boundary parameter lies outside the range allowed by the
/// drift sign at that endpoint.
class BoundaryRangeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Feller boundary condition at one endpoint. `parameter` is the atom m({e})
/// for sticky, k({e}) for elastic and γ for trap; unused otherwise.
struct FellerBoundary {
    BoundaryKind kind = BoundaryKind::reflecting;
    double parameter = 0.0;

    static FellerBoundary reflecting() { return {BoundaryKind::reflecting, 0.0}; }
    static FellerBoundary sticky(double mass) { return {BoundaryKind::sticky, mass}; }
    static FellerBoundary elastic(double rate) { return {BoundaryKind::elastic, rate}; }
    static FellerBoundary absorbing() { return {BoundaryKind::absorbing, 0.0}; }
    static FellerBoundary killing() { return {BoundaryKind::killing, 0.0}; }
    static FellerBoundary trap(double gamma) { return {BoundaryKind::trap, gamma}; }
    static FellerBoundary natural() { return {BoundaryKind::natural, 0.0}; }

    friend bool operator==(const FellerBoundary&, const FellerBoundary&) = default;
};

/// γ_e with γ_e f'(e) = f''(e) for the reflecting/sticky/absorbing family.
/// Sticky masses are measured with Λ(e) = 0. Returns ±inf for reflecting.
double kind_to_gamma(const FellerBoundary& bc, double a_e, double b_e, Endpoint side);

/// Inverse of kind_to_gamma. Right endpoints accept γ ∈ [−∞, −2b/a], left
/// endpoints γ ∈ [−2b/a, ∞]; anything else throws BoundaryRangeError.
FellerBoundary gamma_to_kind(double gamma, double a_e, double b_e, Endpoint side);

/// Generator ½a f'' + b f' − c f on the open interval (left, right), either
/// end possibly infinite, with a boundary condition per endpoint.
struct DiffusionModel {
    std::string name;
    double left = 0.0;
    double right = 1.0;
    Expr a = Expr::constant(1.0);
    Expr b;
    Expr c;
    FellerBoundary left_bc = FellerBoundary::reflecting();
    FellerBoundary right_bc = FellerBoundary::reflecting();

    [[nodiscard]] bool bounded() const { return std::isfinite(left) && std::isfinite(right); }
    [[nodiscard]] double endpoint(Endpoint side) const { return side == Endpoint::left ? left : right; }
    [[nodiscard]] const FellerBoundary& boundary(Endpoint side) const {
        return side == Endpoint::left ? left_bc : right_bc;
    }
    /// γ at a finite endpoint from its boundary condition.
    [[nodiscard]] double gamma(Endpoint side) const;
    /// Throws std::invalid_argument on inverted intervals or unparsable state.
    void validate() const;
};

/// Scale, speed and killing functions based at z, by adaptive Gauss–Kronrod
/// quadrature. Values of Λ are memoized on a coarse anchor table so repeated
/// queries cost one short integral; the memo is mutex-protected.
class ScaleSpeedKilling {
public:
    ScaleSpeedKilling(const DiffusionModel& model, double base);

    [[nodiscard]] double base() const noexcept { return base_; }
    [[nodiscard]] double Lambda(double x) const;
    [[nodiscard]] double scale_density(double x) const;   // e^{-Λ}
    [[nodiscard]] double speed_density(double x) const;   // 2e^{Λ}/a
    [[nodiscard]] double killing_density(double x) const; // 2c e^{Λ}/a
    [[nodiscard]] double s(double x) const;
    [[nodiscard]] double m(double x) const;
    [[nodiscard]] double k(double x) const;

private:
    double integrate(const std::function<double(double)>& f, double from, double to) const;

    Expr a_;
    Expr b_;
    Expr c_;
    double base_;
    mutable std::mutex memo_mutex_;
    mutable std::map<double, double> lambda_memo_;
};

/// Default base point: midpoint of a bounded interval, a unit inside a
/// half-line, 0 on the real line.
double default_base_point(const DiffusionModel& model);

enum class BoundaryClass { exit, entrance, regular, natural, undecided };
std::string to_string(BoundaryClass c);

enum class Finiteness { finite, infinite, undecided };
std::string to_string(Finiteness f);

/// Partial integrals of u or v on the geometric mesh towards the endpoint.
struct IntegralTrace {
    Finiteness verdict = Finiteness::undecided;
    std::vector<double> mesh;
    std::vector<double> partial_sums;
    double estimate = 0.0;  // extrapolated limit when finite
    std::string note;
};

struct BoundaryClassification {
    Endpoint side = Endpoint::left;
    double endpoint = 0.0;
    BoundaryClass kind = BoundaryClass::undecided;
    IntegralTrace u;
    IntegralTrace v;
    [[nodiscard]] nlohmann::json to_json() const;
};

BoundaryClassification classify_boundary(const DiffusionModel& model, Endpoint side);
BoundaryClassification classify_boundary(const DiffusionModel& model, Endpoint side, double base);

/// Operator ½a f'' + b f' − c f. B̃ operators are stored in this form, so a
/// zeroth-order term +q·f appears as c = −q.
struct DiffusionCoefficients {
    Expr a;
    Expr b;
    Expr c;
    [[nodiscard]] std::string to_string() const;
};

/// Boundary relation imposed on the domain of a B̃ operator.
struct BoundaryRelation {
    Endpoint side = Endpoint::left;
    std::string relation;  // "robin" (γ f = f'), "neumann" (f' = 0), "dirichlet" (f = 0)
    double gamma = 0.0;    // robin only
};

struct IntertwinerDerivation {
    OrderKind order = OrderKind::increasing;
    std::vector<DiffusionCoefficients> b_operators;   // one, or two for increasing_convex
    std::vector<std::vector<Expr>> c_operator;        // square, size of b_operators
    std::vector<std::vector<BoundaryRelation>> b_boundaries;
    VerificationReport admissibility{"derive_BC"};
    [[nodiscard]] bool admissible() const { return admissibility.passed(); }
};

/// Symbolic B̃ and C with Φ Ã f = B̃ Φ f + C Φ f for the 1-D orders.
IntertwinerDerivation derive_BC(const DiffusionModel& model, OrderKind order);

/// Estimated ellipticity, growth and killing bounds on the given samples,
/// plus symbolic twice-differentiability of a, b, c. When `samples` is empty,
/// a default sweep is used (uniform interior points, geometric approach to
/// finite endpoints, dyadic sweep towards infinite ones).
VerificationReport check_condition_proper(const DiffusionModel& model, const std::vector<double>& samples = {});

/// Φ Ã f − (B̃ + C) Φ f for f = x^k expanded symbolically, one residual
/// expression per component of Φ.
std::vector<Expr> intertwining_residual(const DiffusionModel& model, const IntertwinerDerivation& derivation,
                                        const Expr& f);

}  // namespace stochorder
