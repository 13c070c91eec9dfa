#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "stochorder/diffusion1d.hpp"
#include "stochorder/expr.hpp"

namespace stochorder {

/// Values on the uniform grid origin + i·step.
struct SampledFunction {
    double origin = 0.0;
    double step = 0.0;
    std::vector<double> values;
    std::optional<Expr> source;

    static SampledFunction sample(const std::function<double(double)>& f, double lo, double hi, double step);
    static SampledFunction sample(const Expr& f, double lo, double hi, double step);

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] double x(std::size_t i) const { return origin + static_cast<double>(i) * step; }
    [[nodiscard]] double last() const { return x(values.size() - 1); }
    /// Index of the grid point at x; throws if x is not (within 1e-6 steps) on the grid.
    [[nodiscard]] std::size_t index_of(double at) const;
    [[nodiscard]] double at(double where) const { return values[index_of(where)]; }
};

/// Discrete bump kernel exp(−1/(1−(u/δ)²)) on the grid, symmetric, weights summing to one.
struct Mollifier {
    int half_width = 0;           // weights cover offsets −half_width..half_width
    std::vector<double> weights;  // index k + half_width
    static Mollifier bump(double delta, double step);
};

/// k_{1/n} ∗ f. The result lives on the window shrunk by the kernel support.
SampledFunction mollify(const SampledFunction& f, int n);

enum class Interpolant { linear, average, zero, hat_prime, hat_doubleprime };
std::string to_string(Interpolant kind);

/// Replaces f near the endpoint e (and on the extension beyond e) by the
/// chosen interpolant over the window of width 1/n. For the right endpoint the
/// construction is mirrored; γ is the boundary parameter in γf′(e) = f″(e)
/// (hat_prime) or γf(e) = f′(e) (hat_doubleprime) in the original coordinate.
SampledFunction boundary_interp(const SampledFunction& f, int n, Interpolant kind, Endpoint side, double endpoint,
                                double gamma = 0.0);

enum class TVariant { T, T_prime, T_doubleprime, T_hat_prime, T_hat_doubleprime };
std::string to_string(TVariant v);

struct BoundarySpec {
    std::optional<double> left;
    std::optional<double> right;
    double gamma_left = 0.0;
    double gamma_right = 0.0;
};

/// Mollification after boundary interpolation at each finite endpoint.
SampledFunction apply_T(const SampledFunction& f, int n, TVariant variant, const BoundarySpec& boundary);

/// Derivative of the given order (1 or 2) at a grid point from a one-sided
/// fourth-order stencil looking into the interior (`side` = which endpoint).
double one_sided_derivative(const SampledFunction& f, double at, int order, Endpoint side);

/// (f_{i+1} − f_i)/step on the midpoints.
SampledFunction forward_difference(const SampledFunction& f);
/// (f_{i+1} − 2f_i + f_{i−1})/step² on interior points.
SampledFunction second_difference(const SampledFunction& f);

}  // namespace stochorder
