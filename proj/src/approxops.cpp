#include "stochorder/approxops.hpp"

#include <cmath>
#include <stdexcept>

namespace stochorder {

namespace {

constexpr double kAlign = 1e-6;  // tolerance, in grid steps, for points that must sit on the grid

/// Offset of `where` from the grid in units of step, split into integer and fractional part.
std::pair<long, double> locate(const SampledFunction& f, double where) {
    double units = (where - f.origin) / f.step;
    double whole = std::floor(units + kAlign);
    return {static_cast<long>(whole), units - whole};
}

void check_grid(const SampledFunction& f) {
    if (!(f.step > 0.0) || f.values.empty()) throw std::invalid_argument("sampled function needs a positive step");
}

}  // namespace

SampledFunction SampledFunction::sample(const std::function<double(double)>& f, double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw std::invalid_argument("sampling window must be non-empty with positive step");
    SampledFunction out;
    out.origin = lo;
    out.step = step;
    auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + kAlign)) + 1;
    out.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.values[i] = f(out.x(i));
        if (!std::isfinite(out.values[i])) throw std::invalid_argument("sampled function has a non-finite value");
    }
    return out;
}

SampledFunction SampledFunction::sample(const Expr& f, double lo, double hi, double step) {
    auto out = sample([&f](double x) { return f.evaluate(x); }, lo, hi, step);
    out.source = f;
    return out;
}

std::size_t SampledFunction::index_of(double where) const {
    check_grid(*this);
    auto [whole, frac] = locate(*this, where);
    if (std::abs(frac) > kAlign || whole < 0 || static_cast<std::size_t>(whole) >= values.size())
        throw std::invalid_argument("point is not on the sample grid");
    return static_cast<std::size_t>(whole);
}

Mollifier Mollifier::bump(double delta, double step) {
    if (!(delta > 0.0) || !(step > 0.0)) throw std::invalid_argument("mollifier needs positive width and step");
    Mollifier out;
    // Largest k with k·step < δ; the kernel vanishes at |u| = δ.
    out.half_width = static_cast<int>(std::ceil(delta / step - kAlign)) - 1;
    out.half_width = std::max(out.half_width, 0);
    const int m = out.half_width;
    out.weights.assign(static_cast<std::size_t>(2 * m + 1), 0.0);
    double total = 0.0;
    for (int k = 0; k <= m; ++k) {
        double u = k * step / delta;
        double w = std::exp(-1.0 / (1.0 - u * u));
        out.weights[static_cast<std::size_t>(m + k)] = w;
        out.weights[static_cast<std::size_t>(m - k)] = w;
        total += k == 0 ? w : 2.0 * w;
    }
    for (double& w : out.weights) w /= total;
    return out;
}

SampledFunction mollify(const SampledFunction& f, int n) {
    check_grid(f);
    if (n < 1) throw std::invalid_argument("mollifier index must be positive");
    auto kernel = Mollifier::bump(1.0 / n, f.step);
    const auto m = static_cast<std::size_t>(kernel.half_width);
    if (f.size() <= 2 * m) throw std::invalid_argument("sample window is too small for the mollifier support");
    SampledFunction out;
    out.origin = f.x(m);
    out.step = f.step;
    out.values.resize(f.size() - 2 * m);
    const double* w = kernel.weights.data() + m;
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        const std::size_t centre = j + m;
        // Pairing ±k keeps odd moments cancelling exactly.
        double acc = w[0] * f.values[centre];
        for (std::size_t k = 1; k <= m; ++k) acc += w[k] * (f.values[centre - k] + f.values[centre + k]);
        out.values[j] = acc;
    }
    return out;
}

std::string to_string(Interpolant kind) {
    switch (kind) {
    case Interpolant::linear: return "linear";
    case Interpolant::average: return "average";
    case Interpolant::zero: return "zero";
    case Interpolant::hat_prime: return "hat_prime";
    case Interpolant::hat_doubleprime: return "hat_doubleprime";
    }
    return "unknown";
}

std::string to_string(TVariant v) {
    switch (v) {
    case TVariant::T: return "T";
    case TVariant::T_prime: return "T'";
    case TVariant::T_doubleprime: return "T''";
    case TVariant::T_hat_prime: return "That'";
    case TVariant::T_hat_doubleprime: return "That''";
    }
    return "unknown";
}

SampledFunction boundary_interp(const SampledFunction& f, int n, Interpolant kind, Endpoint side, double endpoint,
                                double gamma) {
    check_grid(f);
    if (n < 1) throw std::invalid_argument("interpolation index must be positive");
    const double width = 1.0 / n;
    const double per_window = width / f.step;
    if (per_window < 20.0 - kAlign)
        throw std::invalid_argument("1/n is below the grid resolution (need at least 20 samples per window)");
    if (std::abs(per_window - std::round(per_window)) > kAlign)
        throw std::invalid_argument("the window 1/n must be a whole number of grid steps");
    const auto span = static_cast<long>(std::round(per_window));

    // Work in the coordinate u = distance from the endpoint into the domain.
    const double dir = side == Endpoint::left ? 1.0 : -1.0;
    const double g = dir * gamma;  // γ transforms with the reflection x ↦ −x
    auto [whole, frac] = locate(f, endpoint);
    const bool midpoints = std::abs(frac - 0.5) <= kAlign;
    if (!midpoints && std::abs(frac) > kAlign && std::abs(frac - 1.0) > kAlign)
        throw std::invalid_argument("endpoint must be a grid point or a midpoint of the grid");
    if (std::abs(frac - 1.0) <= kAlign) ++whole;

    const auto size = static_cast<long>(f.size());
    // Grid index of the sample at distance u = k·step (k may be fractional for midpoint grids).
    auto index_at = [&](double k) {
        double raw = (endpoint + dir * k * f.step - f.origin) / f.step;
        return static_cast<long>(std::lround(raw));
    };
    auto value = [&](long i) {
        if (i < 0 || i >= size) throw std::invalid_argument("interpolation window leaves the sample grid");
        return f.values[static_cast<std::size_t>(i)];
    };

    // Boundary data: f(e), f(e ± 1/n) and the window average n∫ f.
    double at_edge = 0.0;
    double at_window = 0.0;
    if (!midpoints) {
        at_edge = value(index_at(0.0));
        at_window = value(index_at(static_cast<double>(span)));
    }
    double average = 0.0;
    if (midpoints) {
        for (long k = 0; k < span; ++k) average += value(index_at(k + 0.5));
        average /= static_cast<double>(span);
    } else {
        average = 0.5 * (value(index_at(0.0)) + value(index_at(static_cast<double>(span))));
        for (long k = 1; k < span; ++k) average += value(index_at(static_cast<double>(k)));
        average /= static_cast<double>(span);
    }
    if (midpoints && (kind == Interpolant::linear || kind == Interpolant::hat_prime))
        throw std::invalid_argument("point interpolants need the endpoint on the grid");

    SampledFunction out = f;
    for (long i = 0; i < size; ++i) {
        double u = dir * (f.x(static_cast<std::size_t>(i)) - endpoint);
        bool closed = u <= width + kAlign * f.step;
        bool open = u < width - kAlign * f.step;
        double& slot = out.values[static_cast<std::size_t>(i)];
        switch (kind) {
        case Interpolant::linear:
            if (closed) slot = (1.0 - u * n) * at_edge + u * n * at_window;
            break;
        case Interpolant::average:
            if (open) slot = average;
            break;
        case Interpolant::zero:
            if (open) slot = 0.0;
            break;
        case Interpolant::hat_prime:
            if (closed) slot = at_edge + (0.5 * g * u * u + u) / (0.5 * g / n + 1.0) * n * (at_window - at_edge);
            break;
        case Interpolant::hat_doubleprime:
            if (closed) slot = (g * u + 1.0) / (0.5 * g / n + 1.0) * average;
            break;
        }
    }
    return out;
}

SampledFunction apply_T(const SampledFunction& f, int n, TVariant variant, const BoundarySpec& boundary) {
    Interpolant kind = Interpolant::linear;
    switch (variant) {
    case TVariant::T: kind = Interpolant::linear; break;
    case TVariant::T_prime: kind = Interpolant::average; break;
    case TVariant::T_doubleprime: kind = Interpolant::zero; break;
    case TVariant::T_hat_prime: kind = Interpolant::hat_prime; break;
    case TVariant::T_hat_doubleprime: kind = Interpolant::hat_doubleprime; break;
    }
    SampledFunction work = f;
    if (boundary.left) work = boundary_interp(work, n, kind, Endpoint::left, *boundary.left, boundary.gamma_left);
    if (boundary.right) work = boundary_interp(work, n, kind, Endpoint::right, *boundary.right, boundary.gamma_right);
    return mollify(work, n);
}

double one_sided_derivative(const SampledFunction& f, double at, int order, Endpoint side) {
    const auto start = static_cast<long>(f.index_of(at));
    const long dir = side == Endpoint::left ? 1 : -1;
    auto v = [&](long k) {
        long i = start + dir * k;
        if (i < 0 || i >= static_cast<long>(f.size())) throw std::invalid_argument("stencil leaves the sample grid");
        return f.values[static_cast<std::size_t>(i)];
    };
    const double h = f.step;
    if (order == 1) {
        double d = (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) / (12.0 * h);
        return dir * d;
    }
    if (order == 2) {
        return (45.0 * v(0) - 154.0 * v(1) + 214.0 * v(2) - 156.0 * v(3) + 61.0 * v(4) - 10.0 * v(5)) / (12.0 * h * h);
    }
    throw std::invalid_argument("only first and second derivatives are supported");
}

SampledFunction forward_difference(const SampledFunction& f) {
    check_grid(f);
    SampledFunction out;
    out.origin = f.origin + 0.5 * f.step;
    out.step = f.step;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) out.values.push_back((f.values[i + 1] - f.values[i]) / f.step);
    return out;
}

SampledFunction second_difference(const SampledFunction& f) {
    check_grid(f);
    SampledFunction out;
    out.origin = f.origin + f.step;
    out.step = f.step;
    for (std::size_t i = 1; i + 1 < f.size(); ++i)
        out.values.push_back((f.values[i + 1] - 2.0 * f.values[i] + f.values[i - 1]) / (f.step * f.step));
    return out;
}

}  // namespace stochorder
