#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stochorder/approxops.hpp"

using namespace stochorder;

namespace {

constexpr int kIndex = 5;                            // n: window 1/n = 0.2
constexpr double kStep = 1.0 / (400.0 * kIndex);  // 400 samples per window resolve the kernel tail
// Difference-quotient checks divide rounding by step²; they only need 80 samples per window.
constexpr double kOrderingStep = 1.0 / (80.0 * kIndex);

SampledFunction on_window(const std::function<double(double)>& f, double step = kStep) {
    return SampledFunction::sample(f, -0.5, 1.5, step);
}

BoundarySpec unit_interval(double gamma_left = 0.0, double gamma_right = 0.0) {
    BoundarySpec spec;
    spec.left = 0.0;
    spec.right = 1.0;
    spec.gamma_left = gamma_left;
    spec.gamma_right = gamma_right;
    return spec;
}

double sup_norm(const SampledFunction& f) {
    double out = 0.0;
    for (double v : f.values) out = std::max(out, std::abs(v));
    return out;
}

double min_value(const SampledFunction& f) { return *std::min_element(f.values.begin(), f.values.end()); }

/// Values of `g` at the abscissae of `f` (both on the same step, shifted origin allowed).
double value_at(const SampledFunction& g, double x) { return g.values[g.index_of(x)]; }

/// f with forward differences h_k + extra_k ≥ h_k, h ≥ 0 on the midpoints.
struct StaggeredPair {
    SampledFunction f;
    SampledFunction h;
};

StaggeredPair random_first_order_pair(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto f = on_window([](double) { return 0.0; }, kOrderingStep);
    SampledFunction h;
    h.origin = f.origin + 0.5 * f.step;
    h.step = f.step;
    // Piecewise-smooth random density so the window averages differ from point values.
    const double a = unit(rng), b = 4.0 * unit(rng), c = unit(rng);
    double running = unit(rng);
    f.values[0] = running;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) {
        const double x = h.origin + static_cast<double>(k) * h.step;
        const double density = a + std::sin(b * x) * std::sin(b * x) + (x > c ? 0.5 : 0.0);
        const double extra = 0.3 * unit(rng) * (x > 0.5 ? 1.0 : 0.0);
        h.values.push_back(density);
        running += f.step * (density + extra);
        f.values[k + 1] = running;
    }
    return {f, h};
}

}  // namespace

TEST(Mollifier, SymmetricNonNegativeUnitMass) {
    auto kernel = Mollifier::bump(0.1, 0.001);
    ASSERT_EQ(kernel.weights.size(), static_cast<std::size_t>(2 * kernel.half_width + 1));
    EXPECT_NEAR(std::accumulate(kernel.weights.begin(), kernel.weights.end(), 0.0), 1.0, 1e-15);
    for (int k = 0; k <= kernel.half_width; ++k) {
        EXPECT_GE(kernel.weights[static_cast<std::size_t>(kernel.half_width + k)], 0.0);
        EXPECT_EQ(kernel.weights[static_cast<std::size_t>(kernel.half_width + k)],
                  kernel.weights[static_cast<std::size_t>(kernel.half_width - k)]);
    }
}

TEST(Mollify, ConstantsAndLinearFunctionsAreFixed) {
    auto constant = mollify(on_window([](double) { return 3.25; }), kIndex);
    for (double v : constant.values) EXPECT_NEAR(v, 3.25, 1e-12);
    auto line = mollify(on_window([](double x) { return x; }), kIndex);
    for (std::size_t i = 0; i < line.size(); ++i) EXPECT_NEAR(line.values[i], line.x(i), 1e-12);
}

TEST(Mollify, ContractsSupNormAndKeepsMonotonicity) {
    auto step_fn = on_window([](double x) { return x < 0.4 ? -1.0 : (x < 0.9 ? 0.5 : 2.0); });
    auto smooth = mollify(step_fn, kIndex);
    EXPECT_LE(sup_norm(smooth), sup_norm(step_fn) + 1e-12);
    EXPECT_GE(min_value(forward_difference(smooth)), -1e-12);
}

TEST(Mollify, WindowTooSmallRejected) {
    auto tiny = SampledFunction::sample([](double x) { return x; }, 0.0, 0.05, 0.01);
    EXPECT_THROW((void)mollify(tiny, 1), std::invalid_argument);
}

TEST(BoundaryInterp, LinearIsTheChord) {
    auto square = on_window([](double x) { return x * x; });
    auto out = boundary_interp(square, kIndex, Interpolant::linear, Endpoint::left, 0.0);
    const double width = 1.0 / kIndex;
    for (double x : {0.0, 0.05, 0.1, 0.2}) EXPECT_NEAR(out.at(x), x * width, 1e-12) << x;  // chord of x² through 0, 1/n
    EXPECT_NEAR(out.at(0.5), 0.25, 1e-15);  // untouched outside the window
}

TEST(BoundaryInterp, AverageOfIdentityIsHalfWindow) {
    auto line = on_window([](double x) { return x; });
    auto out = boundary_interp(line, kIndex, Interpolant::average, Endpoint::left, 0.0);
    for (double x : {0.0, 0.1, 0.1975}) EXPECT_NEAR(out.at(x), 1.0 / (2 * kIndex), 1e-12) << x;
    EXPECT_NEAR(out.at(0.2), 0.2, 1e-15);  // right-open window
}

TEST(BoundaryInterp, ZeroClearsTheOpenWindow) {
    auto cube = on_window([](double x) { return 1.0 + x * x * x; });
    auto out = boundary_interp(cube, kIndex, Interpolant::zero, Endpoint::right, 1.0);
    EXPECT_EQ(out.at(1.0), 0.0);
    EXPECT_EQ(out.at(0.85), 0.0);
    EXPECT_NEAR(out.at(0.8), 1.512, 1e-12);
}

TEST(BoundaryInterp, HatPrimeWithZeroGammaIsLinear) {
    auto f = on_window([](double x) { return std::exp(x); });
    auto hat = boundary_interp(f, kIndex, Interpolant::hat_prime, Endpoint::left, 0.0, 0.0);
    auto linear = boundary_interp(f, kIndex, Interpolant::linear, Endpoint::left, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(hat.values[i], linear.values[i], 1e-12);
    auto smoothed = apply_T(f, kIndex, TVariant::T_hat_prime, unit_interval());
    EXPECT_NEAR(one_sided_derivative(smoothed, 0.0, 2, Endpoint::left), 0.0, 1e-6);
}

TEST(BoundaryInterp, CoarseGridRejected) {
    auto coarse = on_window([](double x) { return x; }, 0.02);
    EXPECT_THROW((void)boundary_interp(coarse, kIndex, Interpolant::linear, Endpoint::left, 0.0),
                 std::invalid_argument);
}

TEST(OneSided, StencilsExactOnLowDegreePolynomials) {
    auto quartic = on_window([](double x) { return x * x * x * x - x; });
    auto quintic = on_window([](double x) { return std::pow(x, 5) + x * x; });
    for (double e : {0.0, 1.0}) {
        auto side = e == 0.0 ? Endpoint::left : Endpoint::right;
        EXPECT_NEAR(one_sided_derivative(quartic, e, 1, side), 4 * e * e * e - 1, 1e-8);
        EXPECT_NEAR(one_sided_derivative(quintic, e, 2, side), 20 * e * e * e + 2, 1e-6);
    }
}

TEST(ApplyT, BoundaryValuesOfTheFirstTwoOperators) {
    auto f = on_window([](double x) { return std::sin(2 * x) + x * x; });
    // T: linear near e and the kernel fixes linear functions.
    auto t = apply_T(f, kIndex, TVariant::T, unit_interval());
    for (double e : {0.0, 1.0}) {
        auto side = e == 0.0 ? Endpoint::left : Endpoint::right;
        EXPECT_NEAR(t.at(e), f.at(e), 1e-10);
        EXPECT_NEAR(one_sided_derivative(t, e, 2, side), 0.0, 1e-6);
    }
    // T′: constant near e.
    auto tp = apply_T(f, kIndex, TVariant::T_prime, unit_interval());
    EXPECT_NEAR(one_sided_derivative(tp, 0.0, 1, Endpoint::left), 0.0, 1e-8);
    EXPECT_NEAR(one_sided_derivative(tp, 1.0, 1, Endpoint::right), 0.0, 1e-8);
}

TEST(ApplyT, DoublePrimeVanishesToSecondOrderAtEndpoints) {
    auto f = on_window([](double x) { return 2.0 + std::cos(3 * x); });
    auto out = apply_T(f, kIndex, TVariant::T_doubleprime, unit_interval());
    for (double e : {0.0, 1.0}) {
        auto side = e == 0.0 ? Endpoint::left : Endpoint::right;
        EXPECT_NEAR(out.at(e), 0.0, 1e-12);
        EXPECT_NEAR(one_sided_derivative(out, e, 1, side), 0.0, 1e-8);
        EXPECT_NEAR(one_sided_derivative(out, e, 2, side), 0.0, 1e-6);
    }
}

TEST(ApplyT, HatRelationsHoldAtBothEndpoints) {
    auto f = on_window([](double x) { return 1.0 + x + 0.5 * std::sin(4 * x); });
    for (double gamma_left : {0.5, 3.0})
        for (double gamma_right : {-2.0, -0.25}) {
            auto spec = unit_interval(gamma_left, gamma_right);
            auto prime = apply_T(f, kIndex, TVariant::T_hat_prime, spec);
            auto dprime = apply_T(f, kIndex, TVariant::T_hat_doubleprime, spec);
            for (auto [e, gamma, side] : {std::tuple{0.0, gamma_left, Endpoint::left},
                                          std::tuple{1.0, gamma_right, Endpoint::right}}) {
                const double d1 = one_sided_derivative(prime, e, 1, side);
                const double d2 = one_sided_derivative(prime, e, 2, side);
                EXPECT_NEAR(gamma * d1, d2, 1e-6 * std::max(1.0, std::abs(d2))) << e << " " << gamma;
                const double v0 = dprime.at(e);
                const double v1 = one_sided_derivative(dprime, e, 1, side);
                EXPECT_NEAR(gamma * v0, v1, 1e-6 * std::max(1.0, std::abs(v1))) << e << " " << gamma;
            }
        }
}

TEST(ApplyT, PreservesIncreasingAndConvexFunctions) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const double kink = unit(rng), slope = 2.0 * unit(rng), curve = unit(rng);
        auto increasing = on_window([=](double x) { return slope * x + (x > kink ? 1.0 : 0.0) + std::atan(curve * x); });
        auto convex = on_window([=](double x) { return curve * x * x + slope * std::max(0.0, x - kink); });
        auto t_inc = apply_T(increasing, kIndex, TVariant::T, unit_interval());
        auto t_cvx = apply_T(convex, kIndex, TVariant::T, unit_interval());
        EXPECT_GE(min_value(forward_difference(t_inc)), -1e-10);
        EXPECT_GE(min_value(second_difference(t_cvx)), -1e-7);
    }
}

TEST(ApplyT, FirstOrderWeakDerivativeOrdering) {
    // f′ ≥ h ≥ 0  ⇒  (T f)′ ≥ T′h ≥ 0  and  (T′f)′ ≥ T″h ≥ 0, on staggered differences.
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        auto [f, h] = random_first_order_pair(rng);
        auto spec_h = unit_interval();
        auto tf = forward_difference(apply_T(f, kIndex, TVariant::T, unit_interval()));
        auto tph = apply_T(h, kIndex, TVariant::T_prime, spec_h);
        auto tpf = forward_difference(apply_T(f, kIndex, TVariant::T_prime, unit_interval()));
        auto tdh = apply_T(h, kIndex, TVariant::T_doubleprime, spec_h);
        EXPECT_GE(min_value(tph), -1e-9);
        EXPECT_GE(min_value(tdh), -1e-9);
        for (std::size_t k = 0; k < tph.size(); ++k) {
            const double x = tph.x(k);
            if (x < tf.origin || x > tf.last()) continue;
            EXPECT_GE(value_at(tf, x) - tph.values[k], -1e-9) << x;
            EXPECT_GE(value_at(tpf, x) - tdh.values[k], -1e-9) << x;
        }
    }
}

TEST(ApplyT, SecondOrderWeakDerivativeOrdering) {
    // f″ ≥ h ≥ 0 on nodes  ⇒  (T f)″ ≥ T″h.
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = on_window([](double) { return 0.0; }, kOrderingStep);
        for (std::size_t i = 0; i < h.size(); ++i) h.values[i] = 1.0 + std::sin(5.0 * h.x(i) + trial) + 0.2 * unit(rng);
        // Integrate twice with surplus ≥ 0 in the second differences.
        auto f = h;
        double slope = unit(rng) - 0.5;
        f.values[0] = 0.0;
        f.values[1] = slope * f.step;
        for (std::size_t i = 1; i + 1 < f.size(); ++i) {
            slope += f.step * (h.values[i] + 0.1 * unit(rng));
            f.values[i + 1] = f.values[i] + slope * f.step;
        }
        auto lhs = second_difference(apply_T(f, kIndex, TVariant::T, unit_interval()));
        auto rhs = apply_T(h, kIndex, TVariant::T_doubleprime, unit_interval());
        EXPECT_GE(min_value(rhs), -1e-9);
        for (std::size_t k = 0; k < lhs.size(); ++k) {
            const double x = lhs.x(k);
            EXPECT_GE(lhs.values[k] - value_at(rhs, x), -1e-9 * std::max(1.0, std::abs(lhs.values[k]))) << x;
        }
    }
}

TEST(ApplyT, ConvergesToTheIdentityOnACompactWindow) {
    auto error_for = [](int n) {
        const double step = 1.0 / (20.0 * n);
        auto f = SampledFunction::sample([](double x) { return std::sin(3 * x) + std::abs(x - 0.5); }, -0.5, 1.5, step);
        auto out = apply_T(f, n, TVariant::T, unit_interval());
        double worst = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double x = out.x(i);
            if (x < 0.0 || x > 1.0) continue;
            worst = std::max(worst, std::abs(out.values[i] - (std::sin(3 * x) + std::abs(x - 0.5))));
        }
        return worst;
    };
    const double coarse = error_for(5);
    const double fine = error_for(80);
    EXPECT_LT(fine, coarse / 4.0);
    EXPECT_LT(fine, 0.05);
}
