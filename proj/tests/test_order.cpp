#include <gtest/gtest.h>

#include <random>

#include "stochorder/order.hpp"

using namespace stochorder;

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
    return out;
}

bool monotone_on_cube(const Vector& f, int n) {
    for (int sigma = 0; sigma < (1 << n); ++sigma)
        for (int i = 0; i < n; ++i)
            if (!(sigma >> i & 1) && f[sigma | 1 << i] < f[sigma]) return false;
    return true;
}

}  // namespace

TEST(MonotoneBoolean, DedekindCounts) {
    // Oracle: Dedekind numbers M(0..4) = 2, 3, 6, 20, 168.
    const std::size_t expected[] = {2, 3, 6, 20, 168};
    for (int n = 0; n <= 4; ++n) EXPECT_EQ(monotone_boolean_functions(n).size(), expected[n]) << n;
}

TEST(MonotoneBoolean, EveryMemberIsMonotoneAndDistinct) {
    auto all = monotone_boolean_functions(3);
    for (const auto& f : all) EXPECT_TRUE(monotone_on_cube(f, 3));
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_FALSE(all[i] == all[j]);
}

TEST(TestFamily, MembersLieInTheCone) {
    auto domain = TestDomain::line(linspace(0.0, 1.0, 41));
    for (auto kind : {OrderKind::increasing, OrderKind::convex, OrderKind::increasing_convex}) {
        auto family = generate_test_family(OrderSpec::simple(kind), domain, 30, 5);
        ASSERT_EQ(family.functions.size(), 30u);
        for (const auto& f : family.functions)
            EXPECT_TRUE(cone_membership(f, OrderSpec::simple(kind), domain, 0.0).member) << to_string(kind);
    }
}

TEST(TestFamily, DeterministicUnderSeed) {
    auto domain = TestDomain::line(linspace(0.0, 1.0, 11));
    auto first = generate_test_family(OrderSpec::simple(OrderKind::convex), domain, 10, 42);
    auto second = generate_test_family(OrderSpec::simple(OrderKind::convex), domain, 10, 42);
    for (std::size_t i = 0; i < first.functions.size(); ++i) EXPECT_TRUE(first.functions[i] == second.functions[i]);
}

TEST(TestFamily, SpinFamilyIsMonotone) {
    auto family = generate_test_family(OrderSpec::simple(OrderKind::spin_monotone), TestDomain::spins(5), 25, 9);
    for (const auto& f : family.functions) EXPECT_TRUE(monotone_on_cube(f, 5));
}

TEST(GeneratingFamily, IncreasingIsExhaustive) {
    auto domain = TestDomain::line(linspace(0.0, 1.0, 6));
    auto family = generating_family(OrderKind::increasing, domain);
    EXPECT_TRUE(family.exhaustive);
    // ±1 plus one step indicator per interior cut.
    EXPECT_EQ(family.functions.size(), 2u + 5u);
}

TEST(OrderMap, ForwardAndSecondDifferences) {
    auto points = linspace(0.0, 1.0, 5);
    auto domain = TestDomain::line(points);
    Vector f(5);
    for (int i = 0; i < 5; ++i) f[i] = points[static_cast<std::size_t>(i)] * points[static_cast<std::size_t>(i)];
    auto first = apply_order_map(OrderSpec::simple(OrderKind::increasing), domain, f);
    ASSERT_EQ(first.size(), 4);
    // (x_{i+1}^2 − x_i^2)/h = x_i + x_{i+1}.
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(first[i], points[static_cast<std::size_t>(i)] + points[static_cast<std::size_t>(i) + 1], 1e-12);
    auto second = apply_order_map(OrderSpec::simple(OrderKind::convex), domain, f);
    for (int i = 0; i < second.size(); ++i) EXPECT_NEAR(second[i], 2.0, 1e-9);
}

TEST(OrderMap, SpinFlipDifferences) {
    // f = number of ones on 2 sites; every flip difference is 1.
    Vector f(4);
    f << 0, 1, 1, 2;
    auto image = apply_order_map(OrderSpec::simple(OrderKind::spin_monotone), TestDomain::spins(2), f);
    for (int i = 0; i < image.size(); ++i) EXPECT_DOUBLE_EQ(image[i], 1.0);
}

TEST(ConeMembership, ReportsWorstIndex) {
    auto domain = TestDomain::line(linspace(0.0, 1.0, 5));
    Vector f(5);
    f << 0, 1, 0.5, 2, 3;
    auto result = cone_membership(f, OrderSpec::simple(OrderKind::increasing), domain, 0.0);
    EXPECT_FALSE(result.member);
    EXPECT_EQ(result.worst_index, 1u);
    EXPECT_LT(result.margin, 0.0);
}

TEST(Dominance, IncreasingOrderMatchesTailSums) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto domain = TestDomain::line(linspace(0.0, 1.0, 6));
    auto family = generating_family(OrderKind::increasing, domain);
    for (int trial = 0; trial < 200; ++trial) {
        Distribution p, q;
        for (auto* d : {&p, &q}) {
            d->probabilities.resize(6);
            double total = 0.0;
            for (auto& v : d->probabilities) total += v = unit(rng);
            for (auto& v : d->probabilities) v /= total;
        }
        // Oracle: p ≤ q iff every upper tail of q dominates that of p.
        bool oracle = true;
        double tail_p = 0.0, tail_q = 0.0;
        for (int k = 5; k >= 0; --k) {
            tail_p += p.probabilities[static_cast<std::size_t>(k)];
            tail_q += q.probabilities[static_cast<std::size_t>(k)];
            if (tail_p > tail_q + 1e-12) oracle = false;
        }
        auto result = stochastic_dominance(p, q, OrderSpec::simple(OrderKind::increasing), family);
        EXPECT_EQ(result.verdict == Dominance::dominated, oracle);
    }
}

TEST(Dominance, PointMassesOrdered) {
    auto domain = TestDomain::line(linspace(0.0, 1.0, 4));
    auto family = generating_family(OrderKind::increasing, domain);
    auto low = Distribution::point_mass(4, 1);
    auto high = Distribution::point_mass(4, 3);
    EXPECT_EQ(stochastic_dominance(low, high, OrderSpec::simple(OrderKind::increasing), family).verdict,
              Dominance::dominated);
    EXPECT_EQ(stochastic_dominance(high, low, OrderSpec::simple(OrderKind::increasing), family).verdict,
              Dominance::not_dominated);
}

TEST(Dominance, ConvexOrderMeanPreservingSpread) {
    // δ_{x2} ≤_cx ½(δ_{x0} + δ_{x4}): same mean, more spread.
    auto domain = TestDomain::line(linspace(0.0, 1.0, 5));
    auto family = generating_family(OrderKind::convex, domain);
    Distribution centre = Distribution::point_mass(5, 2);
    Distribution spread;
    spread.probabilities = {0.5, 0, 0, 0, 0.5};
    EXPECT_EQ(stochastic_dominance(centre, spread, OrderSpec::simple(OrderKind::convex), family).verdict,
              Dominance::dominated);
    EXPECT_EQ(stochastic_dominance(spread, centre, OrderSpec::simple(OrderKind::convex), family).verdict,
              Dominance::not_dominated);
}

TEST(Distribution, ValidateRejectsExcessMass) {
    Distribution d;
    d.probabilities = {0.7, 0.6};
    EXPECT_THROW(d.validate(), std::invalid_argument);
}
