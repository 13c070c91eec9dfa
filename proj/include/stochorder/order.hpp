#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stochorder/grid_operator.hpp"
#include "stochorder/multi_index.hpp"

namespace stochorder {

enum class OrderKind { increasing, convex, increasing_convex, multi_index, spin_monotone };

std::string to_string(OrderKind kind);
OrderKind order_kind_from_string(const std::string& name);

struct OrderSpec {
    OrderKind kind = OrderKind::increasing;
    IndexSet index_set;  // used by multi_index only

    static OrderSpec simple(OrderKind kind) { return OrderSpec{kind, {}}; }
    static OrderSpec multi(IndexSet set) { return OrderSpec{OrderKind::multi_index, std::move(set)}; }
};

/// Where test functions live: uniform axes for grid functions (one axis for
/// 1-D, two for tensor grids, flattened row-major), or a number of spin sites
/// (functions on {0,1}^n indexed by bit mask, bit i = site i).
struct TestDomain {
    std::vector<std::vector<double>> axes;
    int sites = 0;

    static TestDomain line(std::vector<double> points) { return TestDomain{{std::move(points)}, 0}; }
    static TestDomain spins(int n) { return TestDomain{{}, n}; }
    [[nodiscard]] std::size_t size() const;
};

struct TestFamily {
    std::vector<Vector> functions;
    /// True when the family generates the whole cone on this domain, so that
    /// passing every member certifies dominance.
    bool exhaustive = false;
};

/// Finite generating family for the order cone. Convex-type members are
/// integer valued so that their difference quotients are exact.
TestFamily generate_test_family(const OrderSpec& order, const TestDomain& domain, int count,
                                std::uint64_t seed);

/// Exhaustive generators of a 1-D cone on the grid: ±1 and up-step indicators
/// (increasing); ±1, ±x and interior hinges (convex); ±1 and hinges at every
/// knot but the last (increasing convex).
TestFamily generating_family(OrderKind kind, const TestDomain& domain);

/// All monotone 0/1 functions on {0,1}^n, by brute force over truth tables (n <= 4).
std::vector<Vector> monotone_boolean_functions(int n);

/// Discrete order map applied to f: forward differences, second differences,
/// both stacked, mixed differences for each multi-index, or spin flips.
Vector apply_order_map(const OrderSpec& order, const TestDomain& domain, const Vector& f);

struct ConeMembership {
    bool member = false;
    double margin = 0.0;  // smallest entry of the order map applied to f
    std::size_t worst_index = 0;
};

ConeMembership cone_membership(const Vector& f, const OrderSpec& order, const TestDomain& domain,
                               double tol);

/// Sub-probability vector over grid indices or spin configurations, with
/// the missing mass recorded as killed.
struct Distribution {
    std::vector<double> probabilities;
    double killed = 0.0;

    static Distribution point_mass(std::size_t size, std::size_t at);
    [[nodiscard]] double expectation(const Vector& f) const;
    void validate() const;
};

enum class Dominance { dominated, not_dominated, undecided };
std::string to_string(Dominance d);

struct DominanceResult {
    Dominance verdict = Dominance::undecided;
    std::size_t witness = 0;  // family member (or threshold index for the CDF test)
    double gap = 0.0;         // E_p f - E_q f at the witness
};

/// Tests p <= q in the integral order. 1-D increasing uses the exact tail-sum
/// comparison (killed mass sits below every state); all other cases compare
/// expectations over `family`.
DominanceResult stochastic_dominance(const Distribution& p, const Distribution& q, const OrderSpec& order,
                                     const TestFamily& family);

}  // namespace stochorder
