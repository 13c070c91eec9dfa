#include "stochorder/order.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace stochorder {

// ---------------------------------------------------------------------------
// Index sets

IndexSet::IndexSet(int dim, std::vector<MultiIndex> members) : dim_(dim), members_(std::move(members)) {
    for (const auto& m : members_) {
        if (m.dim() != dim) throw std::invalid_argument("index set member has wrong dimension");
        if (m.norm_inf() > 1 || !m.non_negative()) {
            throw std::invalid_argument("index set members must lie in {0,1}^d: " + m.to_string());
        }
        if (m.norm1() < 1 || m.norm1() > 2) {
            throw std::invalid_argument("index set members must have size 1 or 2: " + m.to_string());
        }
    }
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

IndexSet IndexSet::coordinates(int dim) {
    std::vector<MultiIndex> out;
    for (int i = 0; i < dim; ++i) out.push_back(MultiIndex::unit(dim, i));
    return IndexSet(dim, std::move(out));
}

IndexSet IndexSet::pairs(int dim) {
    std::vector<MultiIndex> out;
    for (int k = 0; k < dim; ++k) {
        for (int l = k + 1; l < dim; ++l) out.push_back(MultiIndex::unit(dim, k) + MultiIndex::unit(dim, l));
    }
    return IndexSet(dim, std::move(out));
}

IndexSet IndexSet::without(const MultiIndex& m) const {
    std::vector<MultiIndex> rest;
    std::copy_if(members_.begin(), members_.end(), std::back_inserter(rest),
                 [&](const MultiIndex& x) { return !(x == m); });
    return IndexSet(dim_, std::move(rest));
}

// ---------------------------------------------------------------------------

std::string to_string(OrderKind kind) {
    switch (kind) {
        case OrderKind::increasing: return "increasing";
        case OrderKind::convex: return "convex";
        case OrderKind::increasing_convex: return "increasing_convex";
        case OrderKind::multi_index: return "multi_index";
        case OrderKind::spin_monotone: return "spin_monotone";
    }
    return "unknown";
}

OrderKind order_kind_from_string(const std::string& name) {
    if (name == "increasing") return OrderKind::increasing;
    if (name == "convex") return OrderKind::convex;
    if (name == "increasing_convex") return OrderKind::increasing_convex;
    if (name == "multi_index") return OrderKind::multi_index;
    if (name == "spin_monotone") return OrderKind::spin_monotone;
    throw std::invalid_argument("unknown order '" + name + "'");
}

std::size_t TestDomain::size() const {
    if (sites > 0) return std::size_t{1} << sites;
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& axis : axes) n *= axis.size();
    return n;
}

namespace {

double axis_step(const std::vector<double>& axis) {
    if (axis.size() < 2) throw std::invalid_argument("grid axis needs at least two points");
    return axis[1] - axis[0];
}

std::vector<std::size_t> strides(const TestDomain& domain) {
    std::vector<std::size_t> s(domain.axes.size(), 1);
    for (std::size_t k = domain.axes.size(); k-- > 1;) s[k - 1] = s[k] * domain.axes[k].size();
    return s;
}

/// Mixed forward difference for multi-index alpha at every grid point p with
/// p + alpha inside the grid, in row-major order of p.
void append_mixed_difference(const TestDomain& domain, const MultiIndex& alpha, const Vector& f,
                             std::vector<double>& out) {
    const auto d = domain.axes.size();
    const auto stride = strides(domain);
    std::vector<std::size_t> extent(d);
    double scale = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
        extent[k] = domain.axes[k].size() - static_cast<std::size_t>(alpha[static_cast<int>(k)]);
        for (int r = 0; r < alpha[static_cast<int>(k)]; ++r) scale *= axis_step(domain.axes[k]);
    }
    // Corners beta <= alpha with signs (-1)^{|alpha - beta|}.
    std::vector<std::pair<std::size_t, double>> corners{{0, 1.0}};
    for (std::size_t k = 0; k < d; ++k) {
        if (alpha[static_cast<int>(k)] == 0) continue;
        std::vector<std::pair<std::size_t, double>> next;
        for (auto [offset, sign] : corners) {
            next.emplace_back(offset + stride[k], sign);
            next.emplace_back(offset, -sign);
        }
        corners = std::move(next);
    }
    std::vector<std::size_t> p(d, 0);
    std::size_t count = 1;
    for (auto e : extent) count *= e;
    for (std::size_t n = 0; n < count; ++n) {
        std::size_t base = 0;
        for (std::size_t k = 0; k < d; ++k) base += p[k] * stride[k];
        double acc = 0.0;
        for (auto [offset, sign] : corners) acc += sign * f[static_cast<Eigen::Index>(base + offset)];
        out.push_back(acc / scale);
        for (std::size_t k = d; k-- > 0;) {
            if (++p[k] < extent[k]) break;
            p[k] = 0;
        }
    }
}

}  // namespace

Vector apply_order_map(const OrderSpec& order, const TestDomain& domain, const Vector& f) {
    if (static_cast<std::size_t>(f.size()) != domain.size()) {
        throw std::invalid_argument("function size does not match the test domain");
    }
    std::vector<double> out;
    switch (order.kind) {
        case OrderKind::increasing:
        case OrderKind::convex:
        case OrderKind::increasing_convex: {
            if (domain.axes.size() != 1) throw std::invalid_argument("1-D order on a non 1-D domain");
            double h = axis_step(domain.axes[0]);
            const Eigen::Index n = f.size();
            if (order.kind != OrderKind::convex) {
                for (Eigen::Index i = 0; i + 1 < n; ++i) out.push_back((f[i + 1] - f[i]) / h);
            }
            if (order.kind != OrderKind::increasing) {
                for (Eigen::Index i = 1; i + 1 < n; ++i) out.push_back((f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h));
            }
            break;
        }
        case OrderKind::multi_index:
            for (const auto& alpha : order.index_set.members()) append_mixed_difference(domain, alpha, f, out);
            break;
        case OrderKind::spin_monotone: {
            const int n = domain.sites;
            const std::size_t states = std::size_t{1} << n;
            for (std::size_t sigma = 0; sigma < states; ++sigma) {
                for (int x = 0; x < n; ++x) {
                    std::size_t up = sigma | (std::size_t{1} << x);
                    std::size_t down = sigma & ~(std::size_t{1} << x);
                    out.push_back(f[static_cast<Eigen::Index>(up)] - f[static_cast<Eigen::Index>(down)]);
                }
            }
            break;
        }
    }
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

ConeMembership cone_membership(const Vector& f, const OrderSpec& order, const TestDomain& domain, double tol) {
    Vector phi = apply_order_map(order, domain, f);
    ConeMembership result;
    if (phi.size() == 0) {
        result.member = true;
        return result;
    }
    Eigen::Index worst = 0;
    result.margin = phi.minCoeff(&worst);
    result.worst_index = static_cast<std::size_t>(worst);
    result.member = result.margin >= -tol;
    return result;
}

// ---------------------------------------------------------------------------
// Test families

std::vector<Vector> monotone_boolean_functions(int n) {
    if (n < 0 || n > 4) throw std::invalid_argument("exhaustive monotone enumeration supports n <= 4");
    const std::size_t states = std::size_t{1} << n;
    const std::uint64_t tables = std::uint64_t{1} << states;
    std::vector<Vector> out;
    for (std::uint64_t table = 0; table < tables; ++table) {
        bool monotone = true;
        for (std::size_t sigma = 0; sigma < states && monotone; ++sigma) {
            if (!((table >> sigma) & 1U)) continue;
            for (int x = 0; x < n; ++x) {
                std::size_t up = sigma | (std::size_t{1} << x);
                if (!((table >> up) & 1U)) {
                    monotone = false;
                    break;
                }
            }
        }
        if (!monotone) continue;
        Vector f(static_cast<Eigen::Index>(states));
        for (std::size_t sigma = 0; sigma < states; ++sigma) f[static_cast<Eigen::Index>(sigma)] = (table >> sigma) & 1U;
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

std::vector<std::size_t> spread_knots(std::size_t lo, std::size_t hi, int count, std::mt19937_64& rng) {
    std::vector<std::size_t> knots;
    if (hi <= lo) return knots;
    const std::size_t span = hi - lo;
    for (int k = 0; k < count; ++k) {
        std::size_t base = lo + (span * static_cast<std::size_t>(k)) / static_cast<std::size_t>(std::max(count, 1));
        std::size_t width = std::max<std::size_t>(1, span / static_cast<std::size_t>(std::max(count, 1)));
        std::uniform_int_distribution<std::size_t> jitter(0, width - 1);
        knots.push_back(std::min(hi, base + jitter(rng)));
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return knots;
}

TestFamily one_dimensional_family(OrderKind kind, std::size_t n, int count, std::mt19937_64& rng) {
    TestFamily family;
    std::uniform_int_distribution<int> small(-3, 3);
    std::uniform_int_distribution<int> slope(0, 3);
    std::uniform_int_distribution<int> width(0, 4);
    auto knots = spread_knots(1, n - 1, count, rng);
    for (std::size_t k : knots) {
        Vector f(static_cast<Eigen::Index>(n));
        if (kind == OrderKind::increasing) {
            // Smoothed threshold at knot k: a ramp of a few grid steps.
            const int w = width(rng);
            for (std::size_t i = 0; i < n; ++i) {
                double s = static_cast<double>(static_cast<long>(i) - static_cast<long>(k));
                f[static_cast<Eigen::Index>(i)] = w == 0 ? (s >= 0 ? 1.0 : 0.0) : std::clamp(s / w + 0.5, 0.0, 1.0);
            }
        } else {
            const int intercept = small(rng);
            const int beta = kind == OrderKind::convex ? small(rng) : slope(rng);
            for (std::size_t i = 0; i < n; ++i) {
                long hinge = std::max<long>(static_cast<long>(i) - static_cast<long>(k), 0);
                f[static_cast<Eigen::Index>(i)] = static_cast<double>(hinge + intercept + beta * static_cast<long>(i));
            }
        }
        family.functions.push_back(std::move(f));
    }
    return family;
}

TestFamily multi_index_family(const OrderSpec& order, const TestDomain& domain, int count, std::mt19937_64& rng) {
    TestFamily family;
    const std::size_t d = domain.axes.size();
    bool only_pairs = std::all_of(order.index_set.members().begin(), order.index_set.members().end(),
                                  [](const MultiIndex& m) { return m.norm1() == 2; });
    const auto stride = strides(domain);
    const std::size_t total = domain.size();
    std::uniform_int_distribution<int> coin(0, 2);
    std::uniform_int_distribution<int> small(-3, 3);
    for (int member = 0; member < count; ++member) {
        Vector f = Vector::Zero(static_cast<Eigen::Index>(total));
        // Product of non-negative increasing integer ramps: every first and
        // mixed difference is non-negative.
        std::vector<std::vector<double>> ramps(d);
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t n = domain.axes[k].size();
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            std::size_t knot = pick(rng);
            int shape = coin(rng);
            ramps[k].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                long s = static_cast<long>(i) - static_cast<long>(knot);
                ramps[k][i] = shape == 0 ? static_cast<double>(i) : shape == 1 ? (s >= 0 ? 1.0 : 0.0)
                                                                        : static_cast<double>(std::max(s, 0L));
            }
        }
        // Convex increasing function of the coordinate-index sum.
        std::uniform_int_distribution<long> sum_knot(0, static_cast<long>(total ? domain.axes[0].size() : 1));
        long knot = sum_knot(rng);
        for (std::size_t flat = 0; flat < total; ++flat) {
            double product = 1.0;
            long index_sum = 0;
            std::size_t rest = flat;
            for (std::size_t k = 0; k < d; ++k) {
                std::size_t i = rest / stride[k];
                rest %= stride[k];
                product *= ramps[k][i];
                index_sum += static_cast<long>(i);
            }
            f[static_cast<Eigen::Index>(flat)] = product + static_cast<double>(std::max(index_sum - knot, 0L));
        }
        if (only_pairs) {
            // Separable terms of either sign lie in the kernel of every mixed difference.
            for (std::size_t k = 0; k < d; ++k) {
                int a = small(rng);
                int b = small(rng);
                for (std::size_t flat = 0; flat < total; ++flat) {
                    auto i = static_cast<long>((flat / stride[k]) % domain.axes[k].size());
                    f[static_cast<Eigen::Index>(flat)] += static_cast<double>(a * i + b * (i % 3));
                }
            }
        }
        family.functions.push_back(std::move(f));
    }
    return family;
}

TestFamily random_monotone_spin_family(int sites, int count, std::mt19937_64& rng) {
    TestFamily family;
    const std::size_t states = std::size_t{1} << sites;
    std::uniform_int_distribution<int> terms_dist(1, 4);
    std::bernoulli_distribution include(0.4);
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    for (int member = 0; member < count; ++member) {
        const int terms = terms_dist(rng);
        std::vector<std::pair<std::size_t, double>> min_terms;
        for (int t = 0; t < terms; ++t) {
            std::size_t mask = 0;
            for (int i = 0; i < sites; ++i) {
                if (include(rng)) mask |= std::size_t{1} << i;
            }
            min_terms.emplace_back(mask, weight(rng));
        }
        Vector f(static_cast<Eigen::Index>(states));
        for (std::size_t sigma = 0; sigma < states; ++sigma) {
            double value = 0.0;
            for (auto [mask, w] : min_terms) {
                if ((sigma & mask) == mask) value = std::max(value, w);
            }
            f[static_cast<Eigen::Index>(sigma)] = value;
        }
        family.functions.push_back(std::move(f));
    }
    return family;
}

}  // namespace

TestFamily generate_test_family(const OrderSpec& order, const TestDomain& domain, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    switch (order.kind) {
        case OrderKind::increasing:
        case OrderKind::convex:
        case OrderKind::increasing_convex:
            if (domain.axes.size() != 1) throw std::invalid_argument("1-D order on a non 1-D domain");
            return one_dimensional_family(order.kind, domain.axes[0].size(), count, rng);
        case OrderKind::multi_index:
            return multi_index_family(order, domain, count, rng);
        case OrderKind::spin_monotone:
            if (domain.sites <= 4) return TestFamily{monotone_boolean_functions(domain.sites), true};
            return random_monotone_spin_family(domain.sites, count, rng);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Distributions and dominance

Distribution Distribution::point_mass(std::size_t size, std::size_t at) {
    Distribution d;
    d.probabilities.assign(size, 0.0);
    d.probabilities.at(at) = 1.0;
    return d;
}

double Distribution::expectation(const Vector& f) const {
    if (static_cast<std::size_t>(f.size()) != probabilities.size()) {
        throw std::invalid_argument("function and distribution supports differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) acc += probabilities[i] * f[static_cast<Eigen::Index>(i)];
    return acc;
}

void Distribution::validate() const {
    double total = killed;
    for (double p : probabilities) {
        if (p < 0.0) throw std::invalid_argument("negative probability");
        total += p;
    }
    if (killed < 0.0 || std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("probabilities do not sum to one");
}

std::string to_string(Dominance d) {
    switch (d) {
        case Dominance::dominated: return "dominated";
        case Dominance::not_dominated: return "not_dominated";
        case Dominance::undecided: return "undecided";
    }
    return "undecided";
}

TestFamily generating_family(OrderKind kind, const TestDomain& domain) {
    if (domain.axes.size() != 1) throw std::invalid_argument("generating families are defined on a single axis");
    const auto& x = domain.axes.front();
    const auto n = static_cast<Eigen::Index>(x.size());
    TestFamily out;
    out.exhaustive = true;
    auto push = [&](auto&& value_at) {
        Vector f(n);
        for (Eigen::Index i = 0; i < n; ++i) f[i] = value_at(i);
        out.functions.push_back(std::move(f));
    };
    push([](Eigen::Index) { return 1.0; });
    push([](Eigen::Index) { return -1.0; });
    switch (kind) {
    case OrderKind::increasing:
        for (Eigen::Index k = 1; k < n; ++k) push([k](Eigen::Index i) { return i >= k ? 1.0 : 0.0; });
        break;
    case OrderKind::convex:
        push([&](Eigen::Index i) { return x[static_cast<std::size_t>(i)]; });
        push([&](Eigen::Index i) { return -x[static_cast<std::size_t>(i)]; });
        for (Eigen::Index k = 1; k + 1 < n; ++k)
            push([&, k](Eigen::Index i) { return std::max(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(k)], 0.0); });
        break;
    case OrderKind::increasing_convex:
        for (Eigen::Index k = 0; k + 1 < n; ++k)
            push([&, k](Eigen::Index i) { return std::max(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(k)], 0.0); });
        break;
    default: throw std::invalid_argument("generating families exist for 1-D orders only");
    }
    return out;
}

DominanceResult stochastic_dominance(const Distribution& p, const Distribution& q, const OrderSpec& order,
                                     const TestFamily& family) {
    if (p.probabilities.size() != q.probabilities.size()) throw std::invalid_argument("support mismatch");
    constexpr double tol = 1e-10;
    DominanceResult result;
    if (order.kind == OrderKind::increasing) {
        // p <= q iff every upper tail of p is no heavier than that of q.
        double tail_p = 0.0;
        double tail_q = 0.0;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = p.probabilities.size(); k-- > 0;) {
            tail_p += p.probabilities[k];
            tail_q += q.probabilities[k];
            double gap = tail_p - tail_q;
            if (gap > worst) {
                worst = gap;
                result.witness = k;
                result.gap = gap;
            }
        }
        result.verdict = worst <= tol ? Dominance::dominated : Dominance::not_dominated;
        return result;
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < family.functions.size(); ++m) {
        double gap = p.expectation(family.functions[m]) - q.expectation(family.functions[m]);
        if (gap > worst) {
            worst = gap;
            result.witness = m;
            result.gap = gap;
        }
    }
    if (worst > tol) result.verdict = Dominance::not_dominated;
    else result.verdict = family.exhaustive ? Dominance::dominated : Dominance::undecided;
    return result;
}

}  // namespace stochorder
