#include "stochorder/ips.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "stochorder/semigroup.hpp"

namespace stochorder {

namespace {

using Rational = boost::multiprecision::cpp_rational;

std::uint64_t bit(int site) { return std::uint64_t{1} << site; }

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

void require_matrix_size(int sites) {
    if (sites < 1 || sites > ips_matrix_site_limit)
        throw std::invalid_argument("exact matrices need 1 <= n <= " + std::to_string(ips_matrix_site_limit) +
                                    " sites, got " + std::to_string(sites));
}

/// Enumerates all assignments of the dependency sites of `site`, calling
/// visit(mask) with every other spin at 0.
template <class Visit>
void for_each_local(const SpinSystem& sys, int site, Visit&& visit) {
    auto deps = sys.dependency(site);
    const std::uint64_t count = std::uint64_t{1} << deps.size();
    for (std::uint64_t local = 0; local < count; ++local) {
        std::uint64_t mask = 0;
        for (std::size_t k = 0; k < deps.size(); ++k)
            if (local & (std::uint64_t{1} << k)) mask |= bit(deps[k]);
        visit(mask);
    }
}

struct Fenwick {
    explicit Fenwick(std::size_t n) : tree(n + 1, 0.0) {}
    void add(std::size_t i, double delta) {
        for (++i; i < tree.size(); i += i & (~i + 1)) tree[i] += delta;
    }
    [[nodiscard]] double total() const {
        double acc = 0.0;
        for (std::size_t i = tree.size() - 1; i > 0; i -= i & (~i + 1)) acc += tree[i];
        return acc;
    }
    /// Smallest index whose prefix sum exceeds `target`.
    [[nodiscard]] std::size_t find(double target) const {
        std::size_t pos = 0;
        std::size_t step = 1;
        while (step * 2 < tree.size()) step *= 2;
        for (; step > 0; step /= 2) {
            if (pos + step < tree.size() && tree[pos + step] <= target) {
                pos += step;
                target -= tree[pos];
            }
        }
        return pos;  // zero-based index of the next element
    }
    std::vector<double> tree;
};

}  // namespace

std::string to_string(SpinRule rule) {
    switch (rule) {
    case SpinRule::contact: return "contact";
    case SpinRule::voter: return "voter";
    case SpinRule::anti_voter: return "anti_voter";
    case SpinRule::glauber: return "glauber";
    case SpinRule::independent: return "independent";
    case SpinRule::custom: return "custom";
    }
    return "unknown";
}

SpinRule spin_rule_from_string(const std::string& name) {
    for (auto rule : {SpinRule::contact, SpinRule::voter, SpinRule::anti_voter, SpinRule::glauber,
                      SpinRule::independent, SpinRule::custom}) {
        if (to_string(rule) == name) return rule;
    }
    if (name == "anti-voter" || name == "antivoter") return SpinRule::anti_voter;
    throw std::invalid_argument("unknown spin rule '" + name + "'");
}

SpinSystem::SpinSystem(int sites, std::vector<std::pair<int, int>> edges, SpinRule rule, Parameters params)
    : sites_(sites), edges_(std::move(edges)), adjacency_(uz(std::max(sites, 0))), rule_(rule), params_(params) {
    if (sites < 1) throw std::invalid_argument("a spin system needs at least one site");
    for (const auto& [u, v] : edges_) {
        if (u < 0 || v < 0 || u >= sites || v >= sites || u == v)
            throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) + ") is invalid");
        adjacency_[uz(u)].push_back(v);
        adjacency_[uz(v)].push_back(u);
    }
    for (auto& list : adjacency_) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(params_.infection) || !finite_nonneg(params_.up) || !finite_nonneg(params_.down) ||
        !std::isfinite(params_.beta))
        throw std::invalid_argument("spin rule parameters must be finite and rates non-negative");
}

SpinSystem SpinSystem::custom(int sites, std::vector<std::vector<double>> table) {
    if (sites < 1 || sites > ips_matrix_site_limit)
        throw std::invalid_argument("custom rate tables support 1..12 sites");
    if (table.size() != uz(sites)) throw std::invalid_argument("custom rate table needs one row per site");
    for (const auto& row : table) {
        if (row.size() != (std::size_t{1} << sites))
            throw std::invalid_argument("custom rate table rows need 2^n entries");
        for (double v : row)
            if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("custom rates must be finite and >= 0");
    }
    SpinSystem sys(sites, {}, SpinRule::custom);
    sys.table_ = std::move(table);
    return sys;
}

SpinSystem SpinSystem::path(int sites, SpinRule rule, Parameters params) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < sites; ++i) edges.emplace_back(i, i + 1);
    return SpinSystem(sites, std::move(edges), rule, params);
}

SpinSystem SpinSystem::cycle(int sites, SpinRule rule, Parameters params) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < sites; ++i) edges.emplace_back(i, i + 1);
    if (sites > 2) edges.emplace_back(sites - 1, 0);
    return SpinSystem(sites, std::move(edges), rule, params);
}

const std::vector<int>& SpinSystem::neighbours(int site) const { return adjacency_.at(uz(site)); }

std::vector<int> SpinSystem::dependency(int site) const {
    if (rule_ == SpinRule::custom) {
        std::vector<int> all(uz(sites_));
        for (int i = 0; i < sites_; ++i) all[uz(i)] = i;
        return all;
    }
    if (rule_ == SpinRule::independent) return {site};
    auto out = neighbours(site);
    out.insert(std::lower_bound(out.begin(), out.end(), site), site);
    return out;
}

template <class Spin>
double SpinSystem::rate_impl(int site, Spin&& spin) const {
    const int own = spin(site);
    switch (rule_) {
    case SpinRule::independent: return own ? params_.down : params_.up;
    case SpinRule::contact: {
        if (own) return 1.0;
        int infected = 0;
        for (int j : adjacency_[uz(site)]) infected += spin(j);
        return params_.infection * infected;
    }
    case SpinRule::voter:
    case SpinRule::anti_voter: {
        int agree = 0;
        for (int j : adjacency_[uz(site)]) agree += spin(j) == own ? 1 : 0;
        int disagree = static_cast<int>(adjacency_[uz(site)].size()) - agree;
        return rule_ == SpinRule::voter ? disagree : agree;
    }
    case SpinRule::glauber: {
        int field = 0;
        for (int j : adjacency_[uz(site)]) field += 2 * spin(j) - 1;
        return 1.0 / (1.0 + std::exp(2.0 * params_.beta * (2 * own - 1) * field));
    }
    case SpinRule::custom: {
        std::uint64_t mask = 0;
        for (int j = 0; j < sites_; ++j)
            if (spin(j)) mask |= bit(j);
        return table_[uz(site)][mask];
    }
    }
    return 0.0;
}

double SpinSystem::rate(int site, const SpinConfig& sigma) const {
    return rate_impl(site, [&sigma](int j) { return static_cast<int>(sigma[uz(j)] != 0); });
}

double SpinSystem::rate(int site, std::uint64_t mask) const {
    return rate_impl(site, [mask](int j) { return static_cast<int>((mask >> j) & 1U); });
}

std::uint64_t config_to_mask(const SpinConfig& sigma) {
    if (sigma.size() > 63) throw std::invalid_argument("configuration too long for a bit mask");
    std::uint64_t mask = 0;
    for (std::size_t j = 0; j < sigma.size(); ++j)
        if (sigma[j]) mask |= std::uint64_t{1} << j;
    return mask;
}

SpinConfig mask_to_config(std::uint64_t mask, int sites) {
    SpinConfig out(uz(sites));
    for (int j = 0; j < sites; ++j) out[uz(j)] = static_cast<std::uint8_t>((mask >> j) & 1U);
    return out;
}

nlohmann::json RateConstants::to_json() const {
    nlohmann::json dep = nlohmann::json::array();
    for (const auto& row : dependence) {
        nlohmann::json entry = nlohmann::json::object();
        for (const auto& [u, value] : row) entry[std::to_string(u)] = value;
        dep.push_back(entry);
    }
    return {{"c", max_rate}, {"c_u", dep}, {"M", spread}};
}

RateConstants rate_constants(const SpinSystem& sys) {
    const int n = sys.sites();
    if (n > 20 || (sys.rule() == SpinRule::custom && n > ips_matrix_site_limit))
        throw std::invalid_argument("rate constants are enumerated for n <= 20 (n <= 12 for custom tables)");
    RateConstants out;
    out.max_rate.assign(uz(n), 0.0);
    out.dependence.resize(uz(n));
    for (int i = 0; i < n; ++i) {
        auto deps = sys.dependency(i);
        for_each_local(sys, i, [&](std::uint64_t mask) {
            double here = sys.rate(i, mask);
            out.max_rate[uz(i)] = std::max(out.max_rate[uz(i)], here);
            for (int u : deps) {
                if (u == i) continue;
                double diff = std::abs(here - sys.rate(i, mask ^ bit(u)));
                auto& slot = out.dependence[uz(i)][u];
                slot = std::max(slot, diff);
            }
        });
        double total = 0.0;
        for (const auto& [u, value] : out.dependence[uz(i)]) total += value;
        out.spread = std::max(out.spread, total);
    }
    return out;
}

VerificationReport check_attractive(const SpinSystem& sys) {
    const int n = sys.sites();
    if (n > 20 || (sys.rule() == SpinRule::custom && n > ips_matrix_site_limit))
        throw std::invalid_argument("attractiveness is enumerated for n <= 20 (n <= 12 for custom tables)");
    VerificationReport report("attractive");
    double worst = 0.0;
    nlohmann::json witness;
    std::size_t checked = 0;
    for (int i = 0; i < n; ++i) {
        auto deps = sys.dependency(i);
        for_each_local(sys, i, [&](std::uint64_t mask) {
            for (int x : deps) {
                if (x == i || (mask & bit(x))) continue;  // visit each (σ[x,0], σ[x,1]) pair once
                ++checked;
                double low = sys.rate(i, mask);
                double high = sys.rate(i, mask | bit(x));
                double gap = (mask & bit(i)) ? low - high : high - low;
                if (gap < worst) {
                    worst = gap;
                    witness = {{"site", i}, {"flipped", x}, {"sigma", mask_to_config(mask, n)}, {"gap", gap}};
                }
            }
        });
    }
    report.metrics()["pairs_checked"] = checked;
    report.add("attractiveness", worst < 0.0 ? Status::fail : Status::pass, worst, 0.0, witness,
               "c(i,s[x,1]) - c(i,s[x,0]) signed by s_i");
    return report;
}

IPSMatrices build_matrices(const SpinSystem& sys) {
    const int n = sys.sites();
    require_matrix_size(n);
    const auto states = std::uint64_t{1} << n;
    const auto rows = static_cast<Eigen::Index>(states) * n;

    std::vector<Triplet> a_entries;
    std::vector<Triplet> phi_entries;
    std::vector<Triplet> b_entries;
    std::vector<Triplet> c_entries;
    for (std::uint64_t sigma = 0; sigma < states; ++sigma) {
        const auto s = static_cast<Eigen::Index>(sigma);
        double exit = 0.0;
        for (int i = 0; i < n; ++i) {
            double rate = sys.rate(i, sigma);
            if (rate == 0.0) continue;
            a_entries.emplace_back(s, static_cast<Eigen::Index>(sigma ^ bit(i)), rate);
            exit += rate;
        }
        a_entries.emplace_back(s, s, -exit);

        for (int x = 0; x < n; ++x) {
            const Eigen::Index row = s * n + x;
            const std::uint64_t up = sigma | bit(x);
            const std::uint64_t down = sigma & ~bit(x);
            phi_entries.emplace_back(row, static_cast<Eigen::Index>(up), 1.0);
            phi_entries.emplace_back(row, static_cast<Eigen::Index>(down), -1.0);

            // The flip at x itself acts on Φf(σ,x) as killing at rate c(x,σ[x,1]) + c(x,σ[x,0]).
            double diagonal = -(sys.rate(x, up) + sys.rate(x, down));
            for (int i = 0; i < n; ++i) {
                if (i == x) continue;
                double hi = sys.rate(i, up);
                double lo = sys.rate(i, down);
                double mean = 0.5 * (hi + lo);
                if (mean != 0.0) {
                    b_entries.emplace_back(row, static_cast<Eigen::Index>(sigma ^ bit(i)) * n + x, mean);
                    diagonal -= mean;
                }
                double sign = (sigma & bit(i)) ? -1.0 : 1.0;
                double weight = 0.5 * (hi - lo) * sign;
                if (weight != 0.0) {
                    c_entries.emplace_back(row, static_cast<Eigen::Index>(up) * n + i, weight);
                    c_entries.emplace_back(row, static_cast<Eigen::Index>(down) * n + i, weight);
                }
            }
            b_entries.emplace_back(row, row, diagonal);
        }
    }
    auto assemble = [](Eigen::Index r, Eigen::Index c, const std::vector<Triplet>& entries) {
        SparseMatrix m(r, c);
        m.setFromTriplets(entries.begin(), entries.end());
        m.makeCompressed();
        return m;
    };
    GridInfo spins;
    spins.shape = std::vector<int>(uz(n), 2);
    const auto s_count = static_cast<Eigen::Index>(states);
    return IPSMatrices{GridOperator(assemble(s_count, s_count, a_entries), OperatorKind::generator, spins),
                       GridOperator(assemble(rows, s_count, phi_entries), OperatorKind::order_map, spins),
                       GridOperator(assemble(rows, rows, b_entries), OperatorKind::generator, spins),
                       GridOperator(assemble(rows, rows, c_entries), OperatorKind::general, spins)};
}

double exact_intertwining_residual(const IPSMatrices& m) {
    using Row = std::map<Eigen::Index, Rational>;
    auto sparse_row = [](const SparseMatrix& mat, Eigen::Index r) {
        Row out;
        for (SparseMatrix::InnerIterator it(mat, r); it; ++it) out[it.col()] += Rational(it.value());
        return out;
    };
    const auto& A = m.A.matrix();
    const auto& phi = m.phi.matrix();
    Rational worst = 0;
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
        Row lhs;
        for (SparseMatrix::InnerIterator it(phi, r); it; ++it) {
            Rational w(it.value());
            for (const auto& [col, v] : sparse_row(A, it.col())) lhs[col] += w * v;
        }
        // (B + C)Φ accumulated exactly from the separate B and C entries.
        for (const SparseMatrix* part : {&m.B.matrix(), &m.C.matrix()}) {
            for (SparseMatrix::InnerIterator it(*part, r); it; ++it) {
                Rational w(it.value());
                for (const auto& [col, v] : sparse_row(phi, it.col())) lhs[col] -= w * v;
            }
        }
        for (const auto& [col, v] : lhs) {
            Rational mag = v < 0 ? Rational(-v) : v;
            if (mag > worst) worst = mag;
        }
    }
    return static_cast<double>(worst);
}

DiscreteOrderMap spin_order_map(const SpinSystem& sys, const IPSMatrices& m) {
    const int n = sys.sites();
    DiscreteOrderMap out;
    out.order = OrderSpec::simple(OrderKind::spin_monotone);
    out.phi = m.phi;
    out.block_sizes = {m.phi.rows()};
    out.surjective = false;
    out.domain = TestDomain::spins(n);
    if (n <= 8) {
        // f(σ) = Σ over set bits k of Φf(σ restricted to sites ≤ k, k).
        const auto states = std::uint64_t{1} << n;
        out.pseudo_inverse = DenseMatrix::Zero(static_cast<Eigen::Index>(states), m.phi.rows());
        for (std::uint64_t sigma = 0; sigma < states; ++sigma) {
            for (int k = 0; k < n; ++k) {
                if (!(sigma & bit(k))) continue;
                std::uint64_t prefix = sigma & ((bit(k) << 1) - 1);
                out.pseudo_inverse(static_cast<Eigen::Index>(sigma), static_cast<Eigen::Index>(prefix) * n + k) = 1.0;
            }
        }
    }
    return out;
}

VerificationReport verify_monotone_preservation(const SpinSystem& sys, const PreservationOptions& options) {
    const int n = sys.sites();
    require_matrix_size(n);
    std::vector<Vector> functions;
    if (options.mode == PreservationMode::exhaustive) {
        if (n > 4) throw std::invalid_argument("exhaustive monotone enumeration needs n <= 4");
        functions = monotone_boolean_functions(n);
    } else {
        functions = generate_test_family(OrderSpec::simple(OrderKind::spin_monotone), TestDomain::spins(n),
                                         options.random_functions, options.seed)
                        .functions;
    }
    auto matrices = build_matrices(sys);
    VerificationReport report("monotone_preservation");
    report.metrics()["functions"] = functions.size();
    report.metrics()["mode"] = options.mode == PreservationMode::exhaustive ? "exhaustive" : "randomized";
    const auto states = std::uint64_t{1} << n;
    for (double t : options.times) {
        double worst = std::numeric_limits<double>::infinity();
        nlohmann::json witness;
        for (std::size_t m = 0; m < functions.size(); ++m) {
            Vector u = expm_apply(matrices.A, t, functions[m]);
            for (std::uint64_t sigma = 0; sigma < states; ++sigma) {
                for (int i = 0; i < n; ++i) {
                    if (sigma & bit(i)) continue;
                    double gap = u[static_cast<Eigen::Index>(sigma | bit(i))] - u[static_cast<Eigen::Index>(sigma)];
                    if (gap < worst) {
                        worst = gap;
                        witness = {{"function", m},
                                   {"f", std::vector<double>(functions[m].data(), functions[m].data() + functions[m].size())},
                                   {"sigma", mask_to_config(sigma, n)},
                                   {"site", i},
                                   {"gap", gap}};
                    }
                }
            }
        }
        bool holds = worst >= -options.tolerance;
        report.add("monotone t=" + std::to_string(t), holds ? Status::pass : Status::fail,
                   std::isfinite(worst) ? worst : 0.0, options.tolerance, holds ? nlohmann::json() : witness);
    }
    return report;
}

VerificationReport verify_ips_lower_bound(const SpinSystem& sys, const Vector& f, const Vector& h, double t,
                                          double tolerance) {
    auto matrices = build_matrices(sys);
    auto phi = spin_order_map(sys, matrices);
    if (f.size() != matrices.A.rows()) throw std::invalid_argument("function length must be 2^n");
    return verify_lower_bound(matrices.A, matrices.B, phi, f, h, t, tolerance);
}

double triple_norm(const Vector& f, int sites) {
    const auto states = std::uint64_t{1} << sites;
    if (static_cast<std::uint64_t>(f.size()) != states) throw std::invalid_argument("function length must be 2^n");
    double total = 0.0;
    for (int x = 0; x < sites; ++x) {
        double variation = 0.0;
        for (std::uint64_t sigma = 0; sigma < states; ++sigma) {
            if (sigma & bit(x)) continue;
            variation = std::max(variation, std::abs(f[static_cast<Eigen::Index>(sigma | bit(x))] -
                                                     f[static_cast<Eigen::Index>(sigma)]));
        }
        total += variation;
    }
    return total;
}

VerificationReport verify_triple_norm_growth(const SpinSystem& sys, const std::vector<Vector>& functions,
                                             const std::vector<double>& times) {
    auto matrices = build_matrices(sys);
    double spread = rate_constants(sys).spread;
    VerificationReport report("triple_norm_growth");
    report.metrics()["M"] = spread;
    for (double t : times) {
        double worst = -std::numeric_limits<double>::infinity();
        nlohmann::json witness;
        for (std::size_t m = 0; m < functions.size(); ++m) {
            double before = triple_norm(functions[m], sys.sites());
            double after = triple_norm(expm_apply(matrices.A, t, functions[m]), sys.sites());
            double excess = after - (std::exp(t * spread) * before + 1e-9);
            if (excess > worst) {
                worst = excess;
                witness = {{"function", m}, {"before", before}, {"after", after}};
            }
        }
        bool holds = worst <= 0.0;
        report.add("growth t=" + std::to_string(t), holds ? Status::pass : Status::fail,
                   std::isfinite(worst) ? worst : 0.0, 1e-9, holds ? nlohmann::json() : witness);
    }
    return report;
}

double MonotoneFunction::operator()(const SpinConfig& sigma) const {
    double best = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        bool all = std::all_of(terms[k].begin(), terms[k].end(), [&](int i) { return sigma.at(uz(i)) != 0; });
        double w = k < weights.size() ? weights[k] : 1.0;
        if (all) best = std::max(best, w);
    }
    return best;
}

GillespieStats gillespie(const SpinSystem& sys, const SpinConfig& start, double t, std::uint64_t seed,
                         std::size_t paths, const std::vector<MonotoneFunction>& functions) {
    const int n = sys.sites();
    if (start.size() != uz(n)) throw std::invalid_argument("start configuration has the wrong length");
    if (t < 0.0) throw std::invalid_argument("simulation time must be non-negative");

    // Sites whose rate changes when a given site flips.
    std::vector<std::vector<int>> affected(uz(n));
    for (int j = 0; j < n; ++j)
        for (int i : sys.dependency(j)) affected[uz(i)].push_back(j);

    auto run_path = [&](std::size_t path) {
        std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
        std::mt19937_64 rng(sequence);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        SpinConfig sigma = start;
        std::vector<double> rates(uz(n));
        Fenwick tree(uz(n));
        for (int i = 0; i < n; ++i) {
            rates[uz(i)] = sys.rate(i, sigma);
            tree.add(uz(i), rates[uz(i)]);
        }
        double clock = 0.0;
        while (true) {
            double total = tree.total();
            if (total <= 0.0) break;
            clock += -std::log1p(-uniform(rng)) / total;
            if (clock > t) break;
            auto site = std::min(tree.find(uniform(rng) * total), uz(n - 1));
            while (rates[site] <= 0.0 && site > 0) --site;  // guard against rounding at bin edges
            sigma[site] ^= 1U;
            for (int j : affected[site]) {
                double fresh = sys.rate(j, sigma);
                tree.add(uz(j), fresh - rates[uz(j)]);
                rates[uz(j)] = fresh;
            }
        }
        return sigma;
    };

    std::vector<std::vector<std::uint8_t>> finals(paths);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 16));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t p = w; p < paths; p += workers) finals[p] = run_path(p);
            });
        }
    }

    GillespieStats stats;
    stats.paths = paths;
    const double count = static_cast<double>(std::max<std::size_t>(paths, 1));
    auto mean_and_error = [count](double sum, double sum_sq) {
        double mean = sum / count;
        double var = count > 1 ? std::max(0.0, (sum_sq - count * mean * mean) / (count - 1)) : 0.0;
        return std::pair{mean, std::sqrt(var / count)};
    };
    for (int i = 0; i < n; ++i) {
        std::size_t ones = 0;
        for (const auto& final_state : finals) ones += final_state[uz(i)];
        auto [mean, err] = mean_and_error(static_cast<double>(ones), static_cast<double>(ones));
        stats.marginal_mean.push_back(mean);
        stats.marginal_stderr.push_back(err);
    }
    for (const auto& f : functions) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const auto& final_state : finals) {
            double v = f(final_state);
            sum += v;
            sum_sq += v * v;
        }
        auto [mean, err] = mean_and_error(sum, sum_sq);
        stats.function_mean.push_back(mean);
        stats.function_stderr.push_back(err);
    }
    return stats;
}

}  // namespace stochorder
